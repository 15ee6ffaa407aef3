#include "anydb/event.hpp"

#include <sstream>

#include "anydb/txn.hpp"

namespace anydb {

const char* err_name(Err e) {
  switch (e) {
    case Err::EmptyProgram: return "EmptyProgram";
    case Err::MalformedProgram: return "MalformedProgram";
    case Err::InvalidItemCount: return "InvalidItemCount";
    case Err::WrongPartition: return "WrongPartition";
    case Err::DuplicateKey: return "DuplicateKey";
    case Err::KeyNotFound: return "KeyNotFound";
    case Err::UnknownTable: return "UnknownTable";
    case Err::UnknownAc: return "UnknownAc";
    case Err::QueueDisconnected: return "QueueDisconnected";
    case Err::InsufficientAcs: return "InsufficientAcs";
    case Err::InvalidPhaseState: return "InvalidPhaseState";
    case Err::UnexpectedAck: return "UnexpectedAck";
    case Err::BuildIncomplete: return "BuildIncomplete";
    case Err::BadConfig: return "BadConfig";
    case Err::BadTrace: return "BadTrace";
    case Err::InvariantViolated: return "InvariantViolated";
  }
  return "Unknown";
}

static const char* kTableNames[kTableCount] = {
    "WAREHOUSE", "DISTRICT", "CUSTOMER", "HISTORY", "ORDERS",
    "NEW_ORDER", "ORDER_LINE", "ITEM", "STOCK"};

const char* table_name(TableId t) { return kTableNames[int(t)]; }

TableId table_from_name(const std::string& s) {
  for (int i = 0; i < kTableCount; i++)
    if (s == kTableNames[i]) return TableId(i);
  throw_db(Err::UnknownTable, s);
}

int table_width(TableId t) {
  switch (t) {
    case TableId::Warehouse: return col::wh::count_;
    case TableId::District: return col::dist::count_;
    case TableId::Customer: return col::cust::count_;
    case TableId::History: return col::hist::count_;
    case TableId::Orders: return col::ord::count_;
    case TableId::NewOrder: return col::nord::count_;
    case TableId::OrderLine: return col::oline::count_;
    case TableId::Item: return col::item::count_;
    case TableId::Stock: return col::stock::count_;
  }
  return 0;
}

const char* const* table_col_names(TableId t) {
  static const char* wh[] = {"w_id", "w_ytd"};
  static const char* dist[] = {"d_id", "d_w_id", "d_ytd"};
  static const char* cust[] = {"c_id", "c_d_id", "c_w_id", "c_last",
                               "c_state", "c_balance", "c_ytd_payment", "c_payment_cnt"};
  static const char* hist[] = {"h_w_id", "h_d_id", "h_c_id", "h_amount", "h_date"};
  static const char* ord[] = {"o_id", "o_w_id", "o_d_id", "o_c_id", "o_entry_d"};
  static const char* nord[] = {"no_o_id", "no_w_id", "no_d_id"};
  static const char* oline[] = {"ol_o_id", "ol_w_id", "ol_d_id", "ol_number",
                                "ol_i_id", "ol_amount", "ol_quantity"};
  static const char* item[] = {"i_id", "i_price"};
  static const char* stock[] = {"s_i_id", "s_w_id", "s_quantity"};
  switch (t) {
    case TableId::Warehouse: return wh;
    case TableId::District: return dist;
    case TableId::Customer: return cust;
    case TableId::History: return hist;
    case TableId::Orders: return ord;
    case TableId::NewOrder: return nord;
    case TableId::OrderLine: return oline;
    case TableId::Item: return item;
    case TableId::Stock: return stock;
  }
  return nullptr;
}

std::string last_name_string(int code) {
  static const char* syl[10] = {"BAR",  "OUGHT", "ABLE", "PRI",   "PRES",
                                "ESE",  "ANTI",  "CALLY", "ATION", "EING"};
  return std::string(syl[(code / 100) % 10]) + syl[(code / 10) % 10] + syl[code % 10];
}

const char* op_kind_name(const OpKind& k) {
  static const char* names[] = {"ReadRecord",    "UpdateRecord", "InsertRecord",
                                "SelectCustomerByLastName", "ScanFilter", "JoinBuild",
                                "JoinProbe",     "Aggregate",    "CompileQuery",
                                "Commit",        "Ack",          "BeamInit"};
  return names[k.index()];
}

bool is_write_op(const OpKind& k) {
  return std::holds_alternative<UpdateRecord>(k) || std::holds_alternative<InsertRecord>(k);
}

bool is_storage_op(const OpKind& k) {
  return std::holds_alternative<ReadRecord>(k) || std::holds_alternative<UpdateRecord>(k) ||
         std::holds_alternative<InsertRecord>(k) ||
         std::holds_alternative<SelectCustomerByLastName>(k);
}

// ---------------------------------------------------------------------------

std::vector<Event> make_txn_events(const TransactionProgram& prog, uint64_t txn_id) {
  if (prog.ops.empty()) throw_db(Err::EmptyProgram, "program has no ops");
  const Commit* commit = std::get_if<Commit>(&prog.ops.back());
  if (!commit) throw_db(Err::MalformedProgram, "last op must be Commit");
  for (size_t i = 0; i + 1 < prog.ops.size(); i++)
    if (std::holds_alternative<Commit>(prog.ops[i]))
      throw_db(Err::MalformedProgram, "Commit must be the unique sink");
  if (commit->expected_ack_count != prog.write_count())
    throw_db(Err::MalformedProgram, "expected_ack_count does not match write ops");

  if (prog.ops.size() > 64) throw_db(Err::MalformedProgram, "program exceeds 64 ops");

  std::vector<Event> out;
  out.reserve(prog.ops.size());
  uint64_t mask = 0;
  for (size_t i = 0; i < prog.ops.size(); i++) {
    Event e;
    e.event_id = (txn_id << 8) | uint64_t(i);
    e.txn_or_query_id = txn_id;
    e.op_index = int32_t(i);
    e.op = prog.ops[i];
    if (is_write_op(e.op)) mask |= uint64_t(1) << i;
    out.push_back(std::move(e));
  }
  std::get<Commit>(out.back().op).expected_mask = mask;
  return out;
}

std::vector<DataBatch> batch_split(std::vector<Row> rows, int capacity, StreamId sid) {
  if (capacity <= 0) throw_db(Err::BadConfig, "batch capacity must be positive");
  std::vector<DataBatch> out;
  if (rows.empty()) {
    DataBatch b;
    b.sid = sid;
    b.batch_seq = 0;
    b.last = true;
    b.rows = std::make_shared<std::vector<Row>>();
    out.push_back(std::move(b));
    return out;
  }
  size_t n = rows.size();
  uint32_t seq = 0;
  for (size_t off = 0; off < n; off += size_t(capacity)) {
    size_t end = std::min(off + size_t(capacity), n);
    auto chunk = std::make_shared<std::vector<Row>>(rows.begin() + off, rows.begin() + end);
    DataBatch b;
    b.sid = sid;
    b.batch_seq = seq++;
    b.last = (end == n);
    b.rows = std::move(chunk);
    out.push_back(std::move(b));
  }
  return out;
}

std::optional<std::string> validate_event(const Event& e) {
  if (e.op_index < 0) return "negative op_index";
  if (e.conflict_class != kNoClass && e.global_seq == 0)
    return "classed event without a global_seq stamp";
  if (const Commit* c = std::get_if<Commit>(&e.op)) {
    if (c->expected_ack_count < 0) return "negative expected_ack_count";
  }
  // Self-contained storage ops hold literal keys and need no streams; only
  // ops whose key resolves from another op's output may carry one.
  if (const UpdateRecord* u = std::get_if<UpdateRecord>(&e.op)) {
    if (!u->key_from_stream && !e.required_streams.empty())
      return "pure storage update must not require streams";
    if (u->key_from_stream && e.required_streams.empty() && e.global_seq != 0)
      return "stream-keyed update routed without its stream";
  }
  if (const InsertRecord* ins = std::get_if<InsertRecord>(&e.op)) {
    if (!ins->key_from_stream && ins->cid_col < 0 && !e.required_streams.empty())
      return "pure storage insert must not require streams";
  }
  if (std::holds_alternative<ReadRecord>(e.op) && !e.required_streams.empty())
    return "read must not require streams";
  if (const BeamInit* b = std::get_if<BeamInit>(&e.op)) {
    if (b->target == kNoAc) return "beam without a target";
    if (!b->stream.valid()) return "beam without a stream id";
  }
  return std::nullopt;
}

std::optional<std::string> validate_txn_events(const std::vector<Event>& events) {
  if (events.empty()) return "no events";
  int writes = 0;
  const Commit* commit = nullptr;
  for (const Event& e : events) {
    if (auto v = validate_event(e)) return v;
    if (is_write_op(e.op)) writes++;
    if (const Commit* c = std::get_if<Commit>(&e.op)) {
      if (commit) return "multiple commits";
      commit = c;
    }
  }
  if (!commit) return "missing commit";
  if (!std::holds_alternative<Commit>(events.back().op)) return "commit is not the sink";
  if (commit->expected_ack_count != writes) {
    std::ostringstream os;
    os << "commit expects " << commit->expected_ack_count << " acks but program has " << writes
       << " writes";
    return os.str();
  }
  return std::nullopt;
}

}  // namespace anydb
