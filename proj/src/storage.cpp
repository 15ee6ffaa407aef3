#include "anydb/storage.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace anydb {

TableGroup table_group(TableId t) {
  switch (t) {
    case TableId::Warehouse: return TableGroup::Wh;
    case TableId::District: return TableGroup::Dist;
    case TableId::Customer: return TableGroup::Cust;
    case TableId::History: return TableGroup::Hist;
    case TableId::Orders:
    case TableId::NewOrder:
    case TableId::OrderLine: return TableGroup::Order;
    case TableId::Item:
    case TableId::Stock: return TableGroup::Stock;
  }
  throw_db(Err::UnknownTable, "bad table id");
}

std::map<Key, Row>& Partition::table(TableId t) {
  switch (t) {
    case TableId::Warehouse: return warehouse;
    case TableId::District: return district;
    case TableId::Customer: return customer;
    case TableId::Orders: return orders;
    case TableId::NewOrder: return new_order;
    case TableId::OrderLine: return order_line;
    case TableId::Item: return item;
    case TableId::Stock: return stock;
    case TableId::History: break;
  }
  throw_db(Err::UnknownTable, "HISTORY is not a keyed table");
}

const std::map<Key, Row>& Partition::table(TableId t) const {
  return const_cast<Partition*>(this)->table(t);
}

uint64_t state_hash(const Dataset& ds) {
  uint64_t h = fnv1a_init();
  for (const Partition& p : ds.partitions) {
    h = fnv1a_step(h, uint64_t(p.partition_id));
    for (int t = 0; t < kTableCount; t++) {
      TableId tid = TableId(t);
      if (tid == TableId::History) {
        // History is append-ordered per partition but the order across
        // concurrent appends is not semantic; fold order-independently.
        uint64_t acc = 0;
        for (const Row& r : p.history) acc += fnv1a_row(fnv1a_init(), r);
        h = fnv1a_step(h, acc);
        h = fnv1a_step(h, uint64_t(p.history.size()));
        continue;
      }
      for (const auto& [k, row] : p.table(tid)) {
        h = fnv1a_step(h, k);
        h = fnv1a_row(h, row);
      }
    }
  }
  return h;
}

static void check_class_order(Partition& p, TableId t, uint64_t global_seq) {
  if (global_seq == 0) return;
  int g = int(table_group(t));
  if (int64_t(global_seq) < p.applied_seq[g])
    throw_db(Err::InvariantViolated, "per-class apply order regressed");
  p.applied_seq[g] = int64_t(global_seq);
}

static void check_owner(const Partition& p, Key key, TableId t) {
  if (t == TableId::Item) return;  // replicated
  if (key_warehouse(key) != p.partition_id)
    throw_db(Err::WrongPartition,
             std::string(table_name(t)) + " key for warehouse " +
                 std::to_string(key_warehouse(key)) + " reached partition " +
                 std::to_string(p.partition_id));
}

ApplyResult apply_update(Partition& p, const UpdateRecord& u, uint64_t global_seq,
                         int64_t resolved_c) {
  Key key = u.key;
  if (u.key_from_stream) {
    if (resolved_c < 0) throw_db(Err::InvariantViolated, "stream-keyed update unresolved");
    key = key_cust(u.key_w, u.key_d, resolved_c);
  }
  check_owner(p, key, u.table);
  auto& tbl = p.table(u.table);
  auto it = tbl.find(key);
  if (it == tbl.end()) throw_db(Err::KeyNotFound, std::string(table_name(u.table)));
  check_class_order(p, u.table, global_seq);

  int64_t fp = 0;
  Row& row = it->second;
  for (const ColDelta& d : u.deltas) {
    row[d.col] += d.add;
    fp = int64_t(fnv1a_step(uint64_t(fp), uint64_t(d.col) ^ uint64_t(d.add)));
  }
  if (u.stock_dip) {
    int64_t& q = row[col::stock::s_quantity];
    if (q < 10) q += 91;
    fp ^= q;
  }
  return ApplyResult{Ack{0, AckStatus::Ok}, key, fp};
}

ApplyResult apply_insert(Partition& p, const InsertRecord& ins, uint64_t global_seq,
                         int64_t resolved_c) {
  Row row = ins.row;
  if (ins.cid_col >= 0) {
    if (resolved_c < 0) throw_db(Err::InvariantViolated, "stream-filled insert unresolved");
    row[ins.cid_col] = resolved_c;
  }
  if (ins.price_amount_col >= 0) {
    auto it = p.item.find(key_item(row[ins.price_item_col]));
    if (it == p.item.end()) throw_db(Err::KeyNotFound, "ITEM");
    row[ins.price_amount_col] = row[ins.price_qty_col] * it->second[col::item::i_price];
  }

  if (ins.keyless) {
    if (ins.table != TableId::History) throw_db(Err::MalformedProgram, "only HISTORY is keyless");
    if (row[col::hist::h_w_id] != p.partition_id)
      throw_db(Err::WrongPartition, "HISTORY row for another warehouse");
    check_class_order(p, ins.table, global_seq);
    p.history.push_back(row);
    return ApplyResult{Ack{0, AckStatus::Ok}, 0, row[col::hist::h_amount]};
  }

  Key key = ins.key;
  if (ins.key_from_stream) {
    if (resolved_c < 0) throw_db(Err::InvariantViolated, "stream-keyed insert unresolved");
    key = key_cust(ins.key_w, ins.key_d, resolved_c);
  }
  check_owner(p, key, ins.table);
  auto& tbl = p.table(ins.table);
  check_class_order(p, ins.table, global_seq);
  auto [it, inserted] = tbl.emplace(key, row);
  if (!inserted) throw_db(Err::DuplicateKey, std::string(table_name(ins.table)));
  return ApplyResult{Ack{0, AckStatus::Ok}, key, int64_t(fnv1a_row(fnv1a_init(), row))};
}

Row read_record(const Partition& p, const ReadRecord& r) {
  check_owner(p, r.key, r.table);
  const auto& tbl = p.table(r.table);
  auto it = tbl.find(r.key);
  if (it == tbl.end()) throw_db(Err::KeyNotFound, std::string(table_name(r.table)));
  return it->second;
}

std::vector<Row> select_customer_by_last_name(const Partition& p, int32_t w, int32_t d,
                                              int32_t last_name) {
  if (w != p.partition_id) throw_db(Err::WrongPartition, "by-name scan on wrong partition");
  if (d < 1 || d > int(p.cust_statics.size())) throw_db(Err::KeyNotFound, "DISTRICT");
  std::vector<Row> out;
  const auto& statics = *p.cust_statics[d - 1];
  for (const CustStatic& cs : statics) {  // statics are c_id-ordered
    if (cs.c_last != last_name) continue;
    auto it = p.customer.find(key_cust(w, d, cs.c_id));
    if (it == p.customer.end()) throw_db(Err::InvariantViolated, "static without customer row");
    out.push_back(it->second);
  }
  return out;
}

int64_t median_customer_by_last_name(const Partition& p, int32_t w, int32_t d,
                                     int32_t last_name) {
  if (w != p.partition_id) throw_db(Err::WrongPartition, "by-name scan on wrong partition");
  if (d < 1 || d > int(p.cust_statics.size())) throw_db(Err::KeyNotFound, "DISTRICT");
  const auto& statics = *p.cust_statics[d - 1];
  // One pass: count matches, remember ids in order (matches are few).
  InlineVec<int32_t, 64> ids;
  int n = 0;
  for (const CustStatic& cs : statics) {
    if (cs.c_last != last_name) continue;
    if (n < 64) ids.push_back(cs.c_id);
    n++;
  }
  if (n == 0) return -1;
  int idx = (n + 1) / 2 - 1;  // ceil(n/2) - 1
  if (idx < ids.size()) return ids[idx];
  // Overflowed the inline buffer; rescan counting up to idx.
  int seen = 0;
  for (const CustStatic& cs : statics)
    if (cs.c_last == last_name && seen++ == idx) return cs.c_id;
  return -1;
}

std::vector<Row> scan_filter_source(const Partition& p, ScanSource src, TableId table,
                                    const Predicate& pred, const Projection& proj) {
  std::vector<Row> out;
  if (src == ScanSource::OpenOrders) {
    // ORDERS joined with NEW_ORDER: open orders only, in NEW_ORDER key order.
    for (const auto& [k, no] : p.new_order) {
      auto it = p.orders.find(k);
      if (it == p.orders.end()) throw_db(Err::InvariantViolated, "NEW_ORDER without ORDERS row");
      if (!pred.matches(it->second)) continue;
      out.push_back(project_row(it->second, proj));
    }
    return out;
  }
  if (table == TableId::Customer) {
    // Served from the immutable statics; mutable columns joined in only when
    // the predicate or projection actually needs them.
    bool needs_mutable = proj.empty() || pred.col >= col::cust::c_balance;
    for (int8_t c : proj)
      if (c >= col::cust::c_balance) needs_mutable = true;
    for (int d = 1; d <= int(p.cust_statics.size()); d++) {
      for (const CustStatic& cs : *p.cust_statics[d - 1]) {
        Row full;
        full.n = col::cust::count_;
        full[col::cust::c_id] = cs.c_id;
        full[col::cust::c_d_id] = d;
        full[col::cust::c_w_id] = p.partition_id;
        full[col::cust::c_last] = cs.c_last;
        full[col::cust::c_state] = cs.c_state;
        if (needs_mutable) {
          auto it = p.customer.find(key_cust(p.partition_id, d, cs.c_id));
          if (it == p.customer.end())
            throw_db(Err::InvariantViolated, "static without customer row");
          full[col::cust::c_balance] = it->second[col::cust::c_balance];
          full[col::cust::c_ytd_payment] = it->second[col::cust::c_ytd_payment];
          full[col::cust::c_payment_cnt] = it->second[col::cust::c_payment_cnt];
        }
        if (!pred.matches(full)) continue;
        out.push_back(project_row(full, proj));
      }
    }
    return out;
  }
  if (table == TableId::History) {
    for (const Row& r : p.history)
      if (pred.matches(r)) out.push_back(project_row(r, proj));
    return out;
  }
  for (const auto& [k, r] : p.table(table))
    if (pred.matches(r)) out.push_back(project_row(r, proj));
  return out;
}

void dump_csv(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (int t = 0; t < kTableCount; t++) {
    TableId tid = TableId(t);
    std::ofstream f(dir + "/" + table_name(tid) + ".csv");
    const char* const* names = table_col_names(tid);
    for (int c = 0; c < table_width(tid); c++) f << (c ? "," : "") << names[c];
    f << "\n";
    auto emit = [&](const Row& r) {
      for (int c = 0; c < r.n; c++) {
        if (c) f << ",";
        if (tid == TableId::Customer && c == col::cust::c_last)
          f << last_name_string(int(r[c]));
        else if (tid == TableId::Customer && c == col::cust::c_state)
          f << state_string(int(r[c]));
        else
          f << r[c];
      }
      f << "\n";
    };
    for (const Partition& p : ds.partitions) {
      if (tid == TableId::History) {
        for (const Row& r : p.history) emit(r);
      } else {
        for (const auto& [k, r] : p.table(tid)) emit(r);
      }
    }
  }
}

}  // namespace anydb
