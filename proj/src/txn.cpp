#include "anydb/txn.hpp"

#include <sstream>

namespace anydb {

int TransactionProgram::write_count() const {
  int n = 0;
  for (const OpKind& k : ops)
    if (is_write_op(k)) n++;
  return n;
}

TransactionProgram payment_program(int32_t w_id, int32_t d_id, int32_t c_w_id, int32_t c_d_id,
                                   bool by_name, int32_t c_last_or_id, int64_t amount_cents,
                                   int64_t h_date) {
  TransactionProgram prog;
  prog.home_partition = w_id;
  prog.params.kind = TxnKind::Payment;
  prog.params.w = w_id;
  prog.params.d = d_id;
  prog.params.c_w = c_w_id;
  prog.params.c_d = c_d_id;
  prog.params.by_name = by_name;
  prog.params.amount = amount_cents;
  prog.params.h_date = h_date;
  if (by_name)
    prog.params.c_last = c_last_or_id;
  else
    prog.params.c_id = c_last_or_id;

  UpdateRecord uw{TableId::Warehouse, key_wh(w_id)};
  uw.deltas.push_back({col::wh::w_ytd, amount_cents});
  prog.ops.emplace_back(uw);

  UpdateRecord ud{TableId::District, key_dist(w_id, d_id)};
  ud.deltas.push_back({col::dist::d_ytd, amount_cents});
  prog.ops.emplace_back(ud);

  int16_t select_idx = -1;
  if (by_name) {
    select_idx = int16_t(prog.ops.size());
    prog.ops.emplace_back(SelectCustomerByLastName{c_w_id, c_d_id, c_last_or_id});
  }

  UpdateRecord uc1{TableId::Customer};
  uc1.deltas.push_back({col::cust::c_balance, -amount_cents});
  uc1.deltas.push_back({col::cust::c_ytd_payment, amount_cents});
  UpdateRecord uc2{TableId::Customer};
  uc2.deltas.push_back({col::cust::c_payment_cnt, 1});
  if (by_name) {
    uc1.key_from_stream = uc2.key_from_stream = true;
    uc1.key_w = uc2.key_w = c_w_id;
    uc1.key_d = uc2.key_d = c_d_id;
  } else {
    uc1.key = uc2.key = key_cust(c_w_id, c_d_id, c_last_or_id);
  }
  int16_t uc1_idx = int16_t(prog.ops.size());
  prog.ops.emplace_back(uc1);
  prog.ops.emplace_back(uc2);

  InsertRecord ih{TableId::History};
  ih.keyless = true;
  ih.row = make_row({w_id, d_id, by_name ? 0 : c_last_or_id, amount_cents, h_date});
  if (by_name) ih.cid_col = col::hist::h_c_id;
  int16_t ih_idx = int16_t(prog.ops.size());
  prog.ops.emplace_back(ih);

  prog.ops.emplace_back(Commit{5});

  if (by_name) {
    prog.deps.push_back({select_idx, uc1_idx});
    prog.deps.push_back({select_idx, int16_t(uc1_idx + 1)});
    prog.deps.push_back({select_idx, ih_idx});
  }
  return prog;
}

TransactionProgram neworder_program(int32_t w_id, int32_t d_id, int32_t c_id,
                                    const std::vector<ItemReq>& items, int64_t o_id,
                                    int64_t entry_year) {
  if (items.size() < 5 || items.size() > 15)
    throw_db(Err::InvalidItemCount, std::to_string(items.size()) + " items");

  TransactionProgram prog;
  prog.home_partition = w_id;
  prog.params.kind = TxnKind::NewOrder;
  prog.params.w = w_id;
  prog.params.d = d_id;
  prog.params.c_id = c_id;
  prog.params.o_id = o_id;
  prog.params.h_date = entry_year;
  for (const ItemReq& it : items) prog.params.items.push_back(it);

  prog.ops.emplace_back(ReadRecord{TableId::Customer, key_cust(w_id, d_id, c_id)});
  prog.ops.emplace_back(ReadRecord{TableId::Warehouse, key_wh(w_id)});

  InsertRecord io{TableId::Orders, key_order(w_id, d_id, o_id)};
  io.row = make_row({o_id, w_id, d_id, c_id, entry_year});
  prog.ops.emplace_back(io);

  InsertRecord in{TableId::NewOrder, key_order(w_id, d_id, o_id)};
  in.row = make_row({o_id, w_id, d_id});
  prog.ops.emplace_back(in);

  int line = 1;
  for (const ItemReq& it : items) {
    prog.ops.emplace_back(ReadRecord{TableId::Item, key_item(it.i_id)});

    UpdateRecord us{TableId::Stock, key_stock(w_id, it.i_id)};
    us.stock_dip = true;
    us.deltas.push_back({col::stock::s_quantity, -int64_t(it.qty)});
    prog.ops.emplace_back(us);

    InsertRecord il{TableId::OrderLine, key_oline(w_id, d_id, o_id, line)};
    il.row = make_row({o_id, w_id, d_id, line, it.i_id, 0, it.qty});
    il.price_amount_col = col::oline::ol_amount;
    il.price_item_col = col::oline::ol_i_id;
    il.price_qty_col = col::oline::ol_quantity;
    prog.ops.emplace_back(il);
    line++;
  }

  prog.ops.emplace_back(Commit{int32_t(2 + 2 * items.size())});
  return prog;
}

TransactionProgram program_from_params(const TxnParams& p) {
  if (p.kind == TxnKind::Payment)
    return payment_program(p.w, p.d, p.c_w, p.c_d, p.by_name,
                           p.by_name ? p.c_last : p.c_id, p.amount, p.h_date);
  std::vector<ItemReq> items(p.items.begin(), p.items.end());
  return neworder_program(p.w, p.d, p.c_id, items, p.o_id, p.h_date);
}

// ---------------------------------------------------------------------------

CommitTracker make_tracker(uint64_t txn_id, const std::vector<Event>& events, TimePoint admit) {
  CommitTracker t;
  t.txn_id = txn_id;
  t.admit_time = admit;
  for (const Event& e : events) {
    if (is_write_op(e.op)) {
      t.expected_mask |= (1ull << e.op_index);
      t.expected_count++;
    }
  }
  return t;
}

bool on_ack(CommitTracker& t, const Ack& a, int32_t op_index, TimePoint now) {
  uint64_t bit = 1ull << op_index;
  if (op_index < 0 || op_index > 63 || !(t.expected_mask & bit))
    throw_db(Err::UnexpectedAck,
             "txn " + std::to_string(t.txn_id) + " op " + std::to_string(op_index));
  if (a.status != AckStatus::Ok) t.failed = true;
  if (t.received_mask & bit) return false;  // duplicate, idempotent
  t.received_mask |= bit;
  if (t.received_mask == t.expected_mask && !t.committed) {
    t.committed = true;
    t.commit_time = now;  // commit time = last ack received
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

std::string trace_line(const HistoryRecord& r) {
  std::ostringstream os;
  os << r.txn_id << ',' << r.global_seq << ',' << r.op_index << ',' << r.kind << ','
     << table_name(r.table) << ',' << r.key << ',' << r.ac << ',' << r.local_order;
  return os.str();
}

HistoryRecord parse_trace_line(const std::string& line) {
  std::istringstream is(line);
  std::string field;
  std::vector<std::string> f;
  while (std::getline(is, field, ',')) f.push_back(field);
  if (f.size() != 8) throw_db(Err::BadTrace, "expected 8 fields: " + line);
  HistoryRecord r;
  try {
    r.txn_id = std::stoull(f[0]);
    r.global_seq = std::stoull(f[1]);
    r.op_index = std::stoi(f[2]);
    if (f[3] != "R" && f[3] != "W") throw_db(Err::BadTrace, "kind must be R or W");
    r.kind = f[3][0];
    r.table = table_from_name(f[4]);
    r.key = std::stoull(f[5]);
    r.ac = std::stoi(f[6]);
    r.local_order = uint32_t(std::stoul(f[7]));
  } catch (const DbException&) {
    throw;
  } catch (const std::exception& e) {
    throw_db(Err::BadTrace, std::string(e.what()) + ": " + line);
  }
  return r;
}

// ---------------------------------------------------------------------------

bool LockStreamJoin::compatible(const Entry& e, uint64_t txn, LockMode m) const {
  for (const auto& [h, hm] : e.holders) {
    if (h == txn) continue;
    if (m == LockMode::X || hm == LockMode::X) return false;
  }
  return true;
}

std::vector<LockDecision> LockStreamJoin::process(const LockRequest& req) {
  std::vector<LockDecision> out;
  Entry& e = items_[req.item];

  if (req.release) {
    for (size_t i = 0; i < e.holders.size(); i++) {
      if (e.holders[i].first == req.txn) {
        e.holders.erase(e.holders.begin() + i);
        break;
      }
    }
    out.push_back({req.txn, req.item, LockOutcome::Released});
    // The freed state joins against the FIFO queue: grant every now-compatible
    // waiter from the front.
    while (!e.waiters.empty()) {
      auto [t, m] = e.waiters.front();
      if (!compatible(e, t, m)) break;
      e.waiters.erase(e.waiters.begin());
      e.holders.push_back({t, m});
      out.push_back({t, req.item, LockOutcome::Granted});
    }
    return out;
  }

  if (e.waiters.empty() && compatible(e, req.txn, req.mode)) {
    e.holders.push_back({req.txn, req.mode});
    out.push_back({req.txn, req.item, LockOutcome::Granted});
  } else {
    e.waiters.push_back({req.txn, req.mode});
    out.push_back({req.txn, req.item, LockOutcome::Queued});
  }
  return out;
}

}  // namespace anydb
