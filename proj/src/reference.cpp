// Serial reference executor: applies transaction effects directly against a
// dataset, one at a time, in a caller-chosen order. The concurrent runtime
// must land on exactly this state when replayed in admission order.
#include <algorithm>

#include "anydb/harness.hpp"

namespace anydb {

void apply_txn_reference(Dataset& ds, const TxnParams& p) {
  TransactionProgram prog = program_from_params(p);
  int64_t resolved_c = -1;
  for (const OpKind& op : prog.ops) {
    if (const auto* sel = std::get_if<SelectCustomerByLastName>(&op)) {
      Partition& part = ds.partitions[size_t(sel->w)];
      resolved_c = median_customer_by_last_name(part, sel->w, sel->d, sel->last_name);
      if (resolved_c < 0) throw_db(Err::KeyNotFound, "reference: no customer with that name");
    } else if (const auto* u = std::get_if<UpdateRecord>(&op)) {
      const int32_t w = u->key_from_stream ? u->key_w : int32_t(key_warehouse(u->key));
      apply_update(ds.partitions[size_t(w)], *u, 0, resolved_c);
    } else if (const auto* ins = std::get_if<InsertRecord>(&op)) {
      int32_t w;
      if (ins->keyless) w = int32_t(ins->row[col::hist::h_w_id]);
      else if (ins->key_from_stream) w = ins->key_w;
      else w = int32_t(key_warehouse(ins->key));
      apply_insert(ds.partitions[size_t(w)], *ins, 0, resolved_c);
    }
    // Reads and the commit marker leave no state behind.
  }
}

uint64_t replay_state_hash(const LoaderConfig& lcfg,
                           std::vector<std::pair<uint64_t, TxnParams>> admitted) {
  std::sort(admitted.begin(), admitted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Dataset ds = load_dataset(lcfg);
  for (const auto& [seq, params] : admitted) apply_txn_reference(ds, params);
  return state_hash(ds);
}

MoneySums money_sums(const Dataset& ds) {
  MoneySums s;
  for (const Partition& p : ds.partitions) {
    for (const auto& [k, r] : p.warehouse) s.w_ytd += r[col::wh::w_ytd];
    for (const auto& [k, r] : p.district) s.d_ytd += r[col::dist::d_ytd];
    for (const Row& r : p.history) s.h_amount += r[col::hist::h_amount];
    s.history_rows += int64_t(p.history.size());
    s.orders_rows += int64_t(p.orders.size());
  }
  return s;
}

}  // namespace anydb
