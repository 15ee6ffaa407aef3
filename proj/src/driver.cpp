// Workload generation and the dedicated-loop baseline path.
#include <algorithm>

#include "anydb/harness.hpp"

namespace anydb {

OrderIdAlloc::OrderIdAlloc(int warehouses, int districts_per_w, int64_t loaded)
    : next(size_t(warehouses) * districts_per_w), districts(districts_per_w) {
  for (auto& a : next) a.store(loaded + 1, std::memory_order_relaxed);
}

TxnParams gen_txn(Rng& rng, const Dataset& ds, double skew, int payment_pct,
                  OrderIdAlloc& oids, uint64_t txn_id) {
  const int W = int(ds.partitions.size());
  const int D = ds.districts_per_warehouse;
  const int C = ds.customers_per_district;

  TxnParams p;
  p.w = rng.chance(skew) ? 0 : int32_t(rng.uniform(0, W - 1));
  p.d = int32_t(rng.uniform(1, D));
  p.h_date = int64_t(txn_id);

  if (rng.uniform(1, 100) <= payment_pct) {
    p.kind = TxnKind::Payment;
    // Payments stay on one warehouse; cross-partition pressure comes from the
    // skew knob, not from remote customers.
    p.c_w = p.w;
    p.c_d = p.d;
    p.by_name = rng.uniform(1, 100) <= 60;
    if (p.by_name) {
      // Anchor on an existing customer so the scan always matches someone.
      int64_t idx = rng.nurand(1023, 1, C);
      const auto& statics = *ds.partitions[size_t(p.c_w)].cust_statics[size_t(p.c_d) - 1];
      p.c_last = statics[size_t(idx) - 1].c_last;
    } else {
      p.c_id = int32_t(rng.nurand(1023, 1, C));
    }
    p.amount = rng.uniform(100, 500000);  // cents
    return p;
  }

  p.kind = TxnKind::NewOrder;
  p.c_id = int32_t(rng.nurand(1023, 1, C));
  p.o_id = oids.take(p.w, p.d);
  p.h_date = rng.uniform(2005, 2012);  // order entry year
  int n_items = int(rng.uniform(5, 15));
  for (int i = 0; i < n_items; i++) {
    ItemReq it;
    it.i_id = int32_t(rng.nurand(8191, 1, ds.items));
    it.qty = int32_t(rng.uniform(1, 10));
    p.items.push_back(it);
  }
  return p;
}

std::vector<Event> baseline_home_block(const TransactionProgram& prog, uint64_t txn_id,
                                       AcId home, AcId driver, TimePoint admit) {
  std::vector<Event> events = make_txn_events(prog, txn_id);
  for (Event& e : events) {
    e.origin = home;
    e.released_at = admit;
  }
  events.back().origin = driver;  // completion report

  // Value handoffs become local streams; everything lives on one loop, so a
  // single self-addressed route per producer suffices.
  const size_t n = events.size();
  for (size_t p = 0; p < n; p++) {
    int32_t last = -1;
    for (const DepEdge& d : prog.deps) {
      if (size_t(d.from) != p) continue;
      StreamId sid{txn_id, home, int32_t(p)};
      if (last < 0) {
        events[p].output.sid = sid;
        events[p].output.targets.push_back(home);
      }
      events[d.to].required_streams.push_back(sid);
      last = std::max(last, int32_t(d.to));
    }
    if (last >= 0) events[size_t(last)].release_streams = true;
  }
  return events;
}

}  // namespace anydb
