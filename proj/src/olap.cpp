// Query planning, the pull/beamed execution driver and the naive reference.
#include "anydb/olap.hpp"

#include <algorithm>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace anydb {

namespace {

constexpr const char* kBeamingNames[] = {"none", "build", "build+probe"};
constexpr const char* kPlacementNames[] = {"disaggregated", "shared_nothing"};

// Distinct owners of one table group, in warehouse order. Each owner scans all
// slices it holds, so one scan/beam event per owner covers the whole table.
std::vector<AcId> group_owners(Topology& topo, TableGroup g) {
  std::vector<AcId> out;
  const size_t w_count = topo.dataset.partitions.size();
  for (size_t w = 0; w < w_count; w++) {
    AcId id = topo.owner(int32_t(w), g);
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  return out;
}

struct BlockSet {
  std::vector<std::pair<AcId, std::vector<Event>>> blocks;
  std::vector<Event>& at(AcId id) {
    for (auto& [ac, evs] : blocks)
      if (ac == id) return evs;
    blocks.emplace_back(id, std::vector<Event>{});
    return blocks.back().second;
  }
};

Event base_event(uint64_t query_id, int32_t op_index, AcId origin) {
  Event e;
  e.event_id = (query_id << 8) | uint64_t(uint32_t(op_index));
  e.txn_or_query_id = query_id;
  e.op_index = op_index;
  e.origin = origin;
  return e;
}

}  // namespace

BeamingLevel beaming_from_name(const std::string& name) {
  for (int i = 0; i < 3; i++)
    if (name == kBeamingNames[i]) return BeamingLevel(i);
  throw_db(Err::BadConfig, "unknown beaming level: " + name);
}

const char* beaming_name(BeamingLevel b) { return kBeamingNames[int(b)]; }

QueryPlacement placement_from_name(const std::string& name) {
  for (int i = 0; i < 2; i++)
    if (name == kPlacementNames[i]) return QueryPlacement(i);
  throw_db(Err::BadConfig, "unknown placement: " + name);
}

const char* placement_name(QueryPlacement p) { return kPlacementNames[int(p)]; }

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

QueryPlan plan_query(Topology& topo, const QueryDescriptor& q, uint64_t query_id, AcId driver) {
  QueryPlan plan;

  // Operator placement.
  AcId j1, j2, ag;
  if (q.placement == QueryPlacement::Disaggregated) {
    const auto& pool = topo.olap_acs();
    if (pool.empty()) throw_db(Err::InsufficientAcs, "disaggregated queries need a pool");
    j1 = pool[0];
    j2 = pool[1 % pool.size()];
    ag = pool[2 % pool.size()];
  } else {
    j1 = topo.owner(0, TableGroup::Cust);
    j2 = topo.owner(0, TableGroup::Order);
    ag = topo.owner(0, TableGroup::Dist);
  }

  const std::vector<AcId> order_owners = group_owners(topo, TableGroup::Order);
  const std::vector<AcId> cust_owners = group_owners(topo, TableGroup::Cust);

  // Scan legs. Open orders feed the first build; customers probe it; order
  // lines probe the second join.
  const Predicate open_pred = Predicate::range(col::ord::o_entry_d, q.entry_cutoff, INT64_MAX);
  const Predicate cust_pred = Predicate::state_prefix(q.state_letter);

  std::vector<StreamId> oo_sids, cust_sids, ol_sids;
  for (size_t i = 0; i < order_owners.size(); i++)
    oo_sids.push_back(StreamId{query_id, order_owners[i], int32_t(0x10 + i)});
  for (size_t i = 0; i < cust_owners.size(); i++)
    cust_sids.push_back(StreamId{query_id, cust_owners[i], int32_t(0x20 + i)});
  for (size_t i = 0; i < order_owners.size(); i++)
    ol_sids.push_back(StreamId{query_id, order_owners[i], int32_t(0x30 + i)});

  const StreamId marker1{query_id, j1, 1};
  const StreamId join1_out{query_id, j1, 2};
  const StreamId marker2{query_id, j2, 3};
  const StreamId join2_out{query_id, j2, 4};
  plan.result = StreamId{query_id, ag, 5};

  BlockSet admission, compiled;

  // The compile marker leads the admission push (timing trace only).
  {
    Event e = base_event(query_id, kOpCompile, driver);
    e.op = CompileQuery{q.compile_ms};
    admission.at(j1).push_back(std::move(e));
  }

  auto add_scan_leg = [&](TableGroup group, const std::vector<AcId>& owners,
                          const std::vector<StreamId>& sids, ScanSource src, TableId table,
                          const Predicate& pred, AcId consumer, bool beamed) {
    (void)group;
    for (size_t i = 0; i < owners.size(); i++) {
      Event e = base_event(query_id, sids[i].tag, driver);
      if (beamed) {
        BeamInit bm;
        bm.source = src;
        bm.table = table;
        bm.pred = pred;
        bm.target = consumer;
        bm.stream = sids[i];
        e.op = bm;
        admission.at(owners[i]).push_back(std::move(e));
      } else {
        ScanFilter sc;
        sc.source = src;
        sc.table = table;
        sc.pred = pred;
        e.op = sc;
        e.output.sid = sids[i];
        e.output.targets.push_back(consumer);
        compiled.at(owners[i]).push_back(std::move(e));
      }
    }
  };

  const bool beam_build = q.beaming != BeamingLevel::None;
  const bool beam_probe = q.beaming == BeamingLevel::BuildProbe;
  add_scan_leg(TableGroup::Order, order_owners, oo_sids, ScanSource::OpenOrders, TableId::Orders,
               open_pred, j1, beam_build);
  add_scan_leg(TableGroup::Cust, cust_owners, cust_sids, ScanSource::Table, TableId::Customer,
               cust_pred, j1, beam_probe);
  add_scan_leg(TableGroup::Order, order_owners, ol_sids, ScanSource::Table, TableId::OrderLine,
               Predicate::all(), j2, beam_probe);

  // Join 1: open orders hashed on the ordering customer, probed by the
  // filtered customers; survivors keep [o_id, w, d, entry].
  {
    Event e = base_event(query_id, kOpJoin1Build, driver);
    JoinBuild jb;
    jb.join_id = 1;
    jb.key = JoinKeySpec{col::ord::o_w_id, col::ord::o_d_id, col::ord::o_c_id};
    e.op = jb;
    for (const StreamId& sid : oo_sids) e.required_streams.push_back(sid);
    e.release_streams = true;
    e.output.sid = marker1;
    e.output.targets.push_back(j1);
    compiled.at(j1).push_back(std::move(e));
  }
  {
    Event e = base_event(query_id, kOpJoin1Probe, driver);
    JoinProbe jp;
    jp.join_id = 1;
    jp.key = JoinKeySpec{col::cust::c_w_id, col::cust::c_d_id, col::cust::c_id};
    jp.keep_build.push_back(col::ord::o_id);
    jp.keep_build.push_back(col::ord::o_w_id);
    jp.keep_build.push_back(col::ord::o_d_id);
    jp.keep_build.push_back(col::ord::o_entry_d);
    for (const StreamId& sid : cust_sids) jp.inputs.push_back(sid);
    e.op = jp;
    e.required_streams.push_back(marker1);
    e.release_streams = true;
    e.output.sid = join1_out;
    e.output.targets.push_back(j2);
    compiled.at(j1).push_back(std::move(e));
  }

  // Join 2: join-1 survivors hashed on (w, d, o_id), probed by the lines;
  // output rows are [amount, o_id, w, d, entry].
  {
    Event e = base_event(query_id, kOpJoin2Build, driver);
    JoinBuild jb;
    jb.join_id = 2;
    jb.key = JoinKeySpec{1, 2, 0};  // join-1 output: [o_id, w, d, entry]
    e.op = jb;
    e.required_streams.push_back(join1_out);
    e.release_streams = true;
    e.output.sid = marker2;
    e.output.targets.push_back(j2);
    compiled.at(j2).push_back(std::move(e));
  }
  {
    Event e = base_event(query_id, kOpJoin2Probe, driver);
    JoinProbe jp;
    jp.join_id = 2;
    jp.key = JoinKeySpec{col::oline::ol_w_id, col::oline::ol_d_id, col::oline::ol_o_id};
    jp.keep_probe.push_back(col::oline::ol_amount);
    jp.keep_build.push_back(0);
    jp.keep_build.push_back(1);
    jp.keep_build.push_back(2);
    jp.keep_build.push_back(3);
    for (const StreamId& sid : ol_sids) jp.inputs.push_back(sid);
    e.op = jp;
    e.required_streams.push_back(marker2);
    e.release_streams = true;
    e.output.sid = join2_out;
    e.output.targets.push_back(ag);
    compiled.at(j2).push_back(std::move(e));
  }

  // Revenue per open order.
  {
    Event e = base_event(query_id, kOpAggregate, driver);
    AggregateOp agg;
    agg.group_col_w = 2;
    agg.group_col_d = 3;
    agg.group_col_x = 1;
    agg.group_col_extra = 4;
    agg.sum_col = 0;
    agg.inputs.push_back(join2_out);
    e.op = agg;
    e.output.sid = plan.result;
    e.output.targets.push_back(driver);
    compiled.at(ag).push_back(std::move(e));
  }

  plan.at_admission = std::move(admission.blocks);
  plan.at_compiled = std::move(compiled.blocks);
  return plan;
}

// ---------------------------------------------------------------------------
// Reference
// ---------------------------------------------------------------------------

std::vector<Row> ch_q3_reference(const Dataset& ds, char state_letter, int64_t entry_cutoff) {
  const int64_t state_lo = int64_t(state_letter - 'A') * 26;
  const int64_t state_hi = state_lo + 26;

  std::unordered_set<Key> wanted_customers;
  for (const Partition& p : ds.partitions)
    for (const auto& [k, r] : p.customer)
      if (r[col::cust::c_state] >= state_lo && r[col::cust::c_state] < state_hi)
        wanted_customers.insert(k);

  // Open orders past the cutoff whose customer survived the filter.
  struct Acc {
    Row repr;
    int64_t sum = 0;
    bool touched = false;
  };
  std::unordered_map<Key, Acc> kept;
  for (const Partition& p : ds.partitions) {
    for (const auto& [k, r] : p.orders) {
      if (!p.new_order.count(k)) continue;
      if (r[col::ord::o_entry_d] < entry_cutoff) continue;
      Key ck = key_cust(r[col::ord::o_w_id], r[col::ord::o_d_id], r[col::ord::o_c_id]);
      if (!wanted_customers.count(ck)) continue;
      Acc a;
      a.repr = make_row({r[col::ord::o_id], r[col::ord::o_w_id], r[col::ord::o_d_id],
                         r[col::ord::o_entry_d]});
      kept.emplace(k, a);
    }
  }

  for (const Partition& p : ds.partitions) {
    for (const auto& [k, r] : p.order_line) {
      Key ok = key_order(r[col::oline::ol_w_id], r[col::oline::ol_d_id], r[col::oline::ol_o_id]);
      auto it = kept.find(ok);
      if (it == kept.end()) continue;
      it->second.sum += r[col::oline::ol_amount];
      it->second.touched = true;
    }
  }

  std::vector<Row> out;
  for (auto& [k, a] : kept) {
    if (!a.touched) continue;  // inner join: orders without lines drop out
    out.push_back(make_row({a.repr[0], a.repr[1], a.repr[2], a.repr[3], a.sum}));
  }
  std::sort(out.begin(), out.end(), [](const Row& x, const Row& y) {
    if (x[4] != y[4]) return x[4] > y[4];  // revenue desc
    if (x[3] != y[3]) return x[3] < y[3];  // entry asc
    if (x[1] != y[1]) return x[1] < y[1];  // w asc
    if (x[2] != y[2]) return x[2] < y[2];  // d asc
    return x[0] < y[0];                    // o_id asc
  });
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

QueryTiming run_beamed_query(Topology& topo, const QueryDescriptor& q, uint64_t query_id,
                             AcId driver, std::string* csv) {
  QueryPlan plan = plan_query(topo, q, query_id, driver);
  AcState& drv = topo.ac(driver);

  const auto t0 = Clock::now();
  for (auto& [ac, evs] : plan.at_admission) {
    for (Event& e : evs) e.released_at = t0;
    topo.enqueue_events(ac, std::move(evs));
  }
  if (q.compile_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(q.compile_ms));
  const auto t_compiled = Clock::now();
  for (auto& [ac, evs] : plan.at_compiled) {
    for (Event& e : evs) e.released_at = t_compiled;
    topo.enqueue_events(ac, std::move(evs));
  }

  // Pump the driver mailbox until the result stream closes.
  QueryTiming out;
  TimePoint t_done;
  for (;;) {
    ac_step(drv);
    auto it = drv.stream_buffers.find(plan.result);
    if (it != drv.stream_buffers.end() && it->second.complete) {
      it->second.for_each_row([&](const Row& r) { out.rows.push_back(r); });
      t_done = Clock::now();
      drv.stream_buffers.erase(it);
      break;
    }
    if (Clock::now() - t_compiled > std::chrono::seconds(120))
      throw_db(Err::InvariantViolated, "analytical query stalled");
    std::this_thread::sleep_for(std::chrono::microseconds(50));
  }
  // The erase above bypassed the step loop, so the driver's residual gauge
  // still counts the drained result stream; an empty step republishes it.
  ac_step(drv);
  out.total_us =
      std::chrono::duration_cast<std::chrono::microseconds>(t_done - t0).count();

  // Pull this query's operator timings out of the ACs.
  auto phase_us = [](const OpTiming& t) {
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(t.done - t.released).count();
    return std::max<int64_t>(0, us);
  };
  for (size_t i = 0; i < topo.ac_count(); i++) {
    AcState& s = topo.ac(AcId(i));
    std::lock_guard lk(s.side_mu);
    auto& v = s.op_timings;
    for (const OpTiming& t : v) {
      if (t.query_id != query_id) continue;
      if (t.kind == 'b' && t.op_index == kOpJoin1Build) out.build_phase_us = phase_us(t);
      if (t.kind == 'p' && t.op_index == kOpJoin2Probe) out.probe_phase_us = phase_us(t);
    }
    v.erase(std::remove_if(v.begin(), v.end(),
                           [&](const OpTiming& t) { return t.query_id == query_id; }),
            v.end());
  }

  if (csv) {
    std::ostringstream os;
    const char* bn = beaming_name(q.beaming);
    os << q.compile_ms << ',' << bn << ",build," << out.build_phase_us << '\n'
       << q.compile_ms << ',' << bn << ",probe," << out.probe_phase_us << '\n'
       << q.compile_ms << ',' << bn << ",total," << out.total_us << '\n';
    *csv += os.str();
  }
  return out;
}

}  // namespace anydb
