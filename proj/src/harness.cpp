// Phase orchestration: structure changes at quiesced boundaries, closed-loop
// admission per driver shard, steady-state measurement with warmup discard,
// and hard accounting checks at every phase end.
#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "anydb/harness.hpp"

namespace anydb {

namespace {

int64_t percentile(const std::vector<int64_t>& sorted, double p) {
  if (sorted.empty()) return 0;
  size_t idx = size_t(std::llround(p * double(sorted.size() - 1)));
  return sorted[std::min(idx, sorted.size() - 1)];
}

[[noreturn]] void violated(const std::string& what) { throw_db(Err::InvariantViolated, what); }

}  // namespace

struct Bench::Shard {
  int index = 0;
  AcId driver = kNoAc;
  Rng rng;
  std::thread th;
  uint64_t next_id;    // txn ids strided by shard count, never reused
  uint64_t id_stride;

  // Per-phase; reset at each phase start, merged after the join.
  std::unordered_map<uint64_t, TimePoint> admit;            // in-flight
  std::vector<std::pair<TimePoint, int64_t>> commits;       // completion, latency us
  std::vector<std::pair<uint64_t, TxnParams>> admit_log;    // (global_seq, params)
  int64_t admitted = 0, committed = 0, failed = 0;
  int64_t pay_admitted = 0, no_admitted = 0;

  Shard(int idx, AcId drv, uint64_t seed, int shards)
      : index(idx), driver(drv), rng(seed), next_id(uint64_t(idx) + 1),
        id_stride(uint64_t(shards)) {}

  void reset_phase() {
    admit.clear();
    commits.clear();
    admit_log.clear();
    admitted = committed = failed = pay_admitted = no_admitted = 0;
  }
};

Bench::Bench(const RunConfig& cfg) : cfg_(cfg) {
  if (cfg_.profile == "bench") {
    cfg_.customers *= 4;
    cfg_.orders *= 4;
  }
  LoaderConfig l;
  l.warehouses = cfg_.warehouses;
  l.districts_per_warehouse = cfg_.districts;
  l.customers_per_district = cfg_.customers;
  l.orders_per_district = cfg_.orders;
  l.items = cfg_.items;
  l.seed = cfg_.seed;
  ds_ = load_dataset(l);

  TopologyConfig tc;
  tc.event_queue_cap = size_t(cfg_.queue_capacity);
  tc.data_queue_cap = size_t(cfg_.queue_capacity);
  tc.pin_to_cores = cfg_.pin_to_cores;
  topo_ = std::make_unique<Topology>(ds_, tc);
  topo_->set_injected_latency_us(cfg_.injected_latency_us);

  // Enough storage loops for either ownership layout.
  const int n_storage = std::max(cfg_.warehouses, kGroupCount);
  for (int i = 0; i < n_storage; i++) topo_->add_ac(AcRole::Storage);
  for (int i = 0; i < cfg_.ac_count; i++) topo_->add_ac(AcRole::Compute);
  for (int i = 0; i < cfg_.olap_acs; i++) topo_->add_ac(AcRole::Compute, true);
  for (int i = 0; i < cfg_.driver_shards; i++)
    oltp_drivers_.push_back(topo_->add_ac(AcRole::Driver));
  olap_driver_ = topo_->add_ac(AcRole::Driver);
  topo_->set_storage_mode(StorageMode::Warehouse);

  if (cfg_.tracing)
    for (size_t i = 0; i < topo_->ac_count(); i++) topo_->ac(AcId(i)).tracing = true;

  router_ = std::make_unique<Router>(*topo_, RoutingPolicy::SharedNothing, oltp_drivers_[0],
                                     calibrate_cost_model(ds_));
  oids_ = std::make_unique<OrderIdAlloc>(cfg_.warehouses, cfg_.districts, cfg_.orders);
  for (int i = 0; i < cfg_.driver_shards; i++)
    shards_.push_back(std::make_unique<Shard>(i, oltp_drivers_[i],
                                              mix_seed(cfg_.seed, 0x5a00 + uint64_t(i)),
                                              cfg_.driver_shards));
}

Bench::~Bench() {
  if (topo_) topo_->shutdown();
}

void Bench::quiesce(const char* where) {
  for (int i = 0; i < 30000; i++) {
    if (topo_->quiesced()) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  violated(std::string("phase did not quiesce: ") + where + " (residual " +
           std::to_string(topo_->residual()) + ")");
}

void Bench::drive_shard(Shard& sh, const PhaseConfig& phase, std::atomic<int64_t>& budget,
                        std::atomic<bool>& stop) {
  const bool baseline = phase.policy == "baseline";
  AcState& drv = topo_->ac(sh.driver);
  bool exhausted = false;
  for (;;) {
    bool progressed = false;
    exhausted = exhausted || stop.load(std::memory_order_relaxed);

    int quota = std::min(cfg_.window - int(sh.admit.size()), cfg_.burst);
    for (int i = 0; i < quota && !exhausted; i++) {
      if (budget.fetch_sub(1, std::memory_order_relaxed) <= 0) {
        budget.fetch_add(1, std::memory_order_relaxed);
        exhausted = true;
        break;
      }
      const uint64_t id = sh.next_id;
      sh.next_id += sh.id_stride;
      TxnParams p = gen_txn(sh.rng, ds_, phase.skew, phase.payment_pct, *oids_, id);
      TransactionProgram prog = program_from_params(p);
      const TimePoint admit = Clock::now();
      sh.admit.emplace(id, admit);
      if (p.kind == TxnKind::Payment) sh.pay_admitted++;
      else sh.no_admitted++;
      if (baseline) {
        const AcId home = topo_->owner(prog.home_partition, TableGroup::Wh);
        topo_->enqueue_events(home, baseline_home_block(prog, id, home, sh.driver, admit));
      } else {
        Router::RoutedTxn rt = router_->route_transaction(prog, id, admit, sh.driver);
        if (cfg_.tracing) sh.admit_log.emplace_back(rt.global_seq, p);
        for (auto& [ac, blk] : rt.blocks) topo_->enqueue_events(ac, std::move(blk));
      }
      sh.admitted++;
      progressed = true;
    }

    ac_step(drv);
    if (!drv.done_log.empty()) {
      for (const DoneRecord& dr : drv.done_log) {
        auto it = sh.admit.find(dr.txn_id);
        if (it == sh.admit.end()) violated("completion for a transaction never admitted here");
        sh.commits.emplace_back(dr.completed, us_between(it->second, dr.completed));
        sh.admit.erase(it);
        sh.committed++;
        if (!dr.ok) sh.failed++;
      }
      drv.done_log.clear();
      progressed = true;
    }

    if (exhausted && sh.admit.empty()) break;
    if (!progressed) std::this_thread::sleep_for(std::chrono::microseconds(20));
  }
}

void Bench::olap_loop(const PhaseConfig& phase, std::atomic<bool>& stop,
                      std::vector<int64_t>& samples) {
  QueryDescriptor q;
  q.compile_ms = phase.olap_compile_ms;
  q.beaming = beaming_from_name(phase.olap_beaming);
  q.placement = placement_from_name(phase.olap_placement);
  while (!stop.load(std::memory_order_relaxed)) {
    const TimePoint t0 = Clock::now();
    // Analytical ids live in their own namespace, clear of transaction ids.
    const uint64_t qid = (1ull << 62) | next_query_++;
    QueryTiming t = run_beamed_query(*topo_, q, qid, olap_driver_, nullptr);
    samples.push_back(t.total_us);
    const TimePoint wake = t0 + std::chrono::milliseconds(phase.olap_interval_ms);
    while (Clock::now() < wake && !stop.load(std::memory_order_relaxed))
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

PhaseMetrics Bench::run_phase(const PhaseConfig& phase) {
  const bool baseline = phase.policy == "baseline";

  // Structure changes happen strictly between phases.
  if (phase.add_acs > 0) topo_->add_acs(phase.add_acs);
  if (phase.add_olap_acs > 0) topo_->add_acs(phase.add_olap_acs, true);
  if (phase.injected_latency_us >= 0) topo_->set_injected_latency_us(phase.injected_latency_us);
  if (cfg_.tracing)
    for (size_t i = 0; i < topo_->ac_count(); i++) topo_->ac(AcId(i)).tracing = true;
  const StorageMode want =
      (!baseline && policy_from_name(phase.policy) == RoutingPolicy::StreamingCC)
          ? StorageMode::Grouped
          : StorageMode::Warehouse;
  if (want != topo_->storage_mode()) topo_->set_storage_mode(want);
  if (!baseline) router_->set_policy(policy_from_name(phase.policy));

  // Pre-phase snapshots for accounting.
  const MoneySums money0 = money_sums(ds_);
  const size_t n_acs = topo_->ac_count();
  std::vector<uint64_t> exec0(n_acs), busy0(n_acs);
  uint64_t done0 = 0;
  for (size_t i = 0; i < n_acs; i++) {
    AcState& s = topo_->ac(AcId(i));
    exec0[i] = s.executed_total.load(std::memory_order_relaxed);
    busy0[i] = s.busy_ns.load(std::memory_order_relaxed);
    done0 += s.commits_done.load(std::memory_order_relaxed);
  }
  for (auto& sh : shards_) sh->reset_phase();

  topo_->begin_phase();
  const TimePoint t_start = Clock::now();
  std::atomic<int64_t> budget{phase.duration_ms > 0 ? std::numeric_limits<int64_t>::max()
                                                    : phase.txns};
  std::atomic<bool> stop{false};
  std::atomic<bool> olap_stop{false};
  std::vector<int64_t> olap_samples;
  std::vector<std::exception_ptr> errs(shards_.size() + 1);

  std::thread olap_th;
  if (phase.olap)
    olap_th = std::thread([&] {
      try {
        olap_loop(phase, olap_stop, olap_samples);
      } catch (...) {
        errs.back() = std::current_exception();
        stop.store(true);
      }
    });
  for (size_t i = 0; i < shards_.size(); i++) {
    Shard* s = shards_[i].get();
    s->th = std::thread([&, s, i] {
      try {
        drive_shard(*s, phase, budget, stop);
      } catch (...) {
        errs[i] = std::current_exception();
        stop.store(true);
      }
    });
  }
  if (phase.duration_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(phase.duration_ms));
    stop.store(true);
  }
  for (auto& sh : shards_) sh->th.join();
  olap_stop.store(true);
  if (olap_th.joinable()) olap_th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);

  quiesce(phase.name.c_str());
  const TimePoint t_end = Clock::now();
  topo_->end_phase();
  topo_->assert_stateless(phase.name.c_str());

  // Merge shard results.
  std::vector<std::pair<TimePoint, int64_t>> commits;
  int64_t admitted = 0, committed = 0, failed = 0, pay = 0, nord = 0;
  for (auto& sh : shards_) {
    admitted += sh->admitted;
    committed += sh->committed;
    failed += sh->failed;
    pay += sh->pay_admitted;
    nord += sh->no_admitted;
    commits.insert(commits.end(), sh->commits.begin(), sh->commits.end());
    admitted_log_.insert(admitted_log_.end(), sh->admit_log.begin(), sh->admit_log.end());
  }
  std::sort(commits.begin(), commits.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  committed_total_ += uint64_t(committed);

  // Accounting: every admission commits, trackers agree, tables agree.
  auto expect = [&](int64_t got, int64_t wantv, const char* what) {
    if (got != wantv)
      violated("phase " + phase.name + ": " + what + " mismatch (" + std::to_string(got) +
               " vs " + std::to_string(wantv) + ")");
  };
  expect(committed, admitted, "committed/admitted");
  expect(failed, 0, "failed transactions");
  uint64_t done1 = 0;
  for (size_t i = 0; i < n_acs; i++)
    done1 += topo_->ac(AcId(i)).commits_done.load(std::memory_order_relaxed);
  expect(int64_t(done1 - done0), committed, "tracker completions");
  const MoneySums money1 = money_sums(ds_);
  expect(money1.history_rows - money0.history_rows, pay, "HISTORY row delta");
  expect(money1.orders_rows - money0.orders_rows, nord, "ORDERS row delta");
  const int64_t dw = money1.w_ytd - money0.w_ytd;
  const int64_t dd = money1.d_ytd - money0.d_ytd;
  const int64_t dh = money1.h_amount - money0.h_amount;
  if (dw != dd || dd != dh)
    violated("phase " + phase.name + ": money conservation broken (w " + std::to_string(dw) +
             ", d " + std::to_string(dd) + ", h " + std::to_string(dh) + ")");

  // Metrics over the steady state: first 10% of completions discarded.
  PhaseMetrics m;
  m.phase = phase.name;
  m.policy = phase.policy;
  m.committed = committed;
  const size_t K = commits.size();
  const size_t cutoff = K / 10;
  if (K > 0) {
    const TimePoint w_start = cutoff > 0 ? commits[cutoff - 1].first : t_start;
    int64_t span = us_between(w_start, commits.back().first);
    if (span <= 0) span = 1;
    m.throughput = double(K - cutoff) * 1e6 / double(span);
    std::vector<int64_t> lat;
    lat.reserve(K - cutoff);
    for (size_t i = cutoff; i < K; i++) lat.push_back(commits[i].second);
    std::sort(lat.begin(), lat.end());
    m.p50_us = percentile(lat, 0.50);
    m.p99_us = percentile(lat, 0.99);
  }
  m.olap_queries = int64_t(olap_samples.size());
  if (!olap_samples.empty()) {
    int64_t sum = 0;
    for (int64_t v : olap_samples) sum += v;
    m.olap_us = sum / int64_t(olap_samples.size());
  }

  uint64_t busy_sum = 0;
  for (size_t i = 0; i < n_acs; i++) {
    AcState& s = topo_->ac(AcId(i));
    if (s.role == AcRole::Driver) continue;  // admission loops are not workers
    if (s.executed_total.load(std::memory_order_relaxed) > exec0[i]) {
      m.acs_used++;
      busy_sum += s.busy_ns.load(std::memory_order_relaxed) - busy0[i];
    }
  }
  if (m.acs_used > 0) {
    m.throughput_per_ac = m.throughput / double(m.acs_used);
    const int64_t wall_ns = us_between(t_start, t_end) * 1000;
    if (wall_ns > 0) m.utilization = double(busy_sum) / (double(wall_ns) * double(m.acs_used));
  }
  m.throughput_min = m.throughput_max = m.throughput;
  return m;
}

std::vector<PhaseMetrics> Bench::run_all() {
  std::vector<PhaseMetrics> out;
  for (const PhaseConfig& phase : cfg_.phases) {
    PhaseConfig p = phase;
    std::vector<PhaseMetrics> reps;
    for (int r = 0; r < cfg_.repeat; r++) {
      reps.push_back(run_phase(p));
      p.add_acs = 0;  // the pool grows once, not once per repetition
      p.add_olap_acs = 0;
    }
    std::sort(reps.begin(), reps.end(),
              [](const PhaseMetrics& a, const PhaseMetrics& b) {
                return a.throughput < b.throughput;
              });
    PhaseMetrics chosen = reps[reps.size() / 2];
    chosen.throughput_min = reps.front().throughput;
    chosen.throughput_max = reps.back().throughput;
    out.push_back(chosen);
  }
  return out;
}

std::vector<HistoryRecord> Bench::collect_trace() {
  std::vector<HistoryRecord> all;
  for (size_t i = 0; i < topo_->ac_count(); i++) {
    AcState& s = topo_->ac(AcId(i));
    std::lock_guard<std::mutex> g(s.side_mu);
    all.insert(all.end(), s.trace.begin(), s.trace.end());
  }
  return all;
}

std::vector<PhaseMetrics> run_phases(const RunConfig& cfg) {
  Bench b(cfg);
  return b.run_all();
}

}  // namespace anydb
