// Phased benchmark harness: datasets, drivers, workload generation, phase
// orchestration with warmup discard and accounting checks, metric reports.
#pragma once

#include <atomic>
#include <string>

#include "anydb/olap.hpp"
#include "anydb/rand.hpp"
#include "anydb/routing.hpp"

namespace anydb {

// One benchmark phase: a transaction mix under one policy, optionally with a
// periodic analytical query running alongside.
struct PhaseConfig {
  std::string name = "phase";
  // A routing policy name, or "baseline": the dedicated per-partition loop
  // with no routing layer (the classical shared-nothing stand-in).
  std::string policy = "shared_nothing";
  int64_t txns = 10000;     // admission target (deterministic phases)
  int64_t duration_ms = 0;  // when > 0, wall-clock bound instead
  int payment_pct = 60;     // remainder is new-order
  double skew = 0.0;        // fraction of txns homed on warehouse 0
  bool olap = false;
  std::string olap_placement = "disaggregated";
  std::string olap_beaming = "build+probe";
  int olap_interval_ms = 300;
  int olap_compile_ms = 10;
  int add_acs = 0;       // grow the transactional compute pool first
  int add_olap_acs = 0;  // grow the analytical pool first
  int injected_latency_us = -1;  // -1 keeps the current setting
};

struct RunConfig {
  // dataset
  int warehouses = 4;
  int districts = 10;
  int customers = 300;  // per district
  int orders = 300;     // per district
  int items = 1000;
  uint64_t seed = 42;
  std::string profile = "test";  // "bench" scales customers/orders 4x
  // runtime
  int ac_count = 8;  // transactional compute pool
  int olap_acs = 2;
  int queue_capacity = 8192;
  int injected_latency_us = 0;
  bool pin_to_cores = false;
  int driver_shards = 1;
  int window = 128;  // in-flight cap per driver shard
  int burst = 32;    // admissions per push round
  int repeat = 3;    // reps per phase (min/max whiskers)
  bool tracing = false;
  std::vector<PhaseConfig> phases;
};

// Flat key/value lines plus one `phase key=value ...` line per phase.
// '#' starts a comment. Unknown keys throw BadConfig.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

struct PhaseMetrics {
  std::string phase;
  std::string policy;
  double throughput = 0;  // committed / measured second (post-warmup)
  int64_t p50_us = 0;
  int64_t p99_us = 0;
  int64_t olap_us = 0;  // mean analytical latency, 0 when no queries ran
  int acs_used = 0;     // non-driver ACs that executed anything
  double throughput_per_ac = 0;
  // extras (not part of the CSV contract)
  double throughput_min = 0, throughput_max = 0;  // repeat whiskers
  int64_t committed = 0;
  int64_t olap_queries = 0;
  double utilization = 0;  // busy share of the counted ACs
};

// Exactly: phase,policy,throughput,p50_us,p99_us,olap_us,acs_used,throughput_per_ac
std::string metrics_csv(const std::vector<PhaseMetrics>& rows);

// Side-by-side ratios (ours / base) for matching phase lists.
std::string compare_report(const std::vector<PhaseMetrics>& ours,
                           const std::vector<PhaseMetrics>& base);

// ---------------------------------------------------------------------------
// Workload generation
// ---------------------------------------------------------------------------

// Shared new-order id allocation: loaded districts hold orders 1..O, fresh
// ones continue from O+1. One counter per (warehouse, district).
struct OrderIdAlloc {
  std::vector<std::atomic<int64_t>> next;
  int districts = 0;
  OrderIdAlloc(int warehouses, int districts_per_w, int64_t loaded);
  int64_t take(int32_t w, int32_t d) {
    return next[size_t(w) * districts + (d - 1)].fetch_add(1, std::memory_order_relaxed);
  }
};

// Draw one transaction. Home warehouse 0 with probability `skew`, else
// uniform over all warehouses. Payment picks the customer by last name 60% of
// the time, anchored on an existing customer so the scan always matches.
TxnParams gen_txn(Rng& rng, const Dataset& ds, double skew, int payment_pct,
                  OrderIdAlloc& oids, uint64_t txn_id);

// The no-routing-layer baseline: the whole transaction as one block for the
// home partition's dedicated loop — no planning, no admission sequencing, no
// per-op dispatch. Dependency values still hand off through (local) streams.
std::vector<Event> baseline_home_block(const TransactionProgram& prog, uint64_t txn_id,
                                       AcId home, AcId driver, TimePoint admit);

// ---------------------------------------------------------------------------
// Bench: dataset + topology + drivers for one configured run
// ---------------------------------------------------------------------------

class Bench {
 public:
  explicit Bench(const RunConfig& cfg);
  ~Bench();

  Bench(const Bench&) = delete;
  Bench& operator=(const Bench&) = delete;

  // One reproduction of one phase (no repeat logic, single metrics row).
  PhaseMetrics run_phase(const PhaseConfig& phase);

  // All configured phases, `repeat` reps each (whiskers from the reps; the
  // reported row is the median-throughput rep).
  std::vector<PhaseMetrics> run_all();

  Dataset& dataset() { return ds_; }
  Topology& topology() { return *topo_; }
  Router& router() { return *router_; }

  // Execution history of all traced phases (requires cfg.tracing).
  std::vector<HistoryRecord> collect_trace();
  // Admitted transactions as (global_seq, params), admission order; only
  // collected when tracing.
  const std::vector<std::pair<uint64_t, TxnParams>>& admitted_log() const {
    return admitted_log_;
  }
  uint64_t committed_total() const { return committed_total_; }

 private:
  struct Shard;
  void drive_shard(Shard& sh, const PhaseConfig& phase, std::atomic<int64_t>& budget,
                   std::atomic<bool>& stop);
  void push_baseline(Shard& sh, const TransactionProgram& prog, uint64_t txn_id, TimePoint admit);
  void olap_loop(const PhaseConfig& phase, std::atomic<bool>& stop,
                 std::vector<int64_t>& samples);
  void quiesce(const char* where);

  RunConfig cfg_;
  Dataset ds_;
  std::unique_ptr<Topology> topo_;
  std::unique_ptr<Router> router_;
  std::unique_ptr<OrderIdAlloc> oids_;
  std::vector<AcId> oltp_drivers_;
  AcId olap_driver_ = kNoAc;
  std::vector<std::unique_ptr<Shard>> shards_;
  std::vector<std::pair<uint64_t, TxnParams>> admitted_log_;
  uint64_t committed_total_ = 0;
  uint64_t next_txn_ = 1;
  uint64_t next_query_ = 1;
};

// Convenience: build a Bench, run everything, return the metric rows.
std::vector<PhaseMetrics> run_phases(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Serial reference (independent replay)
// ---------------------------------------------------------------------------

// Apply one transaction's storage effects directly, no events involved.
void apply_txn_reference(Dataset& ds, const TxnParams& p);

// Load a fresh dataset and replay admitted transactions in global_seq order;
// returns its state hash (the expectation for any serializable execution that
// honors admission order).
uint64_t replay_state_hash(const LoaderConfig& lcfg,
                           std::vector<std::pair<uint64_t, TxnParams>> admitted);

// Money conservation over a dataset: sums of warehouse ytd, district ytd and
// history amounts (criterion: equal deltas across any payment workload).
struct MoneySums {
  int64_t w_ytd = 0;
  int64_t d_ytd = 0;
  int64_t h_amount = 0;
  int64_t orders_rows = 0;
  int64_t history_rows = 0;
};
MoneySums money_sums(const Dataset& ds);

}  // namespace anydb
