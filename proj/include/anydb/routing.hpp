// Per-request routing: which AC runs which op is decided at admission, one
// transaction at a time. Five policies reproduce the classic architectures on
// the same unchanged programs; the plan is data, not code.
#pragma once

#include <mutex>
#include <unordered_map>

#include "anydb/runtime.hpp"
#include "anydb/txn.hpp"

namespace anydb {

enum class RoutingPolicy : int8_t {
  SharedNothing,    // whole txn (commit included) to the home partition's AC
  Disaggregated,    // whole txn to one compute AC; storage reached by message
  IntraTxnNaive,    // every op to a distinct compute AC, round-robin
  IntraTxnPrecise,  // cost-balanced two-way split onto two compute ACs
  StreamingCC,      // per-op to the owning storage AC, ordered by admission
};

RoutingPolicy policy_from_name(const std::string& name);  // throws BadConfig
const char* policy_name(RoutingPolicy p);

// Constant per-op-kind cost estimates (ns) for the program splitter.
struct CostModel {
  int64_t read_ns = 300;
  int64_t update_ns = 300;
  int64_t insert_ns = 400;
  int64_t select_ns = 1500;  // the by-name scan leg dominates a payment
  int64_t commit_ns = 100;

  int64_t op_cost(const OpKind& k) const;
};

// Measures the estimates against one partition (on a copy; the dataset is not
// touched). Only relative magnitudes matter to the splitter.
CostModel calibrate_cost_model(const Dataset& ds);

// Exact min-max-cost split of the non-commit ops into at most two groups:
// the subset-sum table over per-op costs finds the subset closest to half the
// total, which minimizes the heavier side. Deterministic; groups are ordered
// by their smallest op index and keep the original op order inside.
std::vector<std::vector<int16_t>> split_precise(const TransactionProgram& prog,
                                                const CostModel& cm);

struct RoutingPlan {
  std::vector<AcId> assignments;  // op index -> executing AC
  std::vector<Event> beams;       // issued at admission, ahead of the op events
  AcId commit_target = kNoAc;     // where the commit tracker lives
};

// Admission-order stamps. One global_seq per transaction — all its events
// share it — plus a dense per-(target AC, conflict class) class_seq on classed
// events. Safe under concurrent admission from several driver shards.
class Sequencer {
 public:
  // `targets[i]` is the executing AC of `events[i]`. Returns the global_seq.
  uint64_t admit(std::vector<Event>& events, const std::vector<AcId>& targets);

  uint64_t admitted() const;

 private:
  mutable std::mutex mu_;
  uint64_t next_global_ = 1;
  std::unordered_map<uint64_t, uint64_t> class_next_;  // (ac, class) -> last
};

// One router per run. Plans are pure routing decisions; route_transaction also
// materializes events, wires the dependency streams, stamps admission order
// and groups everything into per-AC blocks ready to push.
class Router {
 public:
  Router(Topology& topo, RoutingPolicy policy, AcId driver, CostModel cm = {});

  // `notify` overrides the default driver as the completion destination (one
  // admission loop per driver shard).
  RoutingPlan plan_route(const TransactionProgram& prog, AcId notify = kNoAc);

  struct RoutedTxn {
    RoutingPlan plan;
    // Per-AC event blocks in op order (beams lead their owner's block).
    std::vector<std::pair<AcId, std::vector<Event>>> blocks;
    uint64_t global_seq = 0;
  };
  RoutedTxn route_transaction(const TransactionProgram& prog, uint64_t txn_id, TimePoint admit,
                              AcId notify = kNoAc);

  RoutingPolicy policy() const { return policy_; }
  void set_policy(RoutingPolicy p) { policy_ = p; }
  const CostModel& cost_model() const { return cm_; }
  Sequencer& sequencer() { return seq_; }
  AcId driver() const { return driver_; }

 private:
  Topology& topo_;
  RoutingPolicy policy_;
  AcId driver_;
  CostModel cm_;
  Sequencer seq_;
  std::atomic<uint32_t> rr_{0};
};

}  // namespace anydb
