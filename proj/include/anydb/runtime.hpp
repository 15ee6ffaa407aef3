// The runtime: identical stateless components (ACs), each a mailbox plus a
// worker thread, with all durable state reached through an ownership table
// that is only rewritten while the system is quiesced. Everything an AC holds
// beyond that — stream buffers, reorder buffers, pending events, operator
// sinks — must drain back to zero by the end of a phase.
#pragma once

#include <atomic>
#include <list>
#include <map>
#include <memory>
#include <thread>
#include <unordered_map>

#include "anydb/channel.hpp"
#include "anydb/event.hpp"
#include "anydb/storage.hpp"
#include "anydb/txn.hpp"

namespace anydb {

enum class AcRole : int8_t { Compute, Storage, Driver };

// Reassembles one stream; framing violations throw InvariantViolated.
struct StreamBuf {
  std::vector<DataBatch> batches;
  uint32_t next_seq = 0;
  bool complete = false;

  void add(DataBatch&& b);
  size_t row_count() const;
  // Iterate all rows across batches.
  template <typename F>
  void for_each_row(F&& f) const {
    for (const auto& b : batches)
      for (const Row& r : *b.rows) f(r);
  }
};

// Holds out-of-order events of one conflict class; releases strictly in
// class_seq order (dense, starting at 1, assigned at admission).
struct ReorderBuffer {
  void insert(Event&& e);
  // The event that must run next, or nullptr if it has not arrived yet.
  Event* head();
  Event take_head();
  bool empty() const { return heap_.empty(); }
  size_t size() const { return heap_.size(); }

 private:
  std::vector<Event> heap_;  // min-heap on class_seq
  uint64_t next_expected_ = 1;
  // Release order must follow admission order: (global_seq, op_index)
  // lexicographically, since all events of one txn share its global_seq.
  uint64_t last_released_global_ = 0;
  int32_t last_released_op_ = -1;
};

// Hash-join state (one per join id per AC).
struct JoinState {
  std::unordered_map<Key, std::vector<Row>> table;
  bool build_complete = false;
  size_t build_rows = 0;
};

// A streaming operator consuming one or more input streams incrementally.
// All input streams of one operator share this block.
struct SinkShared {
  Event ev;                  // the operator (JoinProbe or Aggregate op)
  int inputs_remaining = 0;  // open input streams
  uint32_t out_seq = 0;      // batch_seq for the forwarded output stream
  // Aggregate accumulation: group key -> (representative row, sum).
  std::map<Key, std::pair<Row, int64_t>> groups;
  size_t rows_in = 0, rows_out = 0;
};

// Timing of one operator execution, collected after an analytical query for
// the breakdown report.
struct OpTiming {
  uint64_t query_id = 0;
  int32_t op_index = 0;
  char kind = '?';  // 'b' build, 'p' probe, 'a' aggregate, 's' scan
  TimePoint released, first_input, done;
};

// A commit tracker plus where to report when its last ack lands.
struct TrackedCommit {
  CommitTracker t;
  AcId notify = kNoAc;     // the admitting driver
  int32_t commit_op = 0;   // op_index of the commit event
};

// Driver-side completion record, appended when a done-notification arrives
// (or directly, when the tracker lives at the driver itself).
struct DoneRecord {
  uint64_t txn_id = 0;
  TimePoint completed{};
  bool ok = true;
};

struct Topology;

// Everything one AC owns. Mutable fields are touched only by the AC's own
// thread; the atomics publish progress, and `side_mu` guards the cold
// trace/timing logs read after quiescence.
struct AcState {
  AcId id = kNoAc;
  AcRole role = AcRole::Compute;
  bool olap_pool = false;
  Topology* topo = nullptr;
  std::unique_ptr<Mailbox> box;

  std::unordered_map<StreamId, StreamBuf, StreamIdHash> stream_buffers;
  std::list<Event> pending;  // waiting on stream completion
  std::map<int32_t, ReorderBuffer> reorder;
  std::unordered_map<uint64_t, JoinState> joins;
  std::unordered_map<StreamId, std::shared_ptr<SinkShared>, StreamIdHash> sinks;

  // Commit bookkeeping for transactions whose commit event landed here. Acks
  // can outrun the commit event they answer (independent queues), so early
  // ones wait in a stash until the tracker exists.
  std::unordered_map<uint64_t, TrackedCommit> trackers;
  std::unordered_map<uint64_t, std::vector<Event>> early_acks;
  std::vector<DoneRecord> done_log;  // driver role only; drained by its pump
  std::atomic<uint64_t> commits_done{0};

  // Scratch reused across steps.
  std::vector<Event> in_events;
  std::vector<DataBatch> in_data;
  std::unordered_map<AcId, std::vector<Event>> outbox;

  // Published counters.
  std::atomic<uint64_t> executed_total{0};
  std::atomic<uint64_t> residual{0};  // buffered state that must reach 0 when idle
  std::atomic<uint64_t> busy_ns{0};

  std::mutex side_mu;  // guards trace + op_timings
  bool tracing = false;
  std::vector<HistoryRecord> trace;
  uint32_t local_order = 0;
  std::vector<OpTiming> op_timings;

  bool owns(int32_t warehouse, TableGroup g) const;
  Partition& slice(int32_t warehouse) const;
};

struct StepReport {
  int executed = 0;
  int deferred = 0;  // sitting in reorder/pending after the step
  int data_moved = 0;
};

// Drain the mailbox once and process: data into buffers/sinks, events into
// execute/reorder/pending, then release whatever became runnable.
StepReport ac_step(AcState& s);

// Process already-drained inputs (ac_step's body; tests drive it directly).
StepReport ac_step_process(AcState& s, std::vector<Event>& ev, std::vector<DataBatch>& db);

// Deliver one local batch immediately (self-sends bypass the mailbox).
void deliver_data(AcState& s, DataBatch&& b);

// Execute one event at this AC right now (dispatch on op kind). Storage ops
// the AC does not own are resolved against local streams and forwarded.
void exec_event(AcState& s, Event&& e);

enum class StorageMode : int8_t {
  Warehouse,  // storage AC i owns all tables of partition i
  Grouped,    // storage AC j owns table group j across all partitions
};

struct TopologyConfig {
  size_t event_queue_cap = 8192;
  size_t data_queue_cap = 8192;
  bool start_threads = true;   // false: tests step ACs manually
  bool pin_to_cores = false;   // round-robin thread affinity over hardware cores
};

// The set of ACs plus the ownership table. Structure changes (adding ACs,
// re-owning slices) are legal only while no phase is active.
struct Topology {
  explicit Topology(Dataset& ds, TopologyConfig cfg = {});
  ~Topology();

  Topology(const Topology&) = delete;
  Topology& operator=(const Topology&) = delete;

  AcId add_ac(AcRole role, bool olap_pool = false);
  // Grow the pool by n identical compute ACs; InvalidPhaseState mid-phase.
  std::vector<AcId> add_acs(int n, bool olap_pool = false);

  // Reassign slice ownership; InvalidPhaseState mid-phase, InsufficientAcs
  // when the mode needs more storage ACs than exist.
  void set_storage_mode(StorageMode m);
  StorageMode storage_mode() const { return mode_; }

  void begin_phase();
  void end_phase();
  bool phase_active() const { return phase_active_.load(std::memory_order_relaxed); }

  AcId owner(int32_t warehouse, TableGroup g) const;

  void enqueue_event(AcId target, Event&& e);
  void enqueue_events(AcId target, std::vector<Event>&& es);
  void enqueue_data(AcId target, DataBatch&& b);

  AcState& ac(AcId id);
  size_t ac_count() const { return acs_.size(); }
  const std::vector<AcId>& storage_acs() const { return storage_; }
  const std::vector<AcId>& compute_acs() const { return compute_; }
  const std::vector<AcId>& olap_acs() const { return olap_; }

  // Total buffered state across all ACs and mailboxes (0 once quiesced).
  uint64_t residual() const;
  // True when every mailbox is empty and every AC reports no buffered state.
  bool quiesced() const { return residual() == 0; }
  // Throws InvariantViolated unless quiesced (the statelessness check run at
  // phase boundaries).
  void assert_stateless(const char* where) const;

  void set_injected_latency_us(int us) { injected_latency_us_.store(us, std::memory_order_relaxed); }
  int injected_latency_us() const { return injected_latency_us_.load(std::memory_order_relaxed); }

  // Stop all AC threads (idempotent; destructor calls it).
  void shutdown();

  Dataset& dataset;

 private:
  struct Node {
    AcState st;
    std::thread th;
  };
  void spawn(Node& n);

  TopologyConfig cfg_;
  std::vector<std::unique_ptr<Node>> acs_;
  std::vector<AcId> storage_, compute_, olap_;
  std::vector<std::array<AcId, kGroupCount>> owner_;  // [warehouse][group]
  StorageMode mode_ = StorageMode::Warehouse;
  std::atomic<bool> phase_active_{false};
  std::atomic<int> injected_latency_us_{0};
  bool shut_ = false;
};

}  // namespace anydb
