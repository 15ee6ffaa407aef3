#include "anydb/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

namespace anydb {

// ---------------------------------------------------------------------------
// StreamBuf
// ---------------------------------------------------------------------------

void StreamBuf::add(DataBatch&& b) {
  if (complete) throw_db(Err::InvariantViolated, "stream batch after last");
  if (b.batch_seq != next_seq) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "stream framing gap: got batch %u, expected %u", b.batch_seq,
                  next_seq);
    throw_db(Err::InvariantViolated, buf);
  }
  if (!b.last && b.rows->empty())
    throw_db(Err::InvariantViolated, "empty batch permitted only as last");
  next_seq++;
  if (b.last) complete = true;
  batches.push_back(std::move(b));
}

size_t StreamBuf::row_count() const {
  size_t n = 0;
  for (const auto& b : batches) n += b.rows->size();
  return n;
}

// ---------------------------------------------------------------------------
// ReorderBuffer
// ---------------------------------------------------------------------------

namespace {
struct ClassSeqGreater {
  bool operator()(const Event& a, const Event& b) const { return a.class_seq > b.class_seq; }
};
}  // namespace

void ReorderBuffer::insert(Event&& e) {
  if (e.class_seq == 0) throw_db(Err::InvariantViolated, "classed event without class_seq");
  if (e.class_seq < next_expected_)
    throw_db(Err::InvariantViolated, "classed event arrived after its slot was released");
  heap_.push_back(std::move(e));
  std::push_heap(heap_.begin(), heap_.end(), ClassSeqGreater{});
}

Event* ReorderBuffer::head() {
  if (heap_.empty() || heap_.front().class_seq != next_expected_) return nullptr;
  return &heap_.front();
}

Event ReorderBuffer::take_head() {
  std::pop_heap(heap_.begin(), heap_.end(), ClassSeqGreater{});
  Event e = std::move(heap_.back());
  heap_.pop_back();
  // Release order within a class must agree with the global admission order.
  // Events of one transaction share its global_seq; ties break by op order.
  if (e.global_seq < last_released_global_ ||
      (e.global_seq == last_released_global_ && e.op_index <= last_released_op_))
    throw_db(Err::InvariantViolated, "class release order diverged from global order");
  last_released_global_ = e.global_seq;
  last_released_op_ = e.op_index;
  next_expected_++;
  return e;
}

// ---------------------------------------------------------------------------
// AcState
// ---------------------------------------------------------------------------

bool AcState::owns(int32_t warehouse, TableGroup g) const {
  return topo->owner(warehouse, g) == id;
}

Partition& AcState::slice(int32_t warehouse) const {
  auto& parts = topo->dataset.partitions;
  if (warehouse < 0 || static_cast<size_t>(warehouse) >= parts.size())
    throw_db(Err::WrongPartition, "warehouse id outside the dataset");
  return parts[warehouse];
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

bool streams_ready(const AcState& s, const Event& e) {
  for (const StreamId& sid : e.required_streams) {
    auto it = s.stream_buffers.find(sid);
    if (it == s.stream_buffers.end() || !it->second.complete) return false;
  }
  return true;
}

namespace {

void route_in(AcState& s, Event&& e, StepReport& rep) {
  if (e.conflict_class != kNoClass) {
    s.reorder[e.conflict_class].insert(std::move(e));
    return;
  }
  if (!streams_ready(s, e)) {
    s.pending.push_back(std::move(e));
    return;
  }
  exec_event(s, std::move(e));
  rep.executed++;
}

// Run everything that can run: reorder heads in class_seq order (a class
// stalls while its head waits on a stream; other classes keep going), then
// pending events whose streams completed. Executing one event can complete a
// local stream, so sweep to a fixpoint.
void release_runnable(AcState& s, StepReport& rep) {
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto& [cls, rb] : s.reorder) {
      while (Event* h = rb.head()) {
        if (!streams_ready(s, *h)) break;
        Event e = rb.take_head();
        exec_event(s, std::move(e));
        rep.executed++;
        progress = true;
      }
    }
    for (auto it = s.pending.begin(); it != s.pending.end();) {
      if (streams_ready(s, *it)) {
        Event e = std::move(*it);
        it = s.pending.erase(it);
        exec_event(s, std::move(e));
        rep.executed++;
        progress = true;
      } else {
        ++it;
      }
    }
  }
}

void flush_outbox(AcState& s) {
  for (auto& [target, evs] : s.outbox) {
    if (!evs.empty()) s.topo->enqueue_events(target, std::move(evs));
    evs.clear();
  }
}

void publish_counters(AcState& s, StepReport& rep) {
  size_t defer = s.pending.size();
  for (auto& [cls, rb] : s.reorder) defer += rb.size();
  rep.deferred = static_cast<int>(defer);
  uint64_t resid = defer + s.stream_buffers.size() + s.sinks.size() + s.joins.size() +
                   s.trackers.size() + s.early_acks.size();
  s.residual.store(resid, std::memory_order_release);
  s.executed_total.fetch_add(rep.executed, std::memory_order_relaxed);
}

}  // namespace

StepReport ac_step_process(AcState& s, std::vector<Event>& ev, std::vector<DataBatch>& db) {
  StepReport rep;
  if (ev.empty() && db.empty()) {
    publish_counters(s, rep);
    return rep;
  }
  auto t0 = Clock::now();
  rep.data_moved = static_cast<int>(db.size());
  for (DataBatch& b : db) deliver_data(s, std::move(b));
  for (Event& e : ev) route_in(s, std::move(e), rep);
  release_runnable(s, rep);
  flush_outbox(s);
  publish_counters(s, rep);
  s.busy_ns.fetch_add(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count(),
                      std::memory_order_relaxed);
  return rep;
}

StepReport ac_step(AcState& s) {
  s.in_events.clear();
  s.in_data.clear();
  s.box->try_drain(s.in_events, s.in_data);
  return ac_step_process(s, s.in_events, s.in_data);
}

namespace {

void ac_loop(AcState& s) {
  std::vector<Event> ev;
  std::vector<DataBatch> db;
  for (;;) {
    ev.clear();
    db.clear();
    auto r = s.box->drain_wait(ev, db, std::chrono::microseconds(200));
    if (r == Mailbox::Drain::Closed) break;
    if (r == Mailbox::Drain::Empty) continue;
    ac_step_process(s, ev, db);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

Topology::Topology(Dataset& ds, TopologyConfig cfg) : dataset(ds), cfg_(cfg) {
  owner_.assign(ds.partitions.size(), {});
  for (auto& per_w : owner_) per_w.fill(kNoAc);
}

Topology::~Topology() { shutdown(); }

void Topology::spawn(Node& n) {
  if (!cfg_.start_threads || n.st.role == AcRole::Driver) return;
  AcState* st = &n.st;
  n.th = std::thread([st] { ac_loop(*st); });
#ifdef __linux__
  if (cfg_.pin_to_cores) {
    unsigned cores = std::max(1u, std::thread::hardware_concurrency());
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(unsigned(n.st.id) % cores, &set);
    pthread_setaffinity_np(n.th.native_handle(), sizeof(set), &set);
  }
#endif
}

AcId Topology::add_ac(AcRole role, bool olap_pool) {
  AcId id = static_cast<AcId>(acs_.size());
  auto node = std::make_unique<Node>();
  node->st.id = id;
  node->st.role = role;
  node->st.olap_pool = olap_pool;
  node->st.topo = this;
  node->st.box = std::make_unique<Mailbox>(cfg_.event_queue_cap, cfg_.data_queue_cap);
  spawn(*node);
  acs_.push_back(std::move(node));
  switch (role) {
    case AcRole::Storage: storage_.push_back(id); break;
    case AcRole::Compute: compute_.push_back(id); break;
    case AcRole::Driver: break;
  }
  if (olap_pool) olap_.push_back(id);
  return id;
}

std::vector<AcId> Topology::add_acs(int n, bool olap_pool) {
  if (phase_active())
    throw_db(Err::InvalidPhaseState, "topology can only grow between phases");
  std::vector<AcId> ids;
  ids.reserve(n);
  for (int i = 0; i < n; i++) ids.push_back(add_ac(AcRole::Compute, olap_pool));
  return ids;
}

void Topology::set_storage_mode(StorageMode m) {
  if (phase_active())
    throw_db(Err::InvalidPhaseState, "slice ownership can only change between phases");
  size_t w_count = owner_.size();
  if (m == StorageMode::Warehouse) {
    if (storage_.size() < w_count)
      throw_db(Err::InsufficientAcs, "need one storage component per partition");
    for (size_t w = 0; w < w_count; w++)
      for (int g = 0; g < kGroupCount; g++) owner_[w][g] = storage_[w];
  } else {
    if (storage_.empty()) throw_db(Err::InsufficientAcs, "no storage components");
    for (size_t w = 0; w < w_count; w++)
      for (int g = 0; g < kGroupCount; g++) owner_[w][g] = storage_[g % storage_.size()];
  }
  mode_ = m;
}

void Topology::begin_phase() { phase_active_.store(true, std::memory_order_release); }
void Topology::end_phase() { phase_active_.store(false, std::memory_order_release); }

AcId Topology::owner(int32_t warehouse, TableGroup g) const {
  if (warehouse < 0 || static_cast<size_t>(warehouse) >= owner_.size())
    throw_db(Err::WrongPartition, "warehouse id outside the dataset");
  return owner_[warehouse][static_cast<int>(g)];
}

AcState& Topology::ac(AcId id) {
  if (id < 0 || static_cast<size_t>(id) >= acs_.size())
    throw_db(Err::UnknownAc, "no such component");
  return acs_[id]->st;
}

void Topology::enqueue_event(AcId target, Event&& e) {
  if (target < 0 || static_cast<size_t>(target) >= acs_.size())
    throw_db(Err::UnknownAc, "event target does not exist");
  acs_[target]->st.box->push_event(std::move(e));
}

void Topology::enqueue_events(AcId target, std::vector<Event>&& es) {
  if (target < 0 || static_cast<size_t>(target) >= acs_.size())
    throw_db(Err::UnknownAc, "event target does not exist");
  acs_[target]->st.box->push_events(std::move(es));
}

void Topology::enqueue_data(AcId target, DataBatch&& b) {
  if (target < 0 || static_cast<size_t>(target) >= acs_.size())
    throw_db(Err::UnknownAc, "data target does not exist");
  int lat = injected_latency_us();
  if (lat > 0) std::this_thread::sleep_for(std::chrono::microseconds(lat));
  acs_[target]->st.box->push_data(std::move(b));
}

uint64_t Topology::residual() const {
  uint64_t n = 0;
  for (const auto& node : acs_) {
    n += node->st.box->size();
    n += node->st.residual.load(std::memory_order_acquire);
  }
  return n;
}

void Topology::assert_stateless(const char* where) const {
  for (const auto& node : acs_) {
    uint64_t n = node->st.box->size() + node->st.residual.load(std::memory_order_acquire);
    if (n != 0) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s: component %d still holds %llu buffered items", where,
                    node->st.id, static_cast<unsigned long long>(n));
      throw_db(Err::InvariantViolated, buf);
    }
  }
}

void Topology::shutdown() {
  if (shut_) return;
  shut_ = true;
  for (auto& node : acs_) node->st.box->close();
  for (auto& node : acs_)
    if (node->th.joinable()) node->th.join();
}

}  // namespace anydb
