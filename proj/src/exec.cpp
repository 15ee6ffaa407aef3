// Per-event execution at one AC: storage ops against owned slices, forwarding
// when the executing AC does not own the target slice, streaming operator
// sinks for the analytical pipeline, and ack emission back to the origin.
#include <algorithm>

#include "anydb/runtime.hpp"

namespace anydb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

void emit_batch(AcState& s, AcId target, DataBatch&& b) {
  if (target == s.id) {
    deliver_data(s, std::move(b));  // self-sends land immediately
  } else {
    s.topo->enqueue_data(target, std::move(b));
  }
}

void emit_to_route(AcState& s, const OutputRoute& route, std::vector<Row>&& rows, int capacity) {
  auto batches = batch_split(std::move(rows), capacity, route.sid);
  for (DataBatch& b : batches) {
    for (int t = 0; t + 1 < route.targets.size(); t++) {
      DataBatch copy = b;  // rows are shared, the frame is copied
      emit_batch(s, route.targets[t], std::move(copy));
    }
    emit_batch(s, route.targets.back(), std::move(b));
  }
}

void apply_ack(AcState& s, const Event& e, const Ack& a);

void send_ack(AcState& s, const Event& e, AckStatus st) {
  Event ack;
  ack.event_id = e.event_id;
  ack.txn_or_query_id = e.txn_or_query_id;
  ack.op_index = e.op_index;
  ack.origin = s.id;
  ack.op = Ack{e.op_index, st};
  if (e.origin == s.id) {
    apply_ack(s, ack, std::get<Ack>(ack.op));  // local tracker, skip the queue
  } else {
    s.outbox[e.origin].push_back(std::move(ack));
  }
}

void record(AcState& s, const Event& e, char kind, TableId t, Key key, int64_t value) {
  if (!s.tracing) return;
  if (t == TableId::Item) return;     // replicated and immutable: no conflicts
  if (t == TableId::History) return;  // append-only and never read: appends commute
  std::lock_guard lk(s.side_mu);
  s.trace.push_back(HistoryRecord{e.txn_or_query_id, e.global_seq, e.op_index, kind, t, key,
                                  value, s.id, s.local_order++});
}

void record_timing(AcState& s, const Event& e, char kind, TimePoint done) {
  std::lock_guard lk(s.side_mu);
  s.op_timings.push_back(OpTiming{e.txn_or_query_id, e.op_index, kind, e.released_at, {}, done});
}

// ---------------------------------------------------------------------------
// Stream access
// ---------------------------------------------------------------------------

const StreamBuf& complete_stream(AcState& s, const StreamId& sid) {
  auto it = s.stream_buffers.find(sid);
  if (it == s.stream_buffers.end() || !it->second.complete)
    throw_db(Err::InvariantViolated, "event executed before its stream completed");
  return it->second;
}

int64_t single_stream_value(AcState& s, const StreamId& sid) {
  const StreamBuf& buf = complete_stream(s, sid);
  if (buf.row_count() != 1)
    throw_db(Err::InvariantViolated, "expected a single-row stream");
  for (const auto& b : buf.batches)
    if (!b.rows->empty()) return (*b.rows)[0][0];
  throw_db(Err::InvariantViolated, "unreachable");
}

// ---------------------------------------------------------------------------
// Commit tracking at the commit target
// ---------------------------------------------------------------------------

// The last ack landed: count the commit and tell the admitting driver with a
// single done-notification whose released_at carries the commit time. When
// the tracker already lives at the driver the record is appended directly.
void finish_tracker(AcState& s, const TrackedCommit& tc) {
  s.commits_done.fetch_add(1, std::memory_order_relaxed);
  if (s.role == AcRole::Driver) {
    s.done_log.push_back(DoneRecord{tc.t.txn_id, tc.t.commit_time, !tc.t.failed});
    return;
  }
  Event done;
  done.event_id = (tc.t.txn_id << 8) | 0xFFu;
  done.txn_or_query_id = tc.t.txn_id;
  done.op_index = tc.commit_op;
  done.origin = s.id;
  done.released_at = tc.t.commit_time;
  done.op = Ack{tc.commit_op, tc.t.failed ? AckStatus::Failed : AckStatus::Ok, true};
  s.outbox[tc.notify].push_back(std::move(done));
}

void apply_ack(AcState& s, const Event& e, const Ack& a) {
  if (a.done) {
    if (s.role != AcRole::Driver)
      throw_db(Err::UnexpectedAck, "completion notice away from the admission point");
    s.done_log.push_back(DoneRecord{e.txn_or_query_id, e.released_at, a.status == AckStatus::Ok});
    return;
  }
  auto it = s.trackers.find(e.txn_or_query_id);
  if (it == s.trackers.end()) {
    // Acks travel on their own queues and can outrun the commit event.
    s.early_acks[e.txn_or_query_id].push_back(e);
    return;
  }
  if (on_ack(it->second.t, a, a.target_op_index, Clock::now())) {
    TrackedCommit done = it->second;
    s.trackers.erase(it);
    finish_tracker(s, done);
  }
}

void exec_commit(AcState& s, const Event& e, const Commit& c) {
  uint64_t txn = e.txn_or_query_id;
  if (s.trackers.count(txn))
    throw_db(Err::InvariantViolated, "second commit event for one transaction");
  TrackedCommit tc;
  tc.t.txn_id = txn;
  tc.t.expected_mask = c.expected_mask;
  tc.t.expected_count = c.expected_ack_count;
  tc.t.admit_time = e.released_at;  // stamped at admission
  tc.notify = e.origin;
  tc.commit_op = e.op_index;
  if (c.expected_ack_count == 0) {
    tc.t.committed = true;
    tc.t.commit_time = Clock::now();
    finish_tracker(s, tc);
    return;
  }
  s.trackers.emplace(txn, tc);
  auto st = s.early_acks.find(txn);
  if (st != s.early_acks.end()) {
    std::vector<Event> stash = std::move(st->second);
    s.early_acks.erase(st);
    for (Event& a : stash) apply_ack(s, a, std::get<Ack>(a.op));
  }
}

// ---------------------------------------------------------------------------
// Ownership resolution and forwarding
// ---------------------------------------------------------------------------

struct SliceRef {
  int32_t w = 0;
  TableGroup g = TableGroup::Wh;
};

SliceRef op_slice(const Event& e) {
  return std::visit(
      overloaded{
          [](const ReadRecord& r) {
            return SliceRef{key_warehouse(r.key), table_group(r.table)};
          },
          [](const UpdateRecord& u) {
            int32_t w = u.key_from_stream ? u.key_w : key_warehouse(u.key);
            return SliceRef{w, table_group(u.table)};
          },
          [](const InsertRecord& i) {
            int32_t w;
            if (i.keyless)
              w = int32_t(i.row[col::hist::h_w_id]);
            else if (i.key_from_stream)
              w = i.key_w;
            else
              w = key_warehouse(i.key);
            return SliceRef{w, table_group(i.table)};
          },
          [](const SelectCustomerByLastName& sel) {
            return SliceRef{sel.w, TableGroup::Cust};
          },
          [](const auto&) { return SliceRef{}; },
      },
      e.op);
}

// The ITEM replica is immutable and present in every partition, so any
// storage AC reads it from any slice it can reach.
bool item_read(const Event& e) {
  const auto* r = std::get_if<ReadRecord>(&e.op);
  return r && r->table == TableId::Item;
}

// A storage op landing on a compute AC is a shipped leg: resolve anything that
// depends on locally buffered streams, then send it to the owner.
void forward_to_owner(AcState& s, Event&& e, SliceRef ref) {
  std::visit(overloaded{
                 [&](UpdateRecord& u) {
                   if (u.key_from_stream) {
                     int64_t c = single_stream_value(s, e.required_streams[0]);
                     u.key = key_cust(u.key_w, u.key_d, c);
                     u.key_from_stream = false;
                   }
                 },
                 [&](InsertRecord& i) {
                   if (i.cid_col >= 0) {
                     int64_t c = single_stream_value(s, e.required_streams[0]);
                     i.row[i.cid_col] = c;
                     i.cid_col = -1;
                     i.key_from_stream = false;
                   }
                 },
                 [](auto&) {},
             },
             e.op);
  e.required_streams.clear();
  e.release_streams = false;
  AcId target = s.topo->owner(ref.w, ref.g);
  s.outbox[target].push_back(std::move(e));
}

// ---------------------------------------------------------------------------
// Storage-op handlers
// ---------------------------------------------------------------------------

void exec_read(AcState& s, const Event& e, const ReadRecord& r) {
  Partition* p = nullptr;
  if (r.table == TableId::Item) {
    // The replica lives in every slice; serve from any slice this AC owns.
    const size_t w_count = s.topo->dataset.partitions.size();
    for (size_t w = 0; w < w_count && !p; w++)
      for (int g = 0; g < kGroupCount; g++)
        if (s.owns(int32_t(w), TableGroup(g))) {
          p = &s.slice(int32_t(w));
          break;
        }
    if (!p) throw_db(Err::WrongPartition, "replica read on a component owning no slice");
  } else {
    p = &s.slice(key_warehouse(r.key));
  }
  Row row = read_record(*p, r);
  record(s, e, 'R', r.table, r.key, row[0]);
  if (e.output.valid()) emit_to_route(s, e.output, std::vector<Row>{row}, kDefaultBatchCapacity);
}

// Apply-order monotonicity is a contract of classed (ordered) events only;
// unclassed routing lets forwarded legs race and leans on commutative writes,
// so those apply with seq 0 (= no ordering claim).
uint64_t apply_seq(const Event& e) { return e.conflict_class == kNoClass ? 0 : e.global_seq; }

void exec_update(AcState& s, const Event& e, const UpdateRecord& u) {
  int64_t resolved_c = -1;
  if (u.key_from_stream) resolved_c = single_stream_value(s, e.required_streams[0]);
  int32_t w = u.key_from_stream ? u.key_w : key_warehouse(u.key);
  ApplyResult res = apply_update(s.slice(w), u, apply_seq(e), resolved_c);
  record(s, e, 'W', u.table, res.key, res.written);
  send_ack(s, e, res.ack.status);
}

void exec_insert(AcState& s, const Event& e, const InsertRecord& ins) {
  int64_t resolved_c = -1;
  if (ins.cid_col >= 0 || ins.key_from_stream)
    resolved_c = single_stream_value(s, e.required_streams[0]);
  int32_t w;
  if (ins.keyless)
    w = int32_t(ins.row[col::hist::h_w_id]);
  else if (ins.key_from_stream)
    w = ins.key_w;
  else
    w = key_warehouse(ins.key);
  ApplyResult res = apply_insert(s.slice(w), ins, apply_seq(e), resolved_c);
  record(s, e, 'W', ins.table, res.key, res.written);
  send_ack(s, e, res.ack.status);
}

void exec_select_by_name(AcState& s, const Event& e, const SelectCustomerByLastName& sel) {
  int64_t c_id;
  if (!e.required_streams.empty()) {
    // Compute-side resolution over a beamed block of [c_id, c_last] rows
    // (already c_id-ordered by the storage scan).
    const StreamBuf& buf = complete_stream(s, e.required_streams[0]);
    InlineVec<int64_t, 64> ids;
    size_t n = 0;
    buf.for_each_row([&](const Row& r) {
      if (r[1] == sel.last_name) {
        if (n < size_t(ids.capacity())) ids.push_back(r[0]);
        n++;
      }
    });
    if (n == 0) throw_db(Err::KeyNotFound, "no customer with that last name");
    size_t idx = (n + 1) / 2 - 1;
    if (idx < size_t(ids.size())) {
      c_id = ids[idx];
    } else {  // very common name: second pass to the median position
      size_t seen = 0;
      c_id = -1;
      buf.for_each_row([&](const Row& r) {
        if (r[1] == sel.last_name && seen++ == idx) c_id = r[0];
      });
    }
  } else {
    Partition& p = s.slice(sel.w);
    c_id = median_customer_by_last_name(p, sel.w, sel.d, sel.last_name);
    if (c_id < 0) throw_db(Err::KeyNotFound, "no customer with that last name");
    record(s, e, 'R', TableId::Customer, key_cust(sel.w, sel.d, c_id), c_id);
  }
  Row out{};
  out.n = 1;
  out.v[0] = c_id;
  emit_to_route(s, e.output, std::vector<Row>{out}, kDefaultBatchCapacity);
}

// ---------------------------------------------------------------------------
// Scans and beams (storage side): union of all owned slices of the table, in
// partition order, framed onto the output stream.
// ---------------------------------------------------------------------------

std::vector<Row> gather_scan(AcState& s, ScanSource src, TableId table, const Predicate& pred,
                             const Projection& proj) {
  std::vector<Row> rows;
  TableGroup g = table_group(table);
  const size_t w_count = s.topo->dataset.partitions.size();
  bool any = false;
  for (size_t w = 0; w < w_count; w++) {
    if (!s.owns(int32_t(w), g)) continue;
    any = true;
    std::vector<Row> part = scan_filter_source(s.slice(int32_t(w)), src, table, pred, proj);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (!any) throw_db(Err::WrongPartition, "scan reached a component owning no slice of the table");
  return rows;
}

void exec_scan(AcState& s, const Event& e, const ScanFilter& sc) {
  std::vector<Row> rows = gather_scan(s, sc.source, sc.table, sc.pred, sc.proj);
  emit_to_route(s, e.output, std::move(rows), kDefaultBatchCapacity);
  record_timing(s, e, 's', Clock::now());
}

void exec_beam(AcState& s, const Event& e, const BeamInit& bm) {
  std::vector<Row> rows = gather_scan(s, bm.source, bm.table, bm.pred, bm.proj);
  OutputRoute route;
  route.sid = bm.stream;
  route.targets.push_back(bm.target);
  emit_to_route(s, route, std::move(rows), kDefaultBatchCapacity);
  record_timing(s, e, 's', Clock::now());
}

// ---------------------------------------------------------------------------
// Join build
// ---------------------------------------------------------------------------

uint64_t join_key(const JoinKeySpec& k, const Row& r) {
  return key_cust(r[k.col_w], r[k.col_d], r[k.col_x]);  // same packing as PKs
}

void exec_join_build(AcState& s, const Event& e, const JoinBuild& jb) {
  uint64_t jid = (e.txn_or_query_id << 8) | uint32_t(jb.join_id);
  JoinState& js = s.joins[jid];
  if (js.build_complete) throw_db(Err::InvariantViolated, "join built twice");
  for (const StreamId& sid : e.required_streams) {
    const StreamBuf& buf = complete_stream(s, sid);
    buf.for_each_row([&](const Row& r) {
      js.table[join_key(jb.key, r)].push_back(r);
      js.build_rows++;
    });
  }
  js.build_complete = true;
  // Announce build completion: an empty stream the probe event gates on.
  if (e.output.valid()) emit_to_route(s, e.output, {}, kDefaultBatchCapacity);
  record_timing(s, e, 'b', Clock::now());
}

// ---------------------------------------------------------------------------
// Streaming sinks: probe and aggregate consume input batches as they arrive.
// ---------------------------------------------------------------------------

void sink_emit(AcState& s, SinkShared& sh, std::vector<Row>&& rows, bool final_close) {
  // Mid-stream empty output would break framing; only the closing batch may
  // be empty.
  if (rows.empty() && !final_close) return;
  DataBatch b;
  b.sid = sh.ev.output.sid;
  b.batch_seq = sh.out_seq++;
  b.last = final_close;
  sh.rows_out += rows.size();
  b.rows = std::make_shared<std::vector<Row>>(std::move(rows));
  const auto& targets = sh.ev.output.targets;
  for (int t = 0; t + 1 < targets.size(); t++) {
    DataBatch copy = b;
    emit_batch(s, targets[t], std::move(copy));
  }
  emit_batch(s, targets.back(), std::move(b));
}

void sink_finalize(AcState& s, SinkShared& sh);

void sink_consume(AcState& s, const std::shared_ptr<SinkShared>& shp, DataBatch&& b) {
  SinkShared& sh = *shp;
  bool closes_input = b.last;
  std::vector<Row> out;

  if (const auto* probe = std::get_if<JoinProbe>(&sh.ev.op)) {
    uint64_t jid = (sh.ev.txn_or_query_id << 8) | uint32_t(probe->join_id);
    auto jit = s.joins.find(jid);
    if (jit == s.joins.end() || !jit->second.build_complete)
      throw_db(Err::BuildIncomplete, "probe batch before the join build finished");
    const JoinState& js = jit->second;
    for (const Row& pr : *b.rows) {
      sh.rows_in++;
      auto mit = js.table.find(join_key(probe->key, pr));
      if (mit == js.table.end()) continue;
      for (const Row& br : mit->second) {
        Row o{};
        for (int8_t c : probe->keep_probe) o.v[o.n++] = pr[c];
        for (int8_t c : probe->keep_build) o.v[o.n++] = br[c];
        out.push_back(o);
      }
    }
  } else if (const auto* agg = std::get_if<AggregateOp>(&sh.ev.op)) {
    for (const Row& r : *b.rows) {
      sh.rows_in++;
      Key gk = key_cust(r[agg->group_col_w], r[agg->group_col_d], r[agg->group_col_x]);
      auto& slot = sh.groups[gk];
      if (slot.first.n == 0) {
        Row repr{};
        repr.v[repr.n++] = r[agg->group_col_x];
        repr.v[repr.n++] = r[agg->group_col_w];
        repr.v[repr.n++] = r[agg->group_col_d];
        repr.v[repr.n++] = agg->group_col_extra >= 0 ? r[agg->group_col_extra] : 0;
        slot.first = repr;
      }
      slot.second += r[agg->sum_col];
    }
  } else {
    throw_db(Err::InvariantViolated, "data arrived at a non-streaming operator");
  }

  if (closes_input) {
    s.sinks.erase(b.sid);
    sh.inputs_remaining--;
  }
  bool final_close = closes_input && sh.inputs_remaining == 0;

  if (std::holds_alternative<JoinProbe>(sh.ev.op)) {
    sink_emit(s, sh, std::move(out), final_close);
  }
  if (final_close) sink_finalize(s, sh);
}

void sink_finalize(AcState& s, SinkShared& sh) {
  if (const auto* probe = std::get_if<JoinProbe>(&sh.ev.op)) {
    uint64_t jid = (sh.ev.txn_or_query_id << 8) | uint32_t(probe->join_id);
    s.joins.erase(jid);  // each build feeds exactly one probe
    record_timing(s, sh.ev, 'p', Clock::now());
    return;
  }
  const auto& agg = std::get<AggregateOp>(sh.ev.op);
  std::vector<Row> rows;
  rows.reserve(sh.groups.size());
  for (auto& [gk, slot] : sh.groups) {
    Row r = slot.first;
    r.v[4] = slot.second;
    r.n = 5;
    rows.push_back(r);
  }
  (void)agg;
  // (sum desc, extra asc, w asc, d asc, x asc); row = [x, w, d, extra, sum].
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a[4] != b[4]) return a[4] > b[4];
    if (a[3] != b[3]) return a[3] < b[3];
    if (a[1] != b[1]) return a[1] < b[1];
    if (a[2] != b[2]) return a[2] < b[2];
    return a[0] < b[0];
  });
  sh.groups.clear();
  // Reuse the framing path: emit the whole result now.
  auto batches = batch_split(std::move(rows), kDefaultBatchCapacity, sh.ev.output.sid);
  for (DataBatch& b : batches) {
    b.batch_seq += sh.out_seq;  // none emitted before finalize, but stay safe
    for (int t = 0; t + 1 < sh.ev.output.targets.size(); t++) {
      DataBatch copy = b;
      emit_batch(s, sh.ev.output.targets[t], std::move(copy));
    }
    emit_batch(s, sh.ev.output.targets.back(), std::move(b));
  }
  record_timing(s, sh.ev, 'a', Clock::now());
}

// Activate a streaming operator: attach it to each input stream, replaying
// anything already buffered.
void install_sinks(AcState& s, const Event& e, const InlineVec<StreamId, 8>& inputs) {
  auto sh = std::make_shared<SinkShared>();
  sh->ev = e;
  sh->inputs_remaining = int(inputs.size());
  for (const StreamId& sid : inputs) {
    auto bit = s.stream_buffers.find(sid);
    std::vector<DataBatch> replay;
    if (bit != s.stream_buffers.end()) {
      replay = std::move(bit->second.batches);
      s.stream_buffers.erase(bit);
    }
    s.sinks.emplace(sid, sh);
    for (DataBatch& b : replay) sink_consume(s, sh, std::move(b));
  }
}

void exec_probe(AcState& s, const Event& e, const JoinProbe& probe) {
  uint64_t jid = (e.txn_or_query_id << 8) | uint32_t(probe.join_id);
  auto jit = s.joins.find(jid);
  if (jit == s.joins.end() || !jit->second.build_complete)
    throw_db(Err::BuildIncomplete, "probe released before its build");
  install_sinks(s, e, probe.inputs);
}

void exec_aggregate(AcState& s, const Event& e, const AggregateOp& agg) {
  install_sinks(s, e, agg.inputs);
}

}  // namespace

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

void deliver_data(AcState& s, DataBatch&& b) {
  auto it = s.sinks.find(b.sid);
  if (it != s.sinks.end()) {
    auto sh = it->second;  // keep alive across erase
    sink_consume(s, sh, std::move(b));
    return;
  }
  s.stream_buffers[b.sid].add(std::move(b));
}

void exec_event(AcState& s, Event&& e) {
  // Storage ops not owned here: a compute AC ships them to the owner; a
  // storage AC reached in error fails loudly. Replica (ITEM) reads run on any
  // storage AC.
  if (is_storage_op(e.op)) {
    SliceRef ref;
    bool runs_here;
    if (item_read(e)) {
      runs_here = s.role == AcRole::Storage;
      // Replica reads can go to any slice; spread deterministically so one
      // owner does not absorb every forwarded catalog read.
      ref = SliceRef{int32_t(e.event_id % s.topo->dataset.partitions.size()),
                     TableGroup::Stock};
    } else {
      ref = op_slice(e);
      runs_here = s.owns(ref.w, ref.g);
    }
    if (!runs_here) {
      if (s.role != AcRole::Compute)
        throw_db(Err::WrongPartition, "storage op routed to a non-owning component");
      bool release = e.release_streams;
      InlineVec<StreamId, 8> sids = e.required_streams;
      forward_to_owner(s, std::move(e), ref);
      if (release)
        for (const StreamId& sid : sids) s.stream_buffers.erase(sid);
      return;
    }
  }

  std::visit(overloaded{
                 [&](const ReadRecord& r) { exec_read(s, e, r); },
                 [&](const UpdateRecord& u) { exec_update(s, e, u); },
                 [&](const InsertRecord& ins) { exec_insert(s, e, ins); },
                 [&](const SelectCustomerByLastName& sel) { exec_select_by_name(s, e, sel); },
                 [&](const ScanFilter& sc) { exec_scan(s, e, sc); },
                 [&](const JoinBuild& jb) { exec_join_build(s, e, jb); },
                 [&](const JoinProbe& jp) { exec_probe(s, e, jp); },
                 [&](const AggregateOp& ag) { exec_aggregate(s, e, ag); },
                 [&](const CompileQuery&) { record_timing(s, e, 'c', Clock::now()); },
                 [&](const Commit& c) { exec_commit(s, e, c); },
                 [&](const Ack& a) { apply_ack(s, e, a); },
                 [&](const BeamInit& bm) { exec_beam(s, e, bm); },
             },
             e.op);

  if (e.release_streams)
    for (const StreamId& sid : e.required_streams) s.stream_buffers.erase(sid);
}

}  // namespace anydb
