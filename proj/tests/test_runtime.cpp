#include "anydb/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "doctest.h"

using namespace anydb;

namespace {

DataBatch batch(StreamId sid, uint32_t seq, bool last, std::vector<Row> rows) {
  DataBatch b;
  b.sid = sid;
  b.batch_seq = seq;
  b.last = last;
  b.rows = std::make_shared<std::vector<Row>>(std::move(rows));
  return b;
}

Row one_val(int64_t v) {
  Row r{};
  r.n = 1;
  r.v[0] = v;
  return r;
}

Event classed(uint64_t cseq, uint64_t gseq, int32_t op_index, uint64_t id) {
  Event e;
  e.event_id = id;
  e.txn_or_query_id = gseq;
  e.op_index = op_index;
  e.conflict_class = 0;
  e.class_seq = cseq;
  e.global_seq = gseq;
  e.op = ReadRecord{};
  return e;
}

LoaderConfig tiny() {
  LoaderConfig cfg;
  cfg.warehouses = 2;
  cfg.districts_per_warehouse = 2;
  cfg.customers_per_district = 20;
  cfg.orders_per_district = 10;
  cfg.items = 20;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("stream buffers enforce dense framing and a single close") {
  StreamId sid{9, 1, 0};
  StreamBuf buf;
  buf.add(batch(sid, 0, false, {one_val(1), one_val(2)}));
  buf.add(batch(sid, 1, false, {one_val(3)}));
  CHECK_FALSE(buf.complete);
  buf.add(batch(sid, 2, true, {}));
  CHECK(buf.complete);
  CHECK(buf.row_count() == 3);

  StreamBuf gap;
  gap.add(batch(sid, 0, false, {one_val(1)}));
  CHECK_THROWS_AS(gap.add(batch(sid, 2, true, {})), DbException);

  StreamBuf after_last;
  after_last.add(batch(sid, 0, true, {one_val(1)}));
  CHECK_THROWS_AS(after_last.add(batch(sid, 1, true, {})), DbException);

  StreamBuf hollow;
  CHECK_THROWS_AS(hollow.add(batch(sid, 0, false, {})), DbException);
}

TEST_CASE("reorder release order is identical across all arrival permutations") {
  // Three admissions: class_seq 1..3 carrying global_seq 5..7.
  int perm[3] = {0, 1, 2};
  std::sort(perm, perm + 3);
  do {
    ReorderBuffer rb;
    std::vector<uint64_t> released;
    for (int i = 0; i < 3; i++) {
      int k = perm[i];
      rb.insert(classed(uint64_t(k + 1), uint64_t(k + 5), 0, uint64_t(100 + k)));
      while (rb.head()) released.push_back(rb.take_head().event_id);
    }
    CHECK(released == std::vector<uint64_t>{100, 101, 102});
    CHECK(rb.empty());
  } while (std::next_permutation(perm, perm + 3));
}

TEST_CASE("reorder holds until the next expected slot arrives") {
  ReorderBuffer rb;
  rb.insert(classed(2, 6, 0, 2));
  rb.insert(classed(3, 7, 0, 3));
  CHECK(rb.head() == nullptr);
  CHECK(rb.size() == 2);
  rb.insert(classed(1, 5, 0, 1));
  REQUIRE(rb.head() != nullptr);
  CHECK(rb.take_head().event_id == 1);
  CHECK(rb.take_head().event_id == 2);
  CHECK(rb.take_head().event_id == 3);
}

TEST_CASE("one transaction's events share its seq and release in op order") {
  ReorderBuffer rb;
  rb.insert(classed(1, 5, 0, 1));
  rb.insert(classed(2, 5, 1, 2));
  rb.insert(classed(3, 5, 4, 3));
  rb.insert(classed(4, 6, 0, 4));
  CHECK(rb.take_head().op_index == 0);
  CHECK(rb.take_head().op_index == 1);
  CHECK(rb.take_head().op_index == 4);
  CHECK(rb.take_head().global_seq == 6);

  // class_seq disagreeing with op order within one txn is an admission bug.
  ReorderBuffer bad;
  bad.insert(classed(1, 5, 2, 1));
  bad.insert(classed(2, 5, 1, 2));
  bad.take_head();
  CHECK_THROWS_AS(bad.take_head(), DbException);

  // Ditto a later slot carrying an earlier global_seq.
  ReorderBuffer regress;
  regress.insert(classed(1, 9, 0, 1));
  regress.insert(classed(2, 8, 0, 2));
  regress.take_head();
  CHECK_THROWS_AS(regress.take_head(), DbException);
}

TEST_CASE("reorder rejects unstamped and already-released slots") {
  ReorderBuffer rb;
  Event e = classed(0, 5, 0, 1);
  CHECK_THROWS_AS(rb.insert(std::move(e)), DbException);
  rb.insert(classed(1, 5, 0, 2));
  rb.take_head();
  CHECK_THROWS_AS(rb.insert(classed(1, 6, 0, 3)), DbException);
}

TEST_CASE("a full mailbox blocks producers until the consumer drains") {
  Mailbox box(1, 1);
  std::atomic<int> pushed{0};
  std::thread producer([&] {
    for (int i = 0; i < 3; i++) {
      Event e;
      e.event_id = uint64_t(i);
      box.push_event(std::move(e));
      pushed.fetch_add(1);
    }
  });

  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK(pushed.load() == 1);  // slot taken by #0, #1 parked on backpressure

  std::vector<Event> ev;
  std::vector<DataBatch> db;
  std::vector<uint64_t> seen;
  while (seen.size() < 3) {
    ev.clear();
    if (box.try_drain(ev, db) == Mailbox::Drain::Got)
      for (const Event& e : ev) seen.push_back(e.event_id);
    else
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  producer.join();
  CHECK(seen == std::vector<uint64_t>{0, 1, 2});

  // A block larger than the capacity still lands once the queue is empty.
  Mailbox wide(2, 2);
  std::vector<Event> block(5);
  CHECK(wide.push_events(std::move(block)));
  ev.clear();
  CHECK(wide.try_drain(ev, db) == Mailbox::Drain::Got);
  CHECK(ev.size() == 5);
}

TEST_CASE("a closed mailbox refuses pushes and reports closed once empty") {
  Mailbox box(4, 4);
  Event e;
  CHECK(box.push_event(std::move(e)));
  box.close();
  Event f;
  CHECK_FALSE(box.push_event(std::move(f)));

  std::vector<Event> ev;
  std::vector<DataBatch> db;
  CHECK(box.try_drain(ev, db) == Mailbox::Drain::Got);  // leftovers still drain
  CHECK(box.try_drain(ev, db) == Mailbox::Drain::Closed);
}

TEST_CASE("a stream-blocked op defers while unrelated work keeps executing") {
  Dataset ds = load_dataset(tiny());
  TopologyConfig tc;
  tc.start_threads = false;
  Topology topo(ds, tc);
  AcId s0 = topo.add_ac(AcRole::Storage);
  topo.add_ac(AcRole::Storage);
  AcId drv = topo.add_ac(AcRole::Driver);
  topo.set_storage_mode(StorageMode::Warehouse);

  StreamId sid{77, s0, 2};
  Event upd;
  upd.event_id = (77ull << 8) | 3;
  upd.txn_or_query_id = 77;
  upd.op_index = 3;
  upd.origin = drv;
  upd.required_streams.push_back(sid);
  upd.release_streams = true;
  UpdateRecord u{TableId::Customer, 0};
  u.key_from_stream = true;
  u.key_w = 0;
  u.key_d = 1;
  u.deltas.push_back({col::cust::c_balance, -100});
  upd.op = u;
  topo.enqueue_event(s0, std::move(upd));

  AcState& st = topo.ac(s0);
  StepReport r1 = ac_step(st);
  CHECK(r1.executed == 0);
  CHECK(r1.deferred == 1);

  // Five independent reads flow past the parked op.
  for (int c = 1; c <= 5; c++) {
    Event rd;
    rd.event_id = (900ull + c) << 8;
    rd.txn_or_query_id = 900 + c;
    rd.origin = drv;
    rd.op = ReadRecord{TableId::Customer, key_cust(0, 1, c)};
    topo.enqueue_event(s0, std::move(rd));
  }
  StepReport r2 = ac_step(st);
  CHECK(r2.executed == 5);
  CHECK(r2.deferred == 1);

  int64_t before = ds.partitions[0].customer.at(key_cust(0, 1, 7))[col::cust::c_balance];
  topo.enqueue_data(s0, batch(sid, 0, true, {one_val(7)}));
  StepReport r3 = ac_step(st);
  CHECK(r3.executed == 1);
  CHECK(r3.deferred == 0);
  CHECK(r3.data_moved == 1);
  CHECK(ds.partitions[0].customer.at(key_cust(0, 1, 7))[col::cust::c_balance] == before - 100);

  // The write acked back to its origin; drain it and the system is bare.
  std::vector<Event> ev;
  std::vector<DataBatch> db;
  CHECK(topo.ac(drv).box->try_drain(ev, db) == Mailbox::Drain::Got);
  REQUIRE(ev.size() == 1);
  const Ack& a = std::get<Ack>(ev[0].op);
  CHECK(a.target_op_index == 3);
  CHECK(a.status == AckStatus::Ok);
  topo.assert_stateless("after drain");
}

TEST_CASE("statelessness check fails while anything is parked and passes after") {
  Dataset ds = load_dataset(tiny());
  TopologyConfig tc;
  tc.start_threads = false;
  Topology topo(ds, tc);
  AcId s0 = topo.add_ac(AcRole::Storage);
  topo.add_ac(AcRole::Storage);
  AcId drv = topo.add_ac(AcRole::Driver);
  topo.set_storage_mode(StorageMode::Warehouse);

  Event never;
  never.event_id = 1 << 8;
  never.txn_or_query_id = 1;
  never.origin = drv;
  never.required_streams.push_back(StreamId{1, s0, 0});
  never.release_streams = true;
  UpdateRecord u{TableId::Customer, 0};
  u.key_from_stream = true;
  u.key_w = 0;
  u.key_d = 1;
  u.deltas.push_back({col::cust::c_balance, 1});
  never.op = u;

  // Unstepped mailbox content counts as buffered state.
  topo.enqueue_event(s0, std::move(never));
  CHECK_FALSE(topo.quiesced());
  CHECK_THROWS_AS(topo.assert_stateless("mid"), DbException);

  // Stepping moves it into the pending list: still not stateless.
  ac_step(topo.ac(s0));
  CHECK(topo.residual() == 1);
  CHECK_THROWS_AS(topo.assert_stateless("parked"), DbException);

  topo.enqueue_data(s0, batch(StreamId{1, s0, 0}, 0, true, {one_val(2)}));
  ac_step(topo.ac(s0));
  std::vector<Event> ev;
  std::vector<DataBatch> db;
  topo.ac(drv).box->try_drain(ev, db);  // collect the write ack
  CHECK(ev.size() == 1);
  topo.assert_stateless("drained");
}

TEST_CASE("ownership table rewrites only between phases") {
  Dataset ds = load_dataset(tiny());
  TopologyConfig tc;
  tc.start_threads = false;
  Topology topo(ds, tc);
  AcId s0 = topo.add_ac(AcRole::Storage);
  AcId s1 = topo.add_ac(AcRole::Storage);
  topo.set_storage_mode(StorageMode::Warehouse);
  CHECK(topo.owner(0, TableGroup::Cust) == s0);
  CHECK(topo.owner(1, TableGroup::Cust) == s1);
  CHECK(topo.owner(1, TableGroup::Stock) == s1);

  topo.set_storage_mode(StorageMode::Grouped);
  // Group g lands on storage AC g mod n, for every partition.
  CHECK(topo.owner(0, TableGroup::Wh) == s0);
  CHECK(topo.owner(1, TableGroup::Wh) == s0);
  CHECK(topo.owner(0, TableGroup::Dist) == s1);
  CHECK(topo.owner(1, TableGroup::Order) == s0);

  topo.begin_phase();
  CHECK_THROWS_AS(topo.set_storage_mode(StorageMode::Warehouse), DbException);
  CHECK_THROWS_AS(topo.add_acs(2), DbException);
  topo.end_phase();
  CHECK(topo.add_acs(2).size() == 2);
  CHECK_THROWS_AS(topo.enqueue_event(99, Event{}), DbException);
  CHECK_THROWS_AS(topo.owner(5, TableGroup::Wh), DbException);
}

TEST_CASE("shutdown closes every mailbox and the worker threads exit") {
  Dataset ds = load_dataset(tiny());
  Topology topo(ds, {});  // threads on
  AcId s0 = topo.add_ac(AcRole::Storage);
  topo.add_ac(AcRole::Storage);
  topo.set_storage_mode(StorageMode::Warehouse);

  Event rd;
  rd.event_id = 5 << 8;
  rd.txn_or_query_id = 5;
  rd.origin = s0;
  rd.op = ReadRecord{TableId::District, key_dist(0, 1)};
  topo.enqueue_event(s0, std::move(rd));
  for (int spin = 0; spin < 2000; spin++) {
    if (topo.ac(s0).executed_total.load() >= 1) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  CHECK(topo.ac(s0).executed_total.load() >= 1);

  topo.shutdown();
  Event after;
  CHECK_FALSE(topo.ac(s0).box->push_event(std::move(after)));
  topo.shutdown();  // idempotent
}
