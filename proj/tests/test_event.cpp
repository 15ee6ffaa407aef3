#include "anydb/event.hpp"

#include "anydb/txn.hpp"
#include "doctest.h"

using namespace anydb;

TEST_CASE("payment by name expands to seven events with commit last") {
  auto prog = payment_program(0, 1, 0, 1, true, 321, 1000, 7);
  auto events = make_txn_events(prog, 42);
  REQUIRE(events.size() == 7);
  for (size_t i = 0; i < events.size(); i++) {
    CHECK(events[i].op_index == int32_t(i));
    CHECK(events[i].txn_or_query_id == 42);
    CHECK(events[i].event_id == ((uint64_t(42) << 8) | i));
  }
  const Commit& c = std::get<Commit>(events.back().op);
  CHECK(c.expected_ack_count == 5);
  // writes sit at ops 0,1,3,4,5 (the select leg is op 2)
  CHECK(c.expected_mask == 0x3Bu);
  CHECK_FALSE(validate_txn_events(events).has_value());
}

TEST_CASE("payment by id has no select leg") {
  auto prog = payment_program(2, 3, 2, 3, false, 17, 2500, 9);
  auto events = make_txn_events(prog, 7);
  REQUIRE(events.size() == 6);
  CHECK(std::get<Commit>(events.back().op).expected_mask == 0x1Fu);
  CHECK(prog.deps.empty());
  CHECK_FALSE(validate_txn_events(events).has_value());
}

TEST_CASE("neworder expands per item and counts its acks") {
  std::vector<ItemReq> items;
  for (int i = 0; i < 7; i++) items.push_back({i + 1, 2});
  auto prog = neworder_program(1, 4, 55, items, 301, 2008);
  auto events = make_txn_events(prog, 9);
  // ReadC, ReadW, InsORDERS, InsNEW_ORDER, 3 per item, Commit
  REQUIRE(events.size() == 4 + 3 * 7 + 1);
  const Commit& c = std::get<Commit>(events.back().op);
  CHECK(c.expected_ack_count == 2 + 2 * 7);
  CHECK_FALSE(validate_txn_events(events).has_value());

  uint64_t mask = 0;
  for (const Event& e : events)
    if (is_write_op(e.op)) mask |= uint64_t(1) << e.op_index;
  CHECK(mask == c.expected_mask);
}

TEST_CASE("item count limits are enforced") {
  std::vector<ItemReq> four(4, ItemReq{1, 1});
  std::vector<ItemReq> sixteen(16, ItemReq{1, 1});
  CHECK_THROWS_AS(neworder_program(0, 1, 1, four, 10, 2008), DbException);
  CHECK_THROWS_AS(neworder_program(0, 1, 1, sixteen, 10, 2008), DbException);
}

TEST_CASE("malformed programs are rejected") {
  TransactionProgram empty;
  CHECK_THROWS_AS(make_txn_events(empty, 1), DbException);

  // commit in the middle
  auto prog = payment_program(0, 1, 0, 1, false, 1, 100, 1);
  prog.ops.insert(prog.ops.begin(), Commit{0});
  CHECK_THROWS_AS(make_txn_events(prog, 1), DbException);

  // ack count out of step with the writes
  auto prog2 = payment_program(0, 1, 0, 1, false, 1, 100, 1);
  std::get<Commit>(prog2.ops.back()).expected_ack_count = 3;
  CHECK_THROWS_AS(make_txn_events(prog2, 1), DbException);
}

TEST_CASE("batch framing is contiguous with a unique last") {
  std::vector<Row> rows(2500, make_row({1, 2}));
  StreamId sid{5, 0, 1};
  auto batches = batch_split(std::move(rows), 1024, sid);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].rows->size() == 1024);
  CHECK(batches[1].rows->size() == 1024);
  CHECK(batches[2].rows->size() == 452);
  for (size_t i = 0; i < batches.size(); i++) {
    CHECK(batches[i].batch_seq == uint32_t(i));
    CHECK(batches[i].last == (i + 1 == batches.size()));
    CHECK(batches[i].sid == sid);
  }
}

TEST_CASE("empty streams still carry one closing batch") {
  auto batches = batch_split({}, 1024, StreamId{1, 2, 3});
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].last);
  CHECK(batches[0].rows->empty());
}

TEST_CASE("predicates cover equality, ranges and state prefixes") {
  Row r = make_row({7, 100, 3});
  CHECK(Predicate::all().matches(r));
  CHECK(Predicate::eq(0, 7).matches(r));
  CHECK_FALSE(Predicate::eq(0, 8).matches(r));
  CHECK(Predicate::range(1, 100, 200).matches(r));
  CHECK_FALSE(Predicate::range(1, 101, 200).matches(r));  // half-open low end

  // c_state is letter0*26+letter1; prefix 'B' covers codes 26..51
  Row cust = make_row({1, 2, 0, 555, 26 + 4, 0, 0, 0});
  CHECK(Predicate::state_prefix('B').matches(cust));
  CHECK_FALSE(Predicate::state_prefix('A').matches(cust));
}

TEST_CASE("projection keeps listed columns in order") {
  Row r = make_row({10, 20, 30, 40});
  Projection p;
  p.push_back(3);
  p.push_back(0);
  Row out = project_row(r, p);
  CHECK(out.cols() == 2);
  CHECK(out[0] == 40);
  CHECK(out[1] == 10);
  CHECK(project_row(r, Projection{}).cols() == 4);
}

TEST_CASE("classed events must carry an admission stamp") {
  Event e;
  e.op = ReadRecord{TableId::Warehouse, key_wh(0)};
  e.conflict_class = 2;
  CHECK(validate_event(e).has_value());
  e.global_seq = 9;
  CHECK_FALSE(validate_event(e).has_value());
}
