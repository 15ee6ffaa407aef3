#include "anydb/txn.hpp"

#include "anydb/event.hpp"
#include "doctest.h"

using namespace anydb;

namespace {

HistoryRecord rec(uint64_t txn, uint64_t seq, char kind, TableId t, Key key, AcId ac,
                  uint32_t lo) {
  HistoryRecord r;
  r.txn_id = txn;
  r.global_seq = seq;
  r.op_index = 0;
  r.kind = kind;
  r.table = t;
  r.key = key;
  r.ac = ac;
  r.local_order = lo;
  return r;
}

LockRequest lock(uint64_t txn, uint64_t item, LockMode m) { return {txn, item, m, false}; }
LockRequest unlock(uint64_t txn, uint64_t item) { return {txn, item, LockMode::S, true}; }

}  // namespace

TEST_CASE("a tracker counts each distinct write ack once and completes on the last") {
  auto prog = payment_program(0, 1, 0, 1, true, 40, 800, 2);
  auto events = make_txn_events(prog, 12);
  auto admit = Clock::now();
  CommitTracker t = make_tracker(12, events, admit);
  CHECK(t.expected_mask == 0x3Bu);
  CHECK(t.expected_count == 5);
  CHECK(t.admit_time == admit);

  Ack ok{0, AckStatus::Ok};
  CHECK_FALSE(on_ack(t, ok, 0, Clock::now()));
  CHECK_FALSE(on_ack(t, ok, 1, Clock::now()));
  CHECK_FALSE(on_ack(t, ok, 3, Clock::now()));
  CHECK_FALSE(on_ack(t, ok, 3, Clock::now()));  // duplicate: idempotent
  CHECK_FALSE(on_ack(t, ok, 4, Clock::now()));
  CHECK_FALSE(t.committed);

  auto last = Clock::now();
  CHECK(on_ack(t, ok, 5, last));
  CHECK(t.committed);
  CHECK(t.commit_time == last);
  CHECK_FALSE(t.failed);
  CHECK_FALSE(on_ack(t, ok, 5, Clock::now()));  // late duplicate after commit
}

TEST_CASE("acks for non-write ops are protocol errors") {
  auto prog = payment_program(0, 1, 0, 1, true, 40, 800, 2);
  CommitTracker t = make_tracker(12, make_txn_events(prog, 12), Clock::now());
  Ack ok{2, AckStatus::Ok};
  CHECK_THROWS_AS(on_ack(t, ok, 2, Clock::now()), DbException);   // the select leg
  CHECK_THROWS_AS(on_ack(t, ok, 6, Clock::now()), DbException);   // the commit itself
  CHECK_THROWS_AS(on_ack(t, ok, -1, Clock::now()), DbException);
  CHECK_THROWS_AS(on_ack(t, ok, 63, Clock::now()), DbException);
}

TEST_CASE("a failed ack taints the transaction but completion still fires") {
  auto prog = payment_program(0, 1, 0, 1, false, 4, 100, 1);
  CommitTracker t = make_tracker(3, make_txn_events(prog, 3), Clock::now());
  CHECK(t.expected_mask == 0x1Fu);
  CHECK_FALSE(on_ack(t, Ack{0, AckStatus::Failed}, 0, Clock::now()));
  CHECK(t.failed);
  for (int op = 1; op <= 3; op++) CHECK_FALSE(on_ack(t, Ack{op, AckStatus::Ok}, op, Clock::now()));
  CHECK(on_ack(t, Ack{4, AckStatus::Ok}, 4, Clock::now()));
  CHECK(t.failed);
  CHECK(t.committed);
}

TEST_CASE("trace lines round-trip through the parser") {
  HistoryRecord r = rec(123456789ull, 42, 'W', TableId::OrderLine, key_oline(3, 9, 77, 5), 6, 9001);
  r.op_index = 17;
  std::string line = trace_line(r);
  HistoryRecord p = parse_trace_line(line);
  CHECK(p.txn_id == r.txn_id);
  CHECK(p.global_seq == r.global_seq);
  CHECK(p.op_index == r.op_index);
  CHECK(p.kind == r.kind);
  CHECK(p.table == r.table);
  CHECK(p.key == r.key);
  CHECK(p.ac == r.ac);
  CHECK(p.local_order == r.local_order);
}

TEST_CASE("malformed trace lines are rejected with a reason") {
  CHECK_THROWS_AS(parse_trace_line("1,2,3,W,WAREHOUSE,4,5"), DbException);       // 7 fields
  CHECK_THROWS_AS(parse_trace_line("1,2,3,Q,WAREHOUSE,4,5,6"), DbException);     // bad kind
  CHECK_THROWS_AS(parse_trace_line("1,2,3,W,NO_SUCH_TABLE,4,5,6"), DbException); // bad table
  CHECK_THROWS_AS(parse_trace_line("x,2,3,W,WAREHOUSE,4,5,6"), DbException);     // bad number
  CHECK_NOTHROW(parse_trace_line("1,0,3,R,DISTRICT,4,5,6"));
}

TEST_CASE("ordered writer pairs form a clean serializable history") {
  std::vector<HistoryRecord> h;
  h.push_back(rec(1, 1, 'W', TableId::Warehouse, key_wh(0), 0, 0));
  h.push_back(rec(2, 2, 'W', TableId::Warehouse, key_wh(0), 0, 1));
  h.push_back(rec(1, 1, 'W', TableId::District, key_dist(0, 1), 0, 2));
  h.push_back(rec(2, 2, 'R', TableId::District, key_dist(0, 1), 0, 3));
  auto res = check_serializable(h);
  CHECK(res.ok);
  CHECK(res.seq_consistent);
  CHECK(res.cycle.empty());
}

TEST_CASE("write-write inversion across two keys is caught as a cycle") {
  std::vector<HistoryRecord> h;
  h.push_back(rec(1, 0, 'W', TableId::Warehouse, key_wh(0), 0, 0));
  h.push_back(rec(2, 0, 'W', TableId::Warehouse, key_wh(0), 0, 1));  // 1 -> 2
  h.push_back(rec(2, 0, 'W', TableId::Warehouse, key_wh(1), 1, 0));
  h.push_back(rec(1, 0, 'W', TableId::Warehouse, key_wh(1), 1, 1));  // 2 -> 1
  auto res = check_serializable(h);
  CHECK_FALSE(res.ok);
  REQUIRE(res.cycle.size() == 2);
  CHECK(((res.cycle[0] == 1 && res.cycle[1] == 2) || (res.cycle[0] == 2 && res.cycle[1] == 1)));
  CHECK(!res.detail.empty());
}

TEST_CASE("read-write conflicts participate in the cycle check") {
  // T1 reads x then T2 overwrites it; T2 wrote y before T1 read it.
  std::vector<HistoryRecord> h;
  h.push_back(rec(1, 0, 'R', TableId::Customer, key_cust(0, 1, 1), 0, 0));
  h.push_back(rec(2, 0, 'W', TableId::Customer, key_cust(0, 1, 1), 0, 1));  // 1 -> 2
  h.push_back(rec(2, 0, 'W', TableId::Customer, key_cust(0, 1, 2), 0, 2));
  h.push_back(rec(1, 0, 'R', TableId::Customer, key_cust(0, 1, 2), 0, 3));  // 2 -> 1
  auto res = check_serializable(h);
  CHECK_FALSE(res.ok);
}

TEST_CASE("edges against the admission order flip the consistency flag") {
  std::vector<HistoryRecord> h;
  h.push_back(rec(1, 5, 'W', TableId::Warehouse, key_wh(0), 0, 0));
  h.push_back(rec(2, 3, 'W', TableId::Warehouse, key_wh(0), 0, 1));
  auto res = check_serializable(h);
  CHECK(res.ok);  // acyclic...
  CHECK_FALSE(res.seq_consistent);  // ...but not the admitted order
  CHECK(!res.detail.empty());
}

TEST_CASE("one key served by two components voids the trace") {
  std::vector<HistoryRecord> h;
  h.push_back(rec(1, 1, 'W', TableId::Warehouse, key_wh(0), 0, 0));
  h.push_back(rec(2, 2, 'W', TableId::Warehouse, key_wh(0), 3, 0));
  CHECK_THROWS_AS(check_serializable(h), DbException);
}

TEST_CASE("lock stream grants shares, queues conflicts, unblocks in FIFO order") {
  LockStreamJoin j;
  auto d1 = j.process(lock(1, 10, LockMode::S));
  REQUIRE(d1.size() == 1);
  CHECK(d1[0].outcome == LockOutcome::Granted);

  auto d2 = j.process(lock(2, 10, LockMode::S));
  CHECK(d2[0].outcome == LockOutcome::Granted);  // S + S coexist

  auto d3 = j.process(lock(3, 10, LockMode::X));
  CHECK(d3[0].outcome == LockOutcome::Queued);

  // Compatible with the holders, but FIFO fairness parks it behind the X.
  auto d4 = j.process(lock(4, 10, LockMode::S));
  CHECK(d4[0].outcome == LockOutcome::Queued);

  auto r1 = j.process(unlock(1, 10));
  REQUIRE(r1.size() == 1);  // T2 still holds S: the X stays parked
  CHECK(r1[0].outcome == LockOutcome::Released);

  auto r2 = j.process(unlock(2, 10));
  REQUIRE(r2.size() == 2);  // release + the X grant; the S behind it stays
  CHECK(r2[0].outcome == LockOutcome::Released);
  CHECK(r2[1].txn == 3);
  CHECK(r2[1].outcome == LockOutcome::Granted);

  auto r3 = j.process(unlock(3, 10));
  REQUIRE(r3.size() == 2);
  CHECK(r3[1].txn == 4);
  CHECK(r3[1].outcome == LockOutcome::Granted);

  // Independent items never interact.
  auto d5 = j.process(lock(5, 11, LockMode::X));
  CHECK(d5[0].outcome == LockOutcome::Granted);
  j.process(unlock(4, 10));
  auto d6 = j.process(lock(6, 10, LockMode::X));
  CHECK(d6[0].outcome == LockOutcome::Granted);
}

TEST_CASE("a release unblocks a whole run of compatible shares") {
  LockStreamJoin j;
  j.process(lock(1, 7, LockMode::X));
  j.process(lock(2, 7, LockMode::S));
  j.process(lock(3, 7, LockMode::S));
  j.process(lock(4, 7, LockMode::X));
  j.process(lock(5, 7, LockMode::S));

  auto out = j.process(unlock(1, 7));
  // Both queued shares clear together; the X (and anything behind it) waits.
  REQUIRE(out.size() == 3);
  CHECK(out[0].outcome == LockOutcome::Released);
  CHECK(out[1].txn == 2);
  CHECK(out[2].txn == 3);

  auto out2 = j.process(unlock(2, 7));
  CHECK(out2.size() == 1);
  auto out3 = j.process(unlock(3, 7));
  REQUIRE(out3.size() == 2);
  CHECK(out3[1].txn == 4);
  auto out4 = j.process(unlock(4, 7));
  REQUIRE(out4.size() == 2);
  CHECK(out4[1].txn == 5);
}

TEST_CASE("parameter records rebuild the exact same program") {
  auto pay = payment_program(2, 3, 1, 2, true, 88, 4200, 9);
  auto pay2 = program_from_params(pay.params);
  REQUIRE(pay.ops.size() == pay2.ops.size());
  CHECK(pay.deps.size() == pay2.deps.size());
  CHECK(pay.home_partition == pay2.home_partition);
  auto e1 = make_txn_events(pay, 5);
  auto e2 = make_txn_events(pay2, 5);
  CHECK(std::get<Commit>(e1.back().op).expected_mask ==
        std::get<Commit>(e2.back().op).expected_mask);

  std::vector<ItemReq> items{{1, 2}, {3, 4}, {5, 6}, {7, 8}, {2, 1}};
  auto no = neworder_program(1, 2, 3, items, 500, 2010);
  auto no2 = program_from_params(no.params);
  REQUIRE(no.ops.size() == no2.ops.size());
  for (size_t i = 0; i < no.ops.size(); i++) CHECK(no.ops[i].index() == no2.ops[i].index());
}
