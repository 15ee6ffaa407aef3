// Transaction programs (TPC-C payment / new-order, simplified), commit
// tracking, execution histories and the serializability checker.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "anydb/event.hpp"

namespace anydb {

enum class TxnKind : int8_t { Payment = 0, NewOrder = 1 };

struct ItemReq {
  int32_t i_id = 0;
  int32_t qty = 0;
};

// Generation-time parameters, logged at admission so an independent replay
// can reproduce the run in global_seq order.
struct TxnParams {
  TxnKind kind = TxnKind::Payment;
  int32_t w = 0, d = 0;
  // payment
  int32_t c_w = 0, c_d = 0;
  bool by_name = false;
  int32_t c_last = 0;  // name code when by_name
  int32_t c_id = 0;    // direct id otherwise; also new-order customer
  int64_t amount = 0;  // cents
  int64_t h_date = 0;  // deterministic surrogate (txn id)
  // new-order
  int64_t o_id = 0;
  InlineVec<ItemReq, 15> items;
};

// Dependency edge: op `to` consumes the output of op `from` (different events,
// possibly on different ACs; materialized as a data stream by routing).
struct DepEdge {
  int16_t from = 0, to = 0;
};

struct TransactionProgram {
  std::vector<OpKind> ops;  // commit is always the unique last op
  std::vector<DepEdge> deps;
  int32_t home_partition = 0;
  TxnParams params;

  int write_count() const;
};

// Payment: update warehouse and district ytd, resolve the customer (60% by
// last name via the scan leg, else by id), apply the two customer updates,
// append the history row. 5 writes; expected_ack_count = 5.
TransactionProgram payment_program(int32_t w_id, int32_t d_id, int32_t c_w_id, int32_t c_d_id,
                                   bool by_name, int32_t c_last_or_id, int64_t amount_cents,
                                   int64_t h_date);

// New-order: read customer/warehouse, insert ORDERS + NEW_ORDER, then per item
// read ITEM, decrement STOCK (+91 when the result dips below 10) and insert
// the ORDER_LINE with ol_amount = qty * i_price. expected_ack_count =
// 2 + 2 * items. Throws InvalidItemCount outside 5..15.
TransactionProgram neworder_program(int32_t w_id, int32_t d_id, int32_t c_id,
                                    const std::vector<ItemReq>& items, int64_t o_id,
                                    int64_t entry_year);

TransactionProgram program_from_params(const TxnParams& p);

// ---------------------------------------------------------------------------
// Commit tracking. Owned by the admitting loop; one tracker per in-flight
// transaction. Write op indexes are <= 63 (largest program is 50 ops), so the
// expected/received sets are bitmasks.
// ---------------------------------------------------------------------------

struct CommitTracker {
  uint64_t txn_id = 0;
  uint64_t expected_mask = 0;
  uint64_t received_mask = 0;
  int32_t expected_count = 0;
  TimePoint admit_time{};
  TimePoint commit_time{};
  bool committed = false;
  bool failed = false;
};

CommitTracker make_tracker(uint64_t txn_id, const std::vector<Event>& events, TimePoint admit);

// Returns true when this ack completed the transaction (commit time = now).
// Duplicate acks for an op are idempotent. Throws UnexpectedAck when the op
// index is not a write of this transaction.
bool on_ack(CommitTracker& t, const Ack& a, int32_t op_index, TimePoint now);

// ---------------------------------------------------------------------------
// Execution histories
// ---------------------------------------------------------------------------

struct HistoryRecord {
  uint64_t txn_id = 0;
  uint64_t global_seq = 0;
  int32_t op_index = 0;
  char kind = 'R';  // 'R' | 'W'
  TableId table = TableId::Warehouse;
  Key key = 0;
  int64_t value = 0;  // observed value (reads) / applied fingerprint (writes)
  AcId ac = kNoAc;
  uint32_t local_order = 0;  // per-AC execution counter
};

std::string trace_line(const HistoryRecord& r);
HistoryRecord parse_trace_line(const std::string& line);  // throws BadTrace

struct SerialCheckResult {
  bool ok = true;
  bool seq_consistent = true;  // edges agree with global_seq when stamps exist
  std::vector<uint64_t> cycle;  // witness txn ids when !ok
  std::string detail;
};

// Builds the conflict graph (same key, at least one write, ordered by per-AC
// local order) over committed transactions and checks it is acyclic. When
// global_seq stamps are present also checks every edge points from lower to
// higher seq.
SerialCheckResult check_serializable(const std::vector<HistoryRecord>& records);

// ---------------------------------------------------------------------------
// Lock-stream join (demonstration of CC as a standing join between a lock
// request stream and the lock-state stream; not used by the kernel's CC).
// ---------------------------------------------------------------------------

enum class LockMode : int8_t { S = 0, X = 1 };

struct LockRequest {
  uint64_t txn = 0;
  uint64_t item = 0;
  LockMode mode = LockMode::S;
  bool release = false;
};

enum class LockOutcome : int8_t { Granted = 0, Queued = 1, Released = 2 };

struct LockDecision {
  uint64_t txn = 0;
  uint64_t item = 0;
  LockOutcome outcome = LockOutcome::Granted;
};

class LockStreamJoin {
 public:
  // Feed one request; emits the decision for it plus any queued requests a
  // release unblocked, in FIFO order.
  std::vector<LockDecision> process(const LockRequest& req);

 private:
  struct Entry {
    std::vector<std::pair<uint64_t, LockMode>> holders;
    std::vector<std::pair<uint64_t, LockMode>> waiters;  // FIFO
  };
  bool compatible(const Entry& e, uint64_t txn, LockMode m) const;
  std::map<uint64_t, Entry> items_;
};

}  // namespace anydb
