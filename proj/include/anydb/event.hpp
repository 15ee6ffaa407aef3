// Event and data stream model: operation descriptors, batch framing, stream ids.
//
// Events are self-contained value objects; any cross-operation data dependency
// travels as a data stream, never as shared mutable state.
#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "anydb/types.hpp"

namespace anydb {

struct TransactionProgram;  // txn.hpp

// ---------------------------------------------------------------------------
// Streams
// ---------------------------------------------------------------------------

struct StreamId {
  uint64_t query_or_txn_id = 0;
  AcId origin_ac = kNoAc;
  int32_t tag = 0;

  bool operator==(const StreamId& o) const {
    return query_or_txn_id == o.query_or_txn_id && origin_ac == o.origin_ac && tag == o.tag;
  }
  bool valid() const { return query_or_txn_id != 0 || origin_ac != kNoAc || tag != 0; }
};

struct StreamIdHash {
  size_t operator()(const StreamId& s) const {
    uint64_t h = fnv1a_init();
    h = fnv1a_step(h, s.query_or_txn_id);
    h = fnv1a_step(h, (uint64_t(uint32_t(s.origin_ac)) << 32) | uint32_t(s.tag));
    return size_t(h);
  }
};

using RowsPtr = std::shared_ptr<const std::vector<Row>>;

// One framed chunk of a data stream. batch_seq is contiguous from 0 per
// stream; exactly one batch carries last=true; rows may be empty only on the
// last batch.
struct DataBatch {
  StreamId sid;
  uint32_t batch_seq = 0;
  bool last = false;
  RowsPtr rows;
};

inline constexpr int kDefaultBatchCapacity = 1024;

// ---------------------------------------------------------------------------
// Scan predicates and projections. Every predicate used here is a half-open
// range on one column, which covers equality, date cutoffs and
// prefix-of-state tests over the integer encodings.
// ---------------------------------------------------------------------------

struct Predicate {
  int8_t col = -1;  // -1: match all
  int64_t lo = INT64_MIN;
  int64_t hi = INT64_MAX;  // exclusive

  bool matches(const Row& r) const {
    if (col < 0) return true;
    int64_t v = r[col];
    return v >= lo && v < hi;
  }
  static Predicate all() { return Predicate{}; }
  static Predicate range(int c, int64_t lo, int64_t hi) { return Predicate{int8_t(c), lo, hi}; }
  static Predicate eq(int c, int64_t v) { return Predicate{int8_t(c), v, v + 1}; }
  // c_state begins with the given letter.
  static Predicate state_prefix(char letter) {
    int64_t base = int64_t(letter - 'A') * 26;
    return Predicate{int8_t(col::cust::c_state), base, base + 26};
  }
};

using Projection = InlineVec<int8_t, kMaxCols>;  // empty = all columns

inline Row project_row(const Row& r, const Projection& p) {
  if (p.empty()) return r;
  Row out;
  for (int8_t c : p) out.v[out.n++] = r[c];
  return out;
}

// Scan sources: a plain table, or the open-order fold (ORDERS rows that still
// have a NEW_ORDER entry).
enum class ScanSource : int8_t { Table = 0, OpenOrders = 1 };

// ---------------------------------------------------------------------------
// Operation kinds
// ---------------------------------------------------------------------------

enum class AckStatus : int8_t { Ok = 0, Failed = 1 };

struct ColDelta {
  int8_t col = 0;
  int64_t add = 0;
};

// Additive update of one record. When `key_from_stream` is set the record id
// (customer) arrives on the event's required stream and the key is completed
// with (key_w, key_d) at execution time. `stock_dip` applies the TPC-C
// replenish rule after the delta: if the quantity fell below 10, add 91.
struct UpdateRecord {
  TableId table;
  Key key = 0;
  bool key_from_stream = false;
  bool stock_dip = false;
  int32_t key_w = 0, key_d = 0;
  InlineVec<ColDelta, 3> deltas;
};

// Insert of a fully materialized row. `cid_col` >= 0 marks a column to fill
// from the single-row required stream (history rows of by-name payments).
// `price_qty_col` >= 0 marks ol_amount to compute as qty * i_price from the
// item replica at the executing AC.
struct InsertRecord {
  TableId table;
  Key key = 0;
  bool keyless = false;  // HISTORY is an append store
  bool key_from_stream = false;
  int32_t key_w = 0, key_d = 0;
  int8_t cid_col = -1;
  int8_t price_amount_col = -1;  // fill row[col] = row[qty_col] * i_price
  int8_t price_item_col = -1;
  int8_t price_qty_col = -1;
  Row row;
};

struct ReadRecord {
  TableId table;
  Key key = 0;
};

// The payment scan leg: filter the district's customers by last name, order
// by c_id, resolve the median-position customer (index ceil(n/2)-1) and emit
// its c_id as a single-row stream to the dependent ops.
struct SelectCustomerByLastName {
  int32_t w = 0, d = 0;
  int32_t last_name = 0;
};

struct ScanFilter {
  ScanSource source = ScanSource::Table;
  TableId table = TableId::Warehouse;
  Predicate pred;
  Projection proj;
};

// Key extraction for joins: key = pack(row[col_w], row[col_d], row[col_x]).
struct JoinKeySpec {
  int8_t col_w = 0, col_d = 0, col_x = 0;
};

struct JoinBuild {
  int32_t join_id = 0;
  JoinKeySpec key;
};

struct JoinProbe {
  int32_t join_id = 0;
  JoinKeySpec key;
  // Output = probe row columns listed in keep_probe + build row columns in
  // keep_build, in that order.
  Projection keep_probe;
  Projection keep_build;
  // Probe-side input streams, consumed incrementally as batches arrive (they
  // do not gate the event; the build-done marker in required_streams does).
  InlineVec<StreamId, 8> inputs;
};

// Grouped sum: group key = pack(w,d,x) plus the extra grouping column kept
// alongside; emits rows [x, w, d, extra, sum] sorted by (sum desc, extra asc,
// w asc, d asc, x asc).
struct AggregateOp {
  int8_t group_col_w = 0, group_col_d = 0, group_col_x = 0;
  int8_t group_col_extra = -1;
  int8_t sum_col = 0;
  InlineVec<StreamId, 8> inputs;  // consumed incrementally, like JoinProbe
};

struct CompileQuery {
  int32_t compile_ms = 0;
};

struct Commit {
  int32_t expected_ack_count = 0;
  uint64_t expected_mask = 0;  // bit per acked op_index (programs stay < 64 ops)
};

struct Ack {
  int32_t target_op_index = 0;
  AckStatus status = AckStatus::Ok;
  // A done-notification: the tracker at the commit target completed and tells
  // the admitting driver; `released_at` on the event carries the commit time.
  bool done = false;
};

// Issued at admission: start streaming the scan result toward `target` so the
// data is already resident when the consuming operator event executes.
struct BeamInit {
  ScanSource source = ScanSource::Table;
  TableId table = TableId::Warehouse;
  Predicate pred;
  Projection proj;
  AcId target = kNoAc;
  StreamId stream;
};

using OpKind = std::variant<ReadRecord, UpdateRecord, InsertRecord, SelectCustomerByLastName,
                            ScanFilter, JoinBuild, JoinProbe, AggregateOp, CompileQuery, Commit,
                            Ack, BeamInit>;

const char* op_kind_name(const OpKind& k);
bool is_write_op(const OpKind& k);
bool is_storage_op(const OpKind& k);

// ---------------------------------------------------------------------------
// Event
// ---------------------------------------------------------------------------

struct OutputRoute {
  StreamId sid;
  InlineVec<AcId, 4> targets;  // multicast: every consumer's component
  bool valid() const { return !targets.empty(); }
};

struct Event {
  uint64_t event_id = 0;
  uint64_t txn_or_query_id = 0;
  int32_t op_index = 0;
  int32_t conflict_class = kNoClass;
  uint64_t global_seq = 0;  // 0 = unset (non-streaming policies)
  uint64_t class_seq = 0;   // dense per (target AC, class); reorder release order
  AcId origin = kNoAc;      // where acks/results go back to
  // Streams that must be complete before this event may run (gate). Sized for
  // the widest fan-in: one scan stream per owning storage component.
  InlineVec<StreamId, 8> required_streams;
  OutputRoute output;
  // The last local consumer of its required streams carries this flag so the
  // AC can drop the buffered rows afterwards (set during routing).
  bool release_streams = false;
  TimePoint released_at{};  // stamped when handed to the runtime
  OpKind op;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Expand a transaction program into one event per op, op_index in program
// order, commit last. Routing fields (streams, targets, seq) stay unset here.
// Throws EmptyProgram / MalformedProgram.
std::vector<Event> make_txn_events(const TransactionProgram& prog, uint64_t txn_id);

// Frame rows into batches of at most `capacity` rows, batch_seq from 0,
// exactly one last=true (an empty stream is one empty last batch).
std::vector<DataBatch> batch_split(std::vector<Row> rows, int capacity, StreamId sid);

// Structural validation of one event; nullopt = ok, otherwise a description.
// validate_txn_events adds the cross-event checks: the commit must be the
// unique final sink and expected_ack_count must equal the number of writes.
std::optional<std::string> validate_event(const Event& e);
std::optional<std::string> validate_txn_events(const std::vector<Event>& events);

}  // namespace anydb
