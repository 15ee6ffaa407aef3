// Partitioned storage: warehouse-partitioned TPC-C tables, additive updates,
// scans and beams. Every money column is integer cents.
#pragma once

#include <map>
#include <memory>
#include <vector>

#include "anydb/event.hpp"

namespace anydb {

// Table groups: the ownership granularity. A warehouse-mode storage AC owns
// every group of one partition; a grouped-mode (streaming) storage AC owns one
// group across all partitions.
enum class TableGroup : int8_t {
  Wh = 0,
  Dist,
  Cust,
  Hist,
  Order,  // ORDERS + NEW_ORDER + ORDER_LINE
  Stock,  // STOCK + ITEM replica
};
inline constexpr int kGroupCount = 6;

TableGroup table_group(TableId t);

// Immutable per-customer columns, one block per district, shared freely
// (scans and by-name resolution never touch mutable state).
struct CustStatic {
  int32_t c_id = 0;
  int32_t c_last = 0;
  int32_t c_state = 0;
};
using CustStaticsPtr = std::shared_ptr<const std::vector<CustStatic>>;

struct Partition {
  int32_t partition_id = 0;  // warehouse id

  std::map<Key, Row> warehouse;
  std::map<Key, Row> district;
  std::map<Key, Row> customer;
  std::vector<Row> history;  // append store, no primary key
  std::map<Key, Row> orders;
  std::map<Key, Row> new_order;
  std::map<Key, Row> order_line;
  std::map<Key, Row> item;  // replica, immutable after load
  std::map<Key, Row> stock;

  std::vector<CustStaticsPtr> cust_statics;  // index = district id - 1

  // Highest global_seq applied per table group (conflict class == this
  // partition); must never decrease.
  std::array<int64_t, kGroupCount> applied_seq{};

  std::map<Key, Row>& table(TableId t);
  const std::map<Key, Row>& table(TableId t) const;
};

struct Dataset {
  std::vector<Partition> partitions;  // index == warehouse id
  int districts_per_warehouse = 10;
  int customers_per_district = 0;
  int orders_per_district = 0;
  int items = 0;
};

struct LoaderConfig {
  int warehouses = 4;
  int districts_per_warehouse = 10;
  int customers_per_district = 300;
  int orders_per_district = 300;
  int items = 1000;
  double open_order_fraction = 0.30;  // most recent orders keep a NEW_ORDER row
  uint64_t seed = 42;
};

// Deterministic seeded load. ytd/balance/payment counters start at 0.
Dataset load_dataset(const LoaderConfig& cfg);

uint64_t state_hash(const Dataset& ds);

// Debug CSV dump, one file per table.
void dump_csv(const Dataset& ds, const std::string& dir);

// ---------------------------------------------------------------------------
// Storage operations. All take the owning partition; key/partition mismatch is
// a routing bug surfaced as WrongPartition.
// ---------------------------------------------------------------------------

struct ApplyResult {
  Ack ack;
  Key key = 0;         // resolved key (stream-keyed updates)
  int64_t written = 0; // fingerprint of the applied change, for traces
};

// Additive column deltas; `stock_dip` post-rule; asserts per-class ordering in
// streaming mode via applied_seq. `resolved_c` completes stream-keyed updates.
ApplyResult apply_update(Partition& p, const UpdateRecord& u, uint64_t global_seq,
                         int64_t resolved_c = -1);

ApplyResult apply_insert(Partition& p, const InsertRecord& ins, uint64_t global_seq,
                         int64_t resolved_c = -1);

// Single-row read; KeyNotFound when absent.
Row read_record(const Partition& p, const ReadRecord& r);

// Matching customers of (w,d) with the given last name, ordered by c_id,
// full rows (statics merged with current mutable columns).
std::vector<Row> select_customer_by_last_name(const Partition& p, int32_t w, int32_t d,
                                              int32_t last_name);

// Median-position pick: index ceil(n/2)-1 of the c_id-ordered match list.
// Returns -1 when no customer matches.
int64_t median_customer_by_last_name(const Partition& p, int32_t w, int32_t d, int32_t last_name);

// Filtered, projected scan in stable storage order. OpenOrders folds the
// NEW_ORDER semijoin into the ORDERS scan.
std::vector<Row> scan_filter_source(const Partition& p, ScanSource src, TableId table,
                                    const Predicate& pred, const Projection& proj);

}  // namespace anydb
