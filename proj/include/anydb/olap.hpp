// The analytical pipeline: customers filtered by state prefix joined against
// open orders past an entry cutoff, revenue summed per order from its lines.
// Planned as events over the current topology with optional beaming; verified
// against a naive single-threaded reference.
#pragma once

#include <string>

#include "anydb/routing.hpp"

namespace anydb {

enum class BeamingLevel : int8_t {
  None = 0,       // operator events pull their scans after compile
  Build = 1,      // the join build side streams at admission
  BuildProbe = 2  // build and probe sides stream at admission
};

BeamingLevel beaming_from_name(const std::string& name);  // throws BadConfig
const char* beaming_name(BeamingLevel b);

// Where the operators run: a dedicated analytical pool, or on the storage
// components alongside the transactional work.
enum class QueryPlacement : int8_t { Disaggregated = 0, SharedNothing = 1 };

QueryPlacement placement_from_name(const std::string& name);
const char* placement_name(QueryPlacement p);

struct QueryDescriptor {
  char state_letter = 'A';
  int64_t entry_cutoff = 2007;  // keep open orders with o_entry_d >= cutoff
  int32_t compile_ms = 0;
  BeamingLevel beaming = BeamingLevel::None;
  QueryPlacement placement = QueryPlacement::Disaggregated;
};

// Stable operator labels inside one query (op_index of the events).
inline constexpr int32_t kOpCompile = 0;
inline constexpr int32_t kOpJoin1Build = 10;
inline constexpr int32_t kOpJoin1Probe = 11;
inline constexpr int32_t kOpJoin2Build = 12;
inline constexpr int32_t kOpJoin2Probe = 13;
inline constexpr int32_t kOpAggregate = 14;

struct QueryPlan {
  // Pushed at admission: beams plus the compile marker.
  std::vector<std::pair<AcId, std::vector<Event>>> at_admission;
  // Pushed once the compile window elapsed: scans, joins, the aggregate.
  std::vector<std::pair<AcId, std::vector<Event>>> at_compiled;
  StreamId result;  // the aggregate's output, delivered to the driver
};

QueryPlan plan_query(Topology& topo, const QueryDescriptor& q, uint64_t query_id, AcId driver);

// The same query evaluated naively against the dataset. Rows are
// [o_id, w, d, entry, revenue], sorted by (revenue desc, entry asc, w asc,
// d asc, o_id asc) — the aggregate's exact output contract.
std::vector<Row> ch_q3_reference(const Dataset& ds, char state_letter, int64_t entry_cutoff);

struct QueryTiming {
  int64_t total_us = 0;        // admission to result-complete
  int64_t build_phase_us = 0;  // first join build: event release to done
  int64_t probe_phase_us = 0;  // final probe: event release to sink close
  std::vector<Row> rows;
};

// Run one query end to end on an otherwise quiet topology, pumping the driver
// mailbox for the result. When `csv` is non-null, appends one line per phase:
// compile_ms,beaming,phase,duration_us.
QueryTiming run_beamed_query(Topology& topo, const QueryDescriptor& q, uint64_t query_id,
                             AcId driver, std::string* csv = nullptr);

}  // namespace anydb
