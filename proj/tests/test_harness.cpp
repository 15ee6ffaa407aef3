#include "anydb/harness.hpp"

#include <set>
#include <string>
#include <vector>

#include "doctest.h"

using namespace anydb;

namespace {

LoaderConfig gen_cfg() {
  LoaderConfig l;
  l.warehouses = 4;
  l.districts_per_warehouse = 2;
  l.customers_per_district = 30;
  l.orders_per_district = 10;
  l.items = 50;
  l.seed = 5;
  return l;
}

}  // namespace

TEST_CASE("order id allocation continues per district after the loaded block") {
  OrderIdAlloc oids(2, 3, 20);
  CHECK(oids.take(0, 1) == 21);
  CHECK(oids.take(0, 1) == 22);
  CHECK(oids.take(1, 3) == 21);  // counters are independent
  CHECK(oids.take(0, 2) == 21);
  CHECK(oids.take(0, 1) == 23);
}

TEST_CASE("full skew homes every transaction on warehouse zero") {
  Dataset ds = load_dataset(gen_cfg());
  OrderIdAlloc oids(4, 2, 10);
  Rng rng(1);
  int payments = 0, neworders = 0;
  for (uint64_t i = 1; i <= 1000; i++) {
    TxnParams p = gen_txn(rng, ds, 1.0, 60, oids, i);
    CHECK(p.w == 0);
    REQUIRE(p.d >= 1);
    REQUIRE(p.d <= 2);
    if (p.kind == TxnKind::Payment) {
      payments++;
      // customer lives on the home warehouse, always
      CHECK(p.c_w == p.w);
      CHECK(p.c_d == p.d);
    } else {
      neworders++;
    }
  }
  CHECK(payments > 0);
  CHECK(neworders > 0);
}

TEST_CASE("zero skew spreads homes uniformly over the warehouses") {
  Dataset ds = load_dataset(gen_cfg());
  OrderIdAlloc oids(4, 2, 10);
  Rng rng(2);
  std::vector<int> count(4, 0);
  for (uint64_t i = 1; i <= 10000; i++) {
    TxnParams p = gen_txn(rng, ds, 0.0, 60, oids, i);
    REQUIRE(p.w >= 0);
    REQUIRE(p.w < 4);
    count[size_t(p.w)]++;
  }
  for (int w = 0; w < 4; w++) {
    // binomial(10000, 1/4): mean 2500, sigma ~43; allow 3 sigma
    CHECK(count[size_t(w)] >= 2370);
    CHECK(count[size_t(w)] <= 2630);
  }
}

TEST_CASE("mix percentage is exact at both extremes") {
  Dataset ds = load_dataset(gen_cfg());
  OrderIdAlloc oids(4, 2, 10);

  Rng pay_rng(3);
  for (uint64_t i = 1; i <= 500; i++) {
    TxnParams p = gen_txn(pay_rng, ds, 0.3, 100, oids, i);
    REQUIRE(p.kind == TxnKind::Payment);
    CHECK(p.amount >= 100);
    if (p.by_name) {
      // anchored on a loaded customer: the code must exist in that district
      const auto& statics = *ds.partitions[size_t(p.c_w)].cust_statics[size_t(p.c_d) - 1];
      bool found = false;
      for (const CustStatic& s : statics)
        if (s.c_last == p.c_last) found = true;
      CHECK(found);
    } else {
      CHECK(p.c_id >= 1);
      CHECK(p.c_id <= 30);
    }
  }

  Rng no_rng(4);
  std::vector<int64_t> next_oid(4 * 2, 11);  // loader created orders 1..10
  for (uint64_t i = 1; i <= 500; i++) {
    TxnParams p = gen_txn(no_rng, ds, 0.3, 0, oids, i);
    REQUIRE(p.kind == TxnKind::NewOrder);
    REQUIRE(p.items.size() >= 5);
    REQUIRE(p.items.size() <= 15);
    for (int j = 0; j < p.items.size(); j++) {
      CHECK(p.items[j].i_id >= 1);
      CHECK(p.items[j].i_id <= 50);
      CHECK(p.items[j].qty >= 1);
      CHECK(p.items[j].qty <= 10);
    }
    int64_t& expect = next_oid[size_t(p.w) * 2 + size_t(p.d) - 1];
    CHECK(p.o_id == expect);
    expect++;
  }
}

TEST_CASE("baseline block keeps the whole transaction on the home loop") {
  auto prog = payment_program(0, 1, 0, 1, true, 444, 900, 2);
  const AcId home = 3, driver = 9;
  const TimePoint admit = Clock::now();
  auto events = baseline_home_block(prog, 11, home, driver, admit);
  REQUIRE(events.size() == 7);
  for (size_t i = 0; i + 1 < events.size(); i++) {
    CHECK(events[i].origin == home);
    CHECK(events[i].released_at == admit);
  }
  CHECK(events.back().origin == driver);

  // the select's value hands off through one local self-addressed stream
  StreamId sid{11, home, 2};
  REQUIRE(events[2].output.sid == sid);
  REQUIRE(events[2].output.targets.size() == 1);
  CHECK(events[2].output.targets[0] == home);
  for (size_t consumer : {size_t(3), size_t(4), size_t(5)}) {
    REQUIRE(events[consumer].required_streams.size() == 1);
    CHECK(events[consumer].required_streams[0] == sid);
  }
  CHECK_FALSE(events[3].release_streams);
  CHECK_FALSE(events[4].release_streams);
  CHECK(events[5].release_streams);  // last consumer frees the buffer
}

TEST_CASE("config text round trips every key") {
  const std::string text =
      "# dataset shape\n"
      "warehouses 3\n"
      "districts 2\n"
      "customers 40\n"
      "orders 12\n"
      "items 25\n"
      "seed 99\n"
      "profile bench\n"
      "ac_count 5\n"
      "olap_acs 2\n"
      "queue_capacity 512\n"
      "injected_latency_us 7\n"
      "pin_to_cores on\n"
      "driver_shards 2\n"
      "window 64\n"
      "burst 16\n"
      "repeat 4\n"
      "tracing true\n"
      "\n"
      "phase name=warm policy=shared_nothing txns=500 payment_pct=70 "
      "neworder_pct=30 skew=0.25\n"
      "phase name=hot policy=streaming_cc duration_ms=200 payment_pct=40 "
      "skew=1.0 olap=shared olap_interval_ms=50 olap_compile_ms=3 "
      "olap_beaming=build add_acs=2 add_olap_acs=1 injected_latency_us=12\n";
  RunConfig cfg = parse_config_text(text);
  CHECK(cfg.warehouses == 3);
  CHECK(cfg.districts == 2);
  CHECK(cfg.customers == 40);
  CHECK(cfg.orders == 12);
  CHECK(cfg.items == 25);
  CHECK(cfg.seed == 99);
  CHECK(cfg.profile == "bench");
  CHECK(cfg.ac_count == 5);
  CHECK(cfg.olap_acs == 2);
  CHECK(cfg.queue_capacity == 512);
  CHECK(cfg.injected_latency_us == 7);
  CHECK(cfg.pin_to_cores);
  CHECK(cfg.driver_shards == 2);
  CHECK(cfg.window == 64);
  CHECK(cfg.burst == 16);
  CHECK(cfg.repeat == 4);
  CHECK(cfg.tracing);

  REQUIRE(cfg.phases.size() == 2);
  const PhaseConfig& a = cfg.phases[0];
  CHECK(a.name == "warm");
  CHECK(a.policy == "shared_nothing");
  CHECK(a.txns == 500);
  CHECK(a.duration_ms == 0);
  CHECK(a.payment_pct == 70);
  CHECK(a.skew == doctest::Approx(0.25));
  CHECK_FALSE(a.olap);
  CHECK(a.injected_latency_us == -1);

  const PhaseConfig& b = cfg.phases[1];
  CHECK(b.policy == "streaming_cc");
  CHECK(b.duration_ms == 200);
  CHECK(b.olap);
  CHECK(b.olap_placement == "shared_nothing");
  CHECK(b.olap_beaming == "build");
  CHECK(b.olap_interval_ms == 50);
  CHECK(b.olap_compile_ms == 3);
  CHECK(b.add_acs == 2);
  CHECK(b.add_olap_acs == 1);
  CHECK(b.injected_latency_us == 12);

  RunConfig dj = parse_config_text("phase name=q olap=disjoint\n");
  REQUIRE(dj.phases.size() == 1);
  CHECK(dj.phases[0].olap);
  CHECK(dj.phases[0].olap_placement == "disaggregated");
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS((void)parse_config_text("wharehouses 3\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("warehouses\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("warehouses 3 4\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("warehouses three\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("warehouses 0\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("profile fast\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("repeat 0\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase policy=fancy\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase olap=blue\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase olap_beaming=zzz\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase skew=1.5\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase txns=-5\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase speed=9\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_text("phase payment_pct=130\n"), DbException);
  CHECK_THROWS_AS((void)parse_config_file("/no/such/file.cfg"), DbException);
  try {
    (void)parse_config_text("phase payment_pct=70 neworder_pct=40\n");
    FAIL("percentages summing past 100 must be rejected");
  } catch (const DbException& e) {
    CHECK(e.code == Err::BadConfig);
  }
}

TEST_CASE("metrics csv emits the exact column contract") {
  PhaseMetrics m;
  m.phase = "p0";
  m.policy = "shared_nothing";
  m.throughput = 1234.56;
  m.p50_us = 10;
  m.p99_us = 20;
  m.olap_us = 0;
  m.acs_used = 4;
  m.throughput_per_ac = 308.64;
  const std::string expect =
      "phase,policy,throughput,p50_us,p99_us,olap_us,acs_used,throughput_per_ac\n"
      "p0,shared_nothing,1234.6,10,20,0,4,308.6\n";
  CHECK(metrics_csv({m}) == expect);
  CHECK(metrics_csv({}) ==
        "phase,policy,throughput,p50_us,p99_us,olap_us,acs_used,throughput_per_ac\n");
}

TEST_CASE("comparing a run against itself yields unit ratios") {
  PhaseMetrics a;
  a.phase = "p0";
  a.policy = "intra_precise";
  a.throughput = 500.0;
  a.throughput_per_ac = 250.0;
  a.p99_us = 90;
  PhaseMetrics b = a;
  b.phase = "p1";
  b.policy = "intra_naive";
  b.throughput = 1000.0;
  b.throughput_per_ac = 125.0;
  b.p99_us = 45;
  const std::string expect =
      "phase,policy_a,policy_b,throughput_ratio,per_ac_ratio,p99_ratio\n"
      "p0,intra_precise,intra_precise,1.000,1.000,1.000\n"
      "p1,intra_naive,intra_naive,1.000,1.000,1.000\n";
  CHECK(compare_report({a, b}, {a, b}) == expect);

  const std::string cross = compare_report({a}, {b});
  CHECK(cross.find("p0,intra_precise,intra_naive,0.500,2.000,2.000\n") != std::string::npos);
  CHECK_THROWS_AS((void)compare_report({a}, {a, b}), DbException);
}

TEST_CASE("an empty phase runs and reports zero throughput") {
  RunConfig cfg;
  cfg.warehouses = 2;
  cfg.districts = 2;
  cfg.customers = 30;
  cfg.orders = 10;
  cfg.items = 20;
  cfg.seed = 9;
  cfg.ac_count = 2;
  cfg.olap_acs = 1;
  cfg.driver_shards = 1;
  cfg.repeat = 1;
  PhaseConfig p;
  p.name = "empty";
  p.txns = 0;
  cfg.phases.push_back(p);
  auto rows = run_phases(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].committed == 0);
  CHECK(rows[0].throughput == 0);
  CHECK(rows[0].p50_us == 0);
  CHECK(rows[0].p99_us == 0);
}

TEST_CASE("small runs pass their own accounting under mode switches") {
  RunConfig cfg;
  cfg.warehouses = 2;
  cfg.districts = 2;
  cfg.customers = 30;
  cfg.orders = 10;
  cfg.items = 20;
  cfg.seed = 13;
  cfg.ac_count = 3;
  cfg.olap_acs = 1;
  cfg.driver_shards = 1;
  cfg.repeat = 1;

  PhaseConfig p0;
  p0.name = "routed";
  p0.policy = "shared_nothing";
  p0.txns = 250;
  p0.skew = 0.2;
  cfg.phases.push_back(p0);

  PhaseConfig p1;  // flips storage to the grouped layout
  p1.name = "ordered";
  p1.policy = "streaming_cc";
  p1.txns = 150;
  p1.skew = 1.0;
  cfg.phases.push_back(p1);

  PhaseConfig p2;  // flips back, runs without the routing layer, time bound
  p2.name = "dedicated";
  p2.policy = "baseline";
  p2.duration_ms = 40;
  cfg.phases.push_back(p2);

  Bench bench(cfg);
  auto rows = bench.run_all();
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].committed == 250);
  CHECK(rows[1].committed == 150);
  CHECK(rows[2].committed > 0);
  for (const PhaseMetrics& m : rows) {
    if (m.committed == 0) continue;
    CHECK(m.throughput > 0);
    CHECK(m.acs_used >= 1);
    CHECK(m.p50_us <= m.p99_us);
  }
  CHECK(bench.committed_total() == uint64_t(250 + 150) + uint64_t(rows[2].committed));
}

TEST_CASE("same seed twice produces the same final state and matches replay") {
  RunConfig cfg;
  cfg.warehouses = 2;
  cfg.districts = 2;
  cfg.customers = 30;
  cfg.orders = 10;
  cfg.items = 20;
  cfg.seed = 77;
  cfg.ac_count = 3;
  cfg.olap_acs = 1;
  cfg.driver_shards = 1;
  cfg.repeat = 1;
  cfg.tracing = true;
  PhaseConfig p;
  p.name = "det";
  p.policy = "shared_nothing";
  p.txns = 120;
  p.skew = 0.3;
  cfg.phases.push_back(p);

  LoaderConfig l;
  l.warehouses = cfg.warehouses;
  l.districts_per_warehouse = cfg.districts;
  l.customers_per_district = cfg.customers;
  l.orders_per_district = cfg.orders;
  l.items = cfg.items;
  l.seed = cfg.seed;

  uint64_t hash_a = 0, hash_b = 0;
  {
    Bench bench(cfg);
    (void)bench.run_all();
    REQUIRE(bench.admitted_log().size() == 120);
    hash_a = state_hash(bench.dataset());
    CHECK(replay_state_hash(l, bench.admitted_log()) == hash_a);
  }
  {
    Bench bench(cfg);
    (void)bench.run_all();
    hash_b = state_hash(bench.dataset());
  }
  CHECK(hash_a == hash_b);
  CHECK(hash_a != state_hash(load_dataset(l)));  // the run did change the data
}
