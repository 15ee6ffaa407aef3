#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "anydb/harness.hpp"

namespace anydb {

namespace {

[[noreturn]] void bad(const std::string& what) { throw_db(Err::BadConfig, what); }

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) bad(key + ": trailing junk in '" + v + "'");
    return n;
  } catch (const DbException&) {
    throw;
  } catch (const std::exception&) {
    bad(key + ": not an integer: '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double n = std::stod(v, &pos);
    if (pos != v.size()) bad(key + ": trailing junk in '" + v + "'");
    return n;
  } catch (const DbException&) {
    throw;
  } catch (const std::exception&) {
    bad(key + ": not a number: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  bad(key + ": expected on/off, got '" + v + "'");
}

int pct(const std::string& key, const std::string& v) {
  int64_t n = to_int(key, v);
  if (n < 0 || n > 100) bad(key + ": must be 0..100");
  return int(n);
}

// `phase k1=v1 k2=v2 ...`
PhaseConfig parse_phase(const std::string& rest, const RunConfig& run) {
  PhaseConfig p;
  p.injected_latency_us = -1;
  std::istringstream in(rest);
  std::string tok;
  int neworder_pct = -1;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) bad("phase: expected key=value, got '" + tok + "'");
    std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "name") p.name = v;
    else if (k == "policy") p.policy = v;
    else if (k == "txns") p.txns = to_int(k, v);
    else if (k == "duration_ms") p.duration_ms = to_int(k, v);
    else if (k == "payment_pct") p.payment_pct = pct(k, v);
    else if (k == "neworder_pct") neworder_pct = pct(k, v);
    else if (k == "skew") p.skew = to_double(k, v);
    else if (k == "olap") {
      if (v == "off") p.olap = false;
      else if (v == "disjoint") { p.olap = true; p.olap_placement = "disaggregated"; }
      else if (v == "shared") { p.olap = true; p.olap_placement = "shared_nothing"; }
      else bad("olap: expected off/disjoint/shared, got '" + v + "'");
    } else if (k == "olap_interval_ms") p.olap_interval_ms = int(to_int(k, v));
    else if (k == "olap_compile_ms") p.olap_compile_ms = int(to_int(k, v));
    else if (k == "olap_beaming") p.olap_beaming = v;
    else if (k == "add_acs") p.add_acs = int(to_int(k, v));
    else if (k == "add_olap_acs") p.add_olap_acs = int(to_int(k, v));
    else if (k == "injected_latency_us") p.injected_latency_us = int(to_int(k, v));
    else bad("phase: unknown key '" + k + "'");
  }
  if (neworder_pct >= 0 && neworder_pct != 100 - p.payment_pct)
    bad("phase " + p.name + ": payment_pct + neworder_pct must be 100");
  if (p.policy != "baseline") policy_from_name(p.policy);  // validates
  beaming_from_name(p.olap_beaming);
  placement_from_name(p.olap_placement);
  if (p.skew < 0.0 || p.skew > 1.0) bad("phase " + p.name + ": skew must be in [0,1]");
  if (p.txns < 0 || p.duration_ms < 0)
    bad("phase " + p.name + ": txns/duration_ms must be non-negative");
  (void)run;
  return p;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "phase") {
      std::string rest;
      std::getline(ls, rest);
      cfg.phases.push_back(parse_phase(rest, cfg));
      continue;
    }
    std::string v;
    if (!(ls >> v)) bad(key + ": missing value (line " + std::to_string(lineno) + ")");
    std::string extra;
    if (ls >> extra) bad(key + ": unexpected trailing token '" + extra + "'");
    if (key == "warehouses") cfg.warehouses = int(to_int(key, v));
    else if (key == "districts") cfg.districts = int(to_int(key, v));
    else if (key == "customers") cfg.customers = int(to_int(key, v));
    else if (key == "orders") cfg.orders = int(to_int(key, v));
    else if (key == "items") cfg.items = int(to_int(key, v));
    else if (key == "seed") cfg.seed = uint64_t(to_int(key, v));
    else if (key == "profile") cfg.profile = v;
    else if (key == "ac_count") cfg.ac_count = int(to_int(key, v));
    else if (key == "olap_acs") cfg.olap_acs = int(to_int(key, v));
    else if (key == "queue_capacity") cfg.queue_capacity = int(to_int(key, v));
    else if (key == "injected_latency_us") cfg.injected_latency_us = int(to_int(key, v));
    else if (key == "pin_to_cores") cfg.pin_to_cores = to_bool(key, v);
    else if (key == "driver_shards") cfg.driver_shards = int(to_int(key, v));
    else if (key == "window") cfg.window = int(to_int(key, v));
    else if (key == "burst") cfg.burst = int(to_int(key, v));
    else if (key == "repeat") cfg.repeat = int(to_int(key, v));
    else if (key == "tracing") cfg.tracing = to_bool(key, v);
    else bad("unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
  }
  if (cfg.profile != "test" && cfg.profile != "bench")
    bad("profile: expected test or bench");
  if (cfg.warehouses < 1 || cfg.districts < 1 || cfg.customers < 1 || cfg.orders < 1 ||
      cfg.items < 1)
    bad("dataset dimensions must be positive");
  if (cfg.ac_count < 1 || cfg.driver_shards < 1 || cfg.window < 1 || cfg.burst < 1 ||
      cfg.repeat < 1 || cfg.queue_capacity < 1)
    bad("runtime dimensions must be positive");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) bad("cannot open config file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string metrics_csv(const std::vector<PhaseMetrics>& rows) {
  std::string out = "phase,policy,throughput,p50_us,p99_us,olap_us,acs_used,throughput_per_ac\n";
  char buf[256];
  for (const PhaseMetrics& m : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.1f,%" PRId64 ",%" PRId64 ",%" PRId64 ",%d,%.1f\n",
                  m.phase.c_str(), m.policy.c_str(), m.throughput, m.p50_us, m.p99_us,
                  m.olap_us, m.acs_used, m.throughput_per_ac);
    out += buf;
  }
  return out;
}

std::string compare_report(const std::vector<PhaseMetrics>& ours,
                           const std::vector<PhaseMetrics>& base) {
  if (ours.size() != base.size())
    throw_db(Err::BadConfig, "compare: phase lists differ in length");
  std::string out =
      "phase,policy_a,policy_b,throughput_ratio,per_ac_ratio,p99_ratio\n";
  char buf[256];
  for (size_t i = 0; i < ours.size(); i++) {
    const PhaseMetrics& a = ours[i];
    const PhaseMetrics& b = base[i];
    auto ratio = [](double x, double y) { return y > 0 ? x / y : 0.0; };
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.3f,%.3f,%.3f\n", a.phase.c_str(),
                  a.policy.c_str(), b.policy.c_str(), ratio(a.throughput, b.throughput),
                  ratio(a.throughput_per_ac, b.throughput_per_ac),
                  ratio(double(a.p99_us), double(b.p99_us)));
    out += buf;
  }
  return out;
}

}  // namespace anydb
