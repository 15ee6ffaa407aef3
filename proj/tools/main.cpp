// CLI: `run` executes a phased benchmark config and writes the metrics CSV;
// `verify` replays an execution trace through the serializability checker.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "anydb/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_path, int64_t seed,
            const std::string& profile, int repeat, const std::string& trace_path) {
  anydb::RunConfig cfg = anydb::parse_config_file(config_path);
  if (seed >= 0) cfg.seed = uint64_t(seed);
  if (!profile.empty()) cfg.profile = profile;
  if (repeat > 0) cfg.repeat = repeat;
  if (cfg.profile != "test" && cfg.profile != "bench")
    anydb::throw_db(anydb::Err::BadConfig, "profile must be test or bench");
  if (!trace_path.empty()) cfg.tracing = true;

  anydb::Bench bench(cfg);
  std::vector<anydb::PhaseMetrics> rows = bench.run_all();
  std::string csv = anydb::metrics_csv(rows);

  if (!trace_path.empty()) {
    std::ofstream tf(trace_path);
    if (!tf) anydb::throw_db(anydb::Err::BadTrace, "cannot write " + trace_path);
    tf << "txn,seq,op,kind,table,key,ac,local_order\n";
    for (const anydb::HistoryRecord& r : bench.collect_trace()) tf << trace_line(r) << "\n";
  }

  std::ofstream out(out_path);
  if (!out) anydb::throw_db(anydb::Err::BadConfig, "cannot write " + out_path);
  out << csv;
  std::cout << csv;
  return 0;
}

int cmd_verify(const std::string& trace_path) {
  std::ifstream in(trace_path);
  if (!in) anydb::throw_db(anydb::Err::BadTrace, "cannot open " + trace_path);
  std::vector<anydb::HistoryRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("txn,", 0) == 0) continue;  // header
    records.push_back(anydb::parse_trace_line(line));
  }
  anydb::SerialCheckResult r = anydb::check_serializable(records);
  if (r.ok && r.seq_consistent) {
    std::cout << "ok: " << records.size() << " records, serializable\n";
    return 0;
  }
  std::cerr << "violation: " << r.detail << "\n";
  if (!r.cycle.empty()) {
    std::cerr << "cycle:";
    for (uint64_t t : r.cycle) std::cerr << " " << t;
    std::cerr << "\n";
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-routed database kernel benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a phased benchmark config");
  std::string config_path, out_path = "metrics.csv", profile, trace_out;
  int64_t seed = -1;
  int repeat = 0;
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "output CSV path");
  run->add_option("--seed", seed, "RNG seed override");
  run->add_option("--profile", profile, "test|bench");
  run->add_option("--repeat", repeat, "repetitions per phase");
  run->add_option("--trace-out", trace_out, "write the execution trace here (enables tracing)");

  auto* verify = app.add_subcommand("verify", "check a trace for serializability");
  std::string trace_path;
  verify->add_option("--trace", trace_path, "trace file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_path, seed, profile, repeat, trace_out);
    return cmd_verify(trace_path);
  } catch (const anydb::DbException& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
