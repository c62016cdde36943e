// hiltsim: command-line front end for runs, batches, validation, replay,
// CSV export and the HTTP gateway.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hilt/batch.hpp"
#include "hilt/gateway.hpp"
#include "hilt/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

hilt::RunConfig load_profile(const std::string& path) {
  if (path.empty()) return {};
  return hilt::apply_overrides({}, json::parse(read_file(path)));
}

// A file, a directory of scenarios, a family name or a scenario id under the
// scenario root.
std::vector<hilt::ScenarioSpec> resolve_scenarios(const std::string& arg, const fs::path& root) {
  std::vector<hilt::ScenarioSpec> out;
  auto from_suite = [&](const fs::path& dir) {
    for (auto& e : hilt::load_suite(dir)) out.push_back(std::move(e.spec));
  };
  if (fs::is_regular_file(arg)) {
    out.push_back(hilt::load_scenario(arg));
  } else if (fs::is_directory(arg)) {
    from_suite(arg);
  } else if (fs::is_directory(root / arg)) {
    from_suite(root / arg);
  } else if (fs::is_directory(root)) {
    for (auto& e : hilt::load_suite(root)) {
      if (e.spec.scenario_id == arg) out.push_back(std::move(e.spec));
    }
  }
  if (out.empty()) throw std::runtime_error("no scenario matches '" + arg + "' (scenario root " + root.string() + ")");
  return out;
}

bool check_valid(const hilt::ScenarioSpec& s) {
  const auto v = hilt::validate(s);
  for (const auto& x : v) std::cerr << s.scenario_id << ": " << x.path << ": " << x.message << "\n";
  return v.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hilt simulation testbed"};
  app.require_subcommand(1);

  std::string scenario_root = env_or("HILT_SCENARIOS", "scenarios");
  std::string profile = env_or("HILT_PROFILE", "");
  app.add_option("--scenarios", scenario_root, "Scenario root directory (env HILT_SCENARIOS)")
      ->capture_default_str();
  app.add_option("--profile", profile, "Run configuration overrides, JSON (env HILT_PROFILE)");

  // run
  auto* run = app.add_subcommand("run", "Run one scenario in fast time");
  std::string run_scenario;
  std::uint64_t run_seed = 1;
  std::string run_log, run_metrics;
  run->add_option("scenario", run_scenario, "Scenario file or id")->required();
  run->add_option("--seed", run_seed, "Run seed")->capture_default_str();
  run->add_option("--log", run_log, "Write the JSONL event log here");
  run->add_option("--metrics", run_metrics, "Write run metrics JSON here (default: stdout)");

  // batch
  auto* batch = app.add_subcommand("batch", "Run N seeds per scenario with randomized visibility and SNR");
  std::vector<std::string> batch_targets;
  hilt::BatchOptions bopt;
  std::string batch_out;
  bool no_randomize = false;
  batch->add_option("targets", batch_targets, "Families, scenario ids, files or directories")->required();
  batch->add_option("-n,--runs", bopt.runs, "Runs per scenario")->capture_default_str();
  batch->add_option("--seed-base", bopt.seed_base, "First seed")->capture_default_str();
  batch->add_option("--out", batch_out, "Artifact directory");
  batch->add_option("--visibility-min", bopt.visibility_min_m, "Visibility range lower bound, m")->capture_default_str();
  batch->add_option("--visibility-max", bopt.visibility_max_m, "Visibility range upper bound, m")->capture_default_str();
  batch->add_option("--snr-min", bopt.snr_min_db, "SNR range lower bound, dB")->capture_default_str();
  batch->add_option("--snr-max", bopt.snr_max_db, "SNR range upper bound, dB")->capture_default_str();
  batch->add_flag("--no-randomize", no_randomize, "Keep each scenario's own environment");

  // validate
  auto* val = app.add_subcommand("validate", "Validate scenario files");
  std::vector<std::string> val_targets;
  val->add_option("targets", val_targets, "Files, directories, families or ids")->required();

  // replay
  auto* rep = app.add_subcommand("replay", "Re-simulate a logged run");
  std::string rep_log, rep_out;
  bool rep_check = false;
  rep->add_option("log", rep_log, "JSONL event log")->required();
  rep->add_option("--out", rep_out, "Write the replayed log here");
  rep->add_flag("--check", rep_check, "Fail unless the replay is byte-identical");

  // export-csv
  auto* csv = app.add_subcommand("export-csv", "Per-run CSV from a batch report");
  std::string csv_in, csv_out;
  csv->add_option("report", csv_in, "report.json from a batch")->required();
  csv->add_option("--out", csv_out, "Output file (default: stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "Start the HTTP gateway");
  std::string host = env_or("HILT_HOST", "127.0.0.1");
  int port = std::atoi(env_or("HILT_PORT", "8080").c_str());
  serve->add_option("--host", host, "Bind address (env HILT_HOST)")->capture_default_str();
  serve->add_option("--port", port, "Port (env HILT_PORT)")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto config = load_profile(profile);
      const auto specs = resolve_scenarios(run_scenario, scenario_root);
      if (specs.size() != 1) throw std::runtime_error("run takes exactly one scenario");
      if (!check_valid(specs[0])) return 2;
      std::string log_text;
      const auto r = hilt::run_scenario(specs[0], run_seed, config, {}, {}, {}, &log_text);
      if (!run_log.empty()) write_file(run_log, log_text);
      const std::string m = hilt::to_json(r.metrics).dump(2) + "\n";
      if (run_metrics.empty()) {
        std::cout << m;
      } else {
        write_file(run_metrics, m);
      }
      if (!r.finished) {
        std::cerr << "run failed: " << r.error << "\n";
        return 1;
      }
      return 0;
    }
    if (*batch) {
      bopt.config = load_profile(profile);  // before any run, so bad keys fail fast
      bopt.randomize_environment = !no_randomize;
      if (!batch_out.empty()) bopt.out_dir = fs::path(batch_out);
      std::vector<hilt::ScenarioSpec> specs;
      for (const auto& t : batch_targets) {
        for (auto& s : resolve_scenarios(t, scenario_root)) specs.push_back(std::move(s));
      }
      bool ok = true;
      for (const auto& s : specs) ok = check_valid(s) && ok;
      if (!ok) return 2;
      const auto b = hilt::run_batch(specs, bopt);
      json summary = {{"overall", b.report["overall"]}, {"scenarios", b.report["scenarios"]},
                      {"wall_seconds", b.wall_seconds}};
      std::cout << summary.dump(2) << "\n";
      if (!b.all_finished()) {
        std::cerr << b.failures.size() << " run(s) failed\n" << b.failures.dump(2) << "\n";
        return 1;
      }
      return 0;
    }
    if (*val) {
      bool ok = true;
      for (const auto& t : val_targets) {
        for (const auto& s : resolve_scenarios(t, scenario_root)) {
          const bool v = check_valid(s);
          std::cout << s.scenario_id << ": " << (v ? "ok" : "invalid") << "\n";
          ok = ok && v;
        }
      }
      return ok ? 0 : 2;
    }
    if (*rep) {
      const std::string original = read_file(rep_log);
      const auto records = hilt::parse_log_text(original);
      hilt::RunResult r;
      const std::string replayed = hilt::replay_log(records, &r);
      if (!rep_out.empty()) write_file(rep_out, replayed);
      if (rep_check && replayed != original) {
        std::cerr << "replay differs from the original log\n";
        return 1;
      }
      std::cout << hilt::to_json(r.metrics).dump(2) << "\n";
      return 0;
    }
    if (*csv) {
      const std::string text = hilt::runs_csv(json::parse(read_file(csv_in)));
      if (csv_out.empty()) {
        std::cout << text;
      } else {
        write_file(csv_out, text);
      }
      return 0;
    }
    if (*serve) {
      hilt::GatewayOptions g;
      g.scenario_root = scenario_root;
      g.base_config = load_profile(profile);
      hilt::Gateway gw(g);
      std::cerr << "listening on " << host << ":" << port << "\n";
      return gw.listen(host, port) ? 0 : 1;
    }
  } catch (const hilt::ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "config: " << p << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
