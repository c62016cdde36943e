#include "hilt/batch.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "hilt/runner.hpp"

namespace hilt {

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  return v.dump();
}

}  // namespace

BatchEnvironment draw_environment(std::uint64_t seed, const BatchOptions& o) {
  RandomStream s = derive_stream(seed, "batch_env");
  BatchEnvironment e;
  e.visibility_m = s.uniform(o.visibility_min_m, o.visibility_max_m);
  e.snr_db = s.uniform(o.snr_min_db, o.snr_max_db);
  return e;
}

BatchResult run_batch(const std::vector<ScenarioSpec>& scenarios, const BatchOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  BatchResult b;
  for (const auto& sc : scenarios) {
    for (int i = 0; i < o.runs; ++i) {
      const std::uint64_t seed = o.seed_base + static_cast<std::uint64_t>(i);
      RunSummary s;
      s.scenario_id = sc.scenario_id;
      s.family = sc.family;
      s.seed = seed;
      std::optional<double> vis, snr;
      if (o.randomize_environment) {
        const BatchEnvironment env = draw_environment(seed, o);
        vis = env.visibility_m;
        snr = env.snr_db;
      }
      s.visibility_m = vis.value_or(sc.environment.visibility_m);
      s.snr_db = snr.value_or(sc.environment.snr_db);
      std::string log_text;
      try {
        RunResult r = run_scenario(sc, seed, o.config, o.plugins, vis, snr, &log_text);
        s.finished = r.finished;
        s.error = r.error;
        s.metrics = r.metrics;
      } catch (const std::exception& e) {
        s.finished = false;
        s.error = e.what();
      }
      if (!s.finished) {
        b.failures.push_back({{"scenario_id", s.scenario_id},
                              {"seed", seed},
                              {"error", s.error.empty() ? "run did not finish" : s.error}});
      }
      if (o.out_dir) {
        const auto base = *o.out_dir / "runs" / sc.scenario_id / ("seed-" + std::to_string(seed));
        write_file(base.string() + ".jsonl", log_text);
        write_file(base.string() + ".metrics.json", to_json(s.metrics).dump(2) + "\n");
      }
      b.runs.push_back(std::move(s));
    }
  }
  b.report = aggregate(b.runs);
  b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  b.report["wall_seconds"] = b.wall_seconds;
  if (o.out_dir) {
    write_file(*o.out_dir / "report.json", b.report.dump(2) + "\n");
    if (!b.failures.empty()) write_file(*o.out_dir / "failures.json", b.failures.dump(2) + "\n");
  }
  return b;
}

std::string runs_csv(const nlohmann::json& report) {
  static const char* kCols[] = {"scenario_id", "family", "seed", "finished", "visibility_m", "snr_db"};
  static const char* kMetricCols[] = {"warned", "ttfw_ms", "early_warning", "t_conflict_ms",
                                      "first_detection_range_m", "first_spoken_advisory"};
  static const char* kLatencies[] = {"asr_latency_ms", "vision_latency_ms", "adsb_latency_ms",
                                     "decision_latency_ms", "tts_latency_ms"};
  std::ostringstream out;
  bool first = true;
  auto cell = [&](const std::string& s) {
    if (!first) out << ',';
    out << s;
    first = false;
  };
  for (const char* c : kCols) cell(c);
  for (const char* c : kMetricCols) cell(c);
  for (const char* c : kLatencies) cell(std::string(c) + "_mean");
  out << '\n';
  for (const auto& r : report.at("runs")) {
    first = true;
    for (const char* c : kCols) cell(csv_cell(r.value(c, nlohmann::json())));
    const auto& m = r.at("metrics");
    for (const char* c : kMetricCols) cell(csv_cell(m.value(c, nlohmann::json())));
    for (const char* c : kLatencies) {
      const auto& st = m.at(c);
      cell(st.value("count", 0) ? csv_cell(st.at("mean")) : "");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hilt
