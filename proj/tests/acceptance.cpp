// Acceptance run: one PASS/FAIL line per primary criterion. Tolerances are
// fixed here; exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hilt/assistant.hpp"
#include "hilt/batch.hpp"
#include "hilt/comms.hpp"
#include "hilt/phraseology.hpp"
#include "hilt/runner.hpp"
#include "hilt/surveillance.hpp"
#include "oracles.hpp"

using namespace hilt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr int kRunsPerVariant = 10;
constexpr int kMinWarnedPerVariant = 9;
constexpr double kBatchWallLimitS = 60.0;
constexpr double kTtfwLowS = 5.0;
constexpr double kTtfwHighS = 12.0;
constexpr double kLadderWallLimitS = 10.0;
constexpr std::size_t kMinCorpus = 200;
constexpr double kWerTarget = 0.18;
constexpr double kWerTolerance = 0.02;
constexpr std::size_t kMinWerWords = 10000;
constexpr int kCpaInstances = 1000;
constexpr double kCpaDistTolM = 1.0;
constexpr double kCpaTimeTolS = 0.1;
constexpr TimeMs kAsrMs = 5880, kVisionMs = 415, kTtsMs = 900, kAdsbMs = 50;

const fs::path kRoot = HILT_SOURCE_DIR;
const char* kVariants[] = {"bad-readback", "cancel-not-received", "misaddressed", "tight-timing"};

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ScenarioSpec> s01a_variants() {
  std::vector<ScenarioSpec> out;
  for (const char* v : kVariants) out.push_back(load_scenario(kRoot / "scenarios" / "S01A" / (std::string(v) + ".json")));
  return out;
}

bool stat_exact(const Stats& s, TimeMs want) { return s.count > 0 && s.min == want && s.max == want; }

// ---------------------------------------------------------------------------

void batch_criteria() {
  BatchOptions o;
  o.runs = kRunsPerVariant;
  o.seed_base = 1;
  const auto b = run_batch(s01a_variants(), o);

  // Warned runs per variant; the environment draw must stay in range.
  std::map<std::string, int> warned, total;
  bool env_ok = true;
  for (const auto& r : b.runs) {
    ++total[r.scenario_id];
    env_ok = env_ok && r.visibility_m >= 200.0 && r.visibility_m <= 2000.0 && r.snr_db >= 0.0 && r.snr_db <= 20.0;
    const auto& ac = r.metrics.advisory_count;
    const int strong = (ac.count("CAUTION") ? ac.at("CAUTION") : 0) + (ac.count("WARNING") ? ac.at("WARNING") : 0);
    if (r.finished && r.metrics.warned && strong > 0) ++warned[r.scenario_id];
  }
  bool ok = b.all_finished() && env_ok && b.wall_seconds < kBatchWallLimitS && total.size() == 4;
  std::string detail;
  for (const auto& [id, n] : total) {
    ok = ok && n == kRunsPerVariant && warned[id] >= kMinWarnedPerVariant;
    detail += fmt("%s %d/%d, ", id.c_str(), warned[id], n);
  }
  detail += fmt("wall %.2f s (limit %.0f s)", b.wall_seconds, kBatchWallLimitS);
  report("s01a-batch-warns", ok, detail);

  // Latency exactness and the telescoping identity on every run.
  bool lat_ok = true;
  int telescoped = 0;
  for (const auto& r : b.runs) {
    const auto& m = r.metrics;
    lat_ok = lat_ok && stat_exact(m.asr_latency_ms, kAsrMs) && stat_exact(m.vision_latency_ms, kVisionMs) &&
             stat_exact(m.tts_latency_ms, kTtsMs) && stat_exact(m.adsb_latency_ms, kAdsbMs);
    if (m.ttfw_ms) {
      lat_ok = lat_ok && m.telescoping &&
               *m.ttfw_ms == m.telescoping->ready_minus_conflict_ms + m.telescoping->decision_ms + m.telescoping->tts_ms;
      ++telescoped;
    }
  }
  lat_ok = lat_ok && telescoped > 0;
  report("latency-exactness", lat_ok,
         fmt("asr %lld, vision %lld, tts %lld, adsb %lld ms exact over %zu runs; TTFW telescopes on %d runs",
             static_cast<long long>(kAsrMs), static_cast<long long>(kVisionMs), static_cast<long long>(kTtsMs),
             static_cast<long long>(kAdsbMs), b.runs.size(), telescoped));

  // Mean TTFW.
  double sum = 0.0;
  int n = 0;
  for (const auto& r : b.runs) {
    if (r.metrics.ttfw_ms) {
      sum += static_cast<double>(*r.metrics.ttfw_ms);
      ++n;
    }
  }
  const double mean_s = n ? sum / n / 1000.0 : 0.0;
  report("ttfw-mean", n > 0 && mean_s >= kTtfwLowS && mean_s <= kTtfwHighS,
         fmt("mean TTFW %.6f s over %d runs (band [%.0f, %.0f] s)", mean_s, n, kTtfwLowS, kTtfwHighS));
}

void ladder_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cases = 0, agree = 0;
  const std::optional<int> ttgs[] = {std::nullopt, 5000, 8000, 8001, 60000};
  for (int mask = 0; mask < 32; ++mask) {
    for (const auto& ttg : ttgs) {
      for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
          for (int k = 0; k <= 20; ++k) {
            oracle::LadderCase c{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0,
                                 (mask & 16) != 0, ttg, i, j, k};
            EvidenceState e;
            e.readback_mismatch = c.mismatch;
            e.activity = c.activity;
            e.occupancy = c.occupancy;
            e.arrival_context = c.arrival_context;
            e.recipient_ambiguous = c.ambiguous;
            if (ttg) e.ttg_s = *ttg / 1000.0;
            e.W_V = i / 20.0;
            e.W_A = j / 20.0;
            e.W_C = k / 20.0;
            const auto want = oracle::ladder(c);
            const auto got = decide(e);
            bool same = got.has_value() == !want.type.empty();
            if (same && got) {
              same = got->type == want.type && level(got->severity) == want.level &&
                     std::set<std::string>(got->rules_triggered.begin(), got->rules_triggered.end()) == want.rules;
            }
            ++cases;
            agree += same;
          }
        }
      }
    }
  }
  const double wall = seconds_since(t0);
  report("ladder-oracle", agree == cases && wall < kLadderWallLimitS,
         fmt("%zu/%zu cases agree, %.2f s (limit %.0f s)", agree, cases, wall, kLadderWallLimitS));
}

void parser_criterion() {
  std::vector<json> corpus;
  {
    std::ifstream in(kRoot / "data" / "phraseology_corpus.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) corpus.push_back(json::parse(line));
    }
  }
  std::size_t recovered = 0;
  for (const auto& row : corpus) {
    const ParsedSlots s = parse_phraseology(row["text"].get<std::string>());
    bool ok = s.action && to_string(*s.action) == row["action"].get<std::string>() &&
              s.callsign == row["callsign"].get<std::string>();
    ok = ok && (row["runway"].is_null() ? !s.runway : s.runway == row["runway"].get<std::string>());
    ok = ok && (row["altitude_ft"].is_null() ? !s.altitude_ft : s.altitude_ft == row["altitude_ft"].get<int>());
    recovered += ok;
  }

  // Channel WER at the SNR that maps to the target error rate.
  const ChannelConfig ch;
  const double snr = ch.snr_clean_db - kWerTarget * ch.snr_span_db;
  const double p = channel_p_err(snr, ch);
  RandomStream s = derive_stream(7, "acceptance_wer");
  std::size_t words = 0, edits = 0;
  while (words < 2 * kMinWerWords) {
    for (const auto& row : corpus) {
      const std::string text = row["text"];
      const auto ref = tokenize(text);
      words += ref.size();
      edits += oracle::word_edit_distance(ref, tokenize(degrade(text, snr, ch, s).text));
    }
  }
  const double wer = static_cast<double>(edits) / static_cast<double>(words);
  const bool ok = corpus.size() >= kMinCorpus && recovered == corpus.size() && std::abs(p - kWerTarget) < 1e-12 &&
                  words >= kMinWerWords && std::abs(wer - kWerTarget) <= kWerTolerance;
  report("parser-and-wer", ok,
         fmt("slots %zu/%zu utterances; p_err %.4f at %.2f dB, WER %.4f over %zu words (target %.2f +/- %.2f)",
             recovered, corpus.size(), p, snr, wer, words, kWerTarget, kWerTolerance));
}

void cpa_criterion() {
  RandomStream s = derive_stream(99, "acceptance_cpa");
  int agree = 0;
  double worst_d = 0.0, worst_t = 0.0;
  for (int n = 0; n < kCpaInstances; ++n) {
    Track a, b;
    a.position = {s.uniform(-20000, 20000), s.uniform(-20000, 20000), s.uniform(1000, 4000)};
    b.position = {s.uniform(-20000, 20000), s.uniform(-20000, 20000), s.uniform(1000, 4000)};
    a.heading_deg = s.uniform(0, 360);
    a.ground_speed_mps = s.uniform(60, 250);
    a.vertical_speed_mps = s.uniform(-15, 15);
    // Relative horizontal speed of at least 100 m/s keeps t_cpa under the scan horizon.
    const Vec3 va = a.velocity();
    const double rel_heading = s.uniform(0, 2 * M_PI);
    const double rel_speed = s.uniform(100, 400);
    const double bvx = va.x + rel_speed * std::sin(rel_heading);
    const double bvy = va.y + rel_speed * std::cos(rel_heading);
    b.ground_speed_mps = std::hypot(bvx, bvy);
    b.heading_deg = heading_of(Vec3{bvx, bvy, 0});
    b.vertical_speed_mps = s.uniform(-15, 15);

    const Cpa c = compute_cpa(a, b);
    const Vec3 wa = a.velocity(), wb = b.velocity();
    const auto brute = oracle::brute_cpa({a.position.x, a.position.y, a.position.z, wa.x, wa.y, wa.z},
                                         {b.position.x, b.position.y, b.position.z, wb.x, wb.y, wb.z}, 600000, 1);
    const double dd = std::abs(brute.d_m - c.d_cpa_m), dt = std::abs(brute.t_s - c.t_cpa_s);
    worst_d = std::max(worst_d, dd);
    worst_t = std::max(worst_t, dt);
    agree += dd <= kCpaDistTolM && dt <= kCpaTimeTolS;
  }
  report("cpa-brute-force", agree == kCpaInstances,
         fmt("%d/%d instances; worst |dd| %.2e m (tol %.1f), worst |dt| %.2e s (tol %.1f)", agree, kCpaInstances,
             worst_d, kCpaDistTolM, worst_t, kCpaTimeTolS));
}

void determinism_criterion() {
  int identical = 0, replayed = 0, total = 0;
  for (const auto& spec : s01a_variants()) {
    for (std::uint64_t seed = 1; seed <= kRunsPerVariant; ++seed) {
      std::string first, second;
      run_scenario(spec, seed, RunConfig{}, {}, {}, {}, &first);
      run_scenario(spec, seed, RunConfig{}, {}, {}, {}, &second);
      ++total;
      identical += !first.empty() && first == second;
      replayed += replay_log(parse_log_text(first)) == first;
    }
  }
  report("determinism", identical == total && replayed == total,
         fmt("%d/%d repeat runs byte-identical, %d/%d replays byte-identical", identical, total, replayed, total));
}

void corroboration_criterion() {
  auto hit = [](double conf) {
    Detection d;
    d.confidence = conf;
    return std::vector<Detection>{d};
  };
  const CorroborationPolicy p;
  std::vector<std::string> bad;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) bad.push_back(what);
  };

  // K=2: two cameras within the window latch; one camera, or two cameras
  // further apart than the window, do not.
  {
    Corroborator c("r", p);
    c.on_frame("A", 0, 1000, hit(0.3));
    expect(!c.flag().occupied, "one camera latched");
    c.on_frame("B", 0, 2000, hit(0.3));
    expect(c.flag().occupied && c.flag().corroboration == 2, "two cameras at the window edge");
    Corroborator f("r", p);
    f.on_frame("A", 0, 1000, hit(0.3));
    f.on_frame("B", 0, 2001, hit(0.3));
    expect(!f.flag().occupied, "two cameras past the window");
  }
  // Persistence: M=5 consecutive frames at conf >= 0.7.
  {
    Corroborator c("r", p);
    for (std::uint64_t i = 0; i < 4; ++i) c.on_frame("A", i, 50 * static_cast<TimeMs>(i), hit(0.7));
    expect(!c.flag().occupied, "four frames latched");
    c.on_frame("A", 4, 200, hit(0.7));
    expect(c.flag().occupied, "five frames did not latch");
    Corroborator w("r", p);
    for (std::uint64_t i = 0; i < 50; ++i) w.on_frame("A", i, 50 * static_cast<TimeMs>(i), hit(0.6999));
    expect(!w.flag().occupied, "sub-threshold frames latched");
    Corroborator g("r", p);
    for (std::uint64_t i : {0u, 1u, 2u, 3u, 5u, 6u, 7u, 8u}) g.on_frame("A", i, 50 * static_cast<TimeMs>(i), hit(0.9));
    expect(!g.flag().occupied, "a frame gap did not reset the run");
  }
  // Staleness: clears exactly 2000 ms after the last in-area detection.
  {
    Corroborator c("r", p);
    c.on_frame("A", 0, 5000, hit(0.5));
    c.on_frame("B", 0, 5000, hit(0.5));
    c.on_tick(6999);
    expect(c.flag().occupied, "cleared before staleness");
    c.on_tick(7000);
    expect(!c.flag().occupied, "not cleared at staleness");
  }
  // Random sequences against the reference latch.
  RandomStream s = derive_stream(31, "acceptance_latch");
  int mismatches = 0;
  std::size_t frames = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Corroborator c("r", p);
    oracle::Latch o({p.k_cameras, p.tau_vis, p.m_frames, p.window_ms, p.staleness_ms});
    std::map<std::string, std::uint64_t> index;
    TimeMs t = 0;
    const double density = s.uniform(0.05, 0.95);
    const int cams = static_cast<int>(s.uniform_int(1, 3));
    for (int i = 0; i < 200; ++i) {
      t += s.uniform_int(0, 150);
      const std::string cam(1, static_cast<char>('A' + s.uniform_int(0, cams - 1)));
      std::uint64_t& idx = index[cam];
      idx += s.bernoulli(0.9) ? 1 : 2;
      std::vector<Detection> dets;
      oracle::SyntheticFrame f{cam, idx, t, {}};
      if (s.bernoulli(density)) {
        const double conf = s.uniform(0.4, 1.0);
        Detection d;
        d.confidence = conf;
        dets.push_back(d);
        f.hits.push_back({conf});
      }
      if (s.bernoulli(0.2)) {
        c.on_tick(t);
        if (c.flag().occupied != o.tick(t).occupied) ++mismatches;
      }
      c.on_frame(cam, idx, t, dets);
      const auto os = o.frame(f);
      if (c.flag().occupied != os.occupied || (os.occupied && c.flag().corroboration != os.corroboration)) ++mismatches;
      ++frames;
    }
  }
  std::string detail = fmt("K=%d window %lld ms, tau %.2f M=%d, staleness %lld ms; %zu random frames, %d mismatches",
                           p.k_cameras, static_cast<long long>(p.window_ms), p.tau_vis, p.m_frames,
                           static_cast<long long>(p.staleness_ms), frames, mismatches);
  for (const auto& b : bad) detail += "; " + b;
  report("corroboration", bad.empty() && mismatches == 0, detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> steps = {
      {"s01a-batch", batch_criteria},       {"ladder-oracle", ladder_criterion},
      {"parser-and-wer", parser_criterion}, {"cpa-brute-force", cpa_criterion},
      {"determinism", determinism_criterion}, {"corroboration", corroboration_criterion},
  };
  for (const auto& [name, fn] : steps) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criterion(s) failed" : "acceptance: all criteria pass")
            << std::endl;
  return failures ? 1 : 0;
}
