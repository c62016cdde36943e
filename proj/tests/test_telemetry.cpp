#include <doctest.h>

#include <sstream>

#include "hilt/telemetry.hpp"

using namespace hilt;
using nlohmann::json;

namespace {

LatencyLedger sample_ledger() {
  LatencyLedger l;
  l.turns = {{"a", 1000, 6880}, {"b", 30000, 35880}, {"c", 40000, std::nullopt}};
  l.frames = {{"cam", 100, 515}, {"cam", 150, 565}};
  l.adsb = {{0, 50}, {1000, 1050}};
  l.advisories = {{"adv-1", Severity::INFO, 7000, 7000, std::nullopt},
                  {"adv-2", Severity::WARNING, 36000, 36000, 36900},
                  {"adv-3", Severity::CAUTION, 37000, 37250, 38150}};
  l.t_conflict_ms = 31000;
  return l;
}

}  // namespace

TEST_SUITE("telemetry") {

TEST_CASE("per-module latencies and TTFW") {
  const RunMetrics m = compute_latencies(sample_ledger());
  CHECK(m.asr_latency_ms.count == 2);
  CHECK(m.asr_latency_ms.mean == 5880.0);
  CHECK(m.asr_latency_ms.min == 5880.0);
  CHECK(m.asr_latency_ms.max == 5880.0);
  CHECK(m.vision_latency_ms.mean == 415.0);
  CHECK(m.adsb_latency_ms.mean == 50.0);
  CHECK(m.decision_latency_ms.count == 3);
  CHECK(m.tts_latency_ms.count == 2);
  CHECK(m.tts_latency_ms.mean == 900.0);
  REQUIRE(m.ttfw_ms);
  CHECK(*m.ttfw_ms == 5900);
  CHECK(m.first_spoken_advisory == "adv-2");
  CHECK(m.warned);
  CHECK_FALSE(m.early_warning);
  CHECK(m.advisory_count.at("WARNING") == 1);
  CHECK(m.advisory_count.at("INFO") == 1);
}

TEST_CASE("telescoping identity holds exactly") {
  const RunMetrics m = compute_latencies(sample_ledger());
  REQUIRE(m.telescoping);
  const auto& t = *m.telescoping;
  CHECK(t.ready_minus_conflict_ms == 5000);
  CHECK(t.decision_ms == 0);
  CHECK(t.tts_ms == 900);
  CHECK(t.ready_minus_conflict_ms + t.decision_ms + t.tts_ms == *m.ttfw_ms);
}

TEST_CASE("warning before the conflict window gives a flagged negative TTFW") {
  LatencyLedger l = sample_ledger();
  l.t_conflict_ms = 40000;
  const RunMetrics m = compute_latencies(l);
  CHECK(*m.ttfw_ms == -3100);
  CHECK(m.early_warning);
}

TEST_CASE("no conflict: TTFW undefined and diagnosed") {
  LatencyLedger l = sample_ledger();
  l.t_conflict_ms.reset();
  const RunMetrics m = compute_latencies(l);
  CHECK_FALSE(m.ttfw_ms);
  CHECK(m.warned);
  CHECK(m.diagnostics.size() == 1);
}

TEST_CASE("summarize uses nearest-rank p95") {
  std::vector<double> v;
  for (int i = 1; i <= 20; ++i) v.push_back(i);
  const Stats s = summarize(v);
  CHECK(s.p95 == 19.0);
  CHECK(s.mean == 10.5);
  CHECK(summarize({}).count == 0);
  CHECK(summarize({7.0}).p95 == 7.0);
}

TEST_CASE("records serialize with sorted keys and a schema version") {
  const std::string line = serialize_record({12, "radio_turn", json{{"z", 1}, {"a", 2}}});
  CHECK(line == R"({"kind":"radio_turn","payload":{"a":2,"z":1},"ts_ms":12,"v":1})");
}

TEST_CASE("event log round trip and listeners") {
  EventLog log;
  std::vector<std::string> heard;
  const int h = log.subscribe([&](const LogRecord& r) { heard.push_back(r.kind); });
  log.append(0, "run_start", json{{"scenario", json::object()}});
  log.append(5, "tts", json{{"advisory_id", "adv-1"}});
  log.unsubscribe(h);
  log.append(10, "run_end", json::object());
  CHECK(heard == std::vector<std::string>{"run_start", "tts"});
  CHECK(log.size() == 3);
  const auto parsed = parse_log_text(log.text());
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[1].ts_ms == 5);
  CHECK(parsed[1].payload["advisory_id"] == "adv-1");
  std::ostringstream out;
  log.write(out);
  CHECK(out.str() == log.text());
  CHECK(check_log(parsed).complete());
}

TEST_CASE("parse_log names the bad line") {
  try {
    parse_log_text("{\"kind\":\"x\",\"payload\":{},\"ts_ms\":0,\"v\":1}\nnot json\n");
    FAIL("expected error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("check_log reports missing terminal events") {
  std::vector<LogRecord> recs{{0, "run_start", json::object()},
                              {10, "advisory", json{{"advisory_id", "adv-1"}, {"spoken", true}}}};
  const auto c = check_log(recs);
  CHECK_FALSE(c.complete());
  CHECK(std::find(c.missing.begin(), c.missing.end(), "run_end") != c.missing.end());
  CHECK(std::find(c.missing.begin(), c.missing.end(), "tts:adv-1") != c.missing.end());
}

TEST_CASE("mean and population stddev") {
  const MeanStd m = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(m.count == 8);
  CHECK(m.mean == 5.0);
  CHECK(m.stddev == 2.0);
  CHECK(mean_std({}).count == 0);
}

TEST_CASE("aggregate groups by family and scenario") {
  std::vector<RunSummary> runs;
  for (int i = 0; i < 4; ++i) {
    RunSummary r;
    r.scenario_id = i < 2 ? "S01A-x" : "S01A-y";
    r.family = "S01A";
    r.seed = static_cast<std::uint64_t>(i + 1);
    r.metrics = compute_latencies(sample_ledger());
    if (i == 3) r.metrics = compute_latencies(LatencyLedger{});
    runs.push_back(r);
  }
  const json rep = aggregate(runs);
  CHECK(rep.contains("families"));
  CHECK(rep.contains("scenarios"));
  CHECK(rep["runs"].size() == 4);
  CHECK(rep["families"]["S01A"]["runs"] == 4);
  CHECK(rep["families"]["S01A"]["warned"] == 3);
  CHECK(rep["scenarios"]["S01A-x"]["warned"] == 2);
  CHECK(rep["scenarios"]["S01A-y"]["warned"] == 1);
  CHECK(rep["scenarios"]["S01A-y"]["conflict_runs"] == 2);
}

}
