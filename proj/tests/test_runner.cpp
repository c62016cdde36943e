#include <doctest.h>

#include <algorithm>
#include <set>

#include "common.hpp"
#include "hilt/comms.hpp"
#include "hilt/runner.hpp"

using namespace hilt;
using nlohmann::json;

namespace {

const char* kVariants[] = {"bad-readback", "cancel-not-received", "misaddressed", "tight-timing"};

std::string run_text(const ScenarioSpec& s, std::uint64_t seed, PluginSet plugins = {}, RunResult* out = nullptr) {
  std::string text;
  RunResult r = run_scenario(s, seed, RunConfig{}, plugins, {}, {}, &text);
  REQUIRE_MESSAGE(r.finished, r.error);
  if (out) *out = std::move(r);
  return text;
}

std::vector<LogRecord> of_kind(const std::vector<LogRecord>& recs, const std::string& kind) {
  std::vector<LogRecord> out;
  std::copy_if(recs.begin(), recs.end(), std::back_inserter(out), [&](const LogRecord& r) { return r.kind == kind; });
  return out;
}

std::set<std::string> keys(const json& j) {
  std::set<std::string> out;
  for (const auto& [k, _] : j.items()) out.insert(k);
  return out;
}

// Recomputes exactly what the built-in ASR would have produced.
class EchoAsr : public AsrPlugin {
 public:
  EchoAsr(std::uint64_t seed, RunConfig config) : seed_(seed), config_(std::move(config)) {}
  std::optional<AsrPluginResult> transcribe(const json& req, PluginFailure&) override {
    RadioTurn t;
    t.turn_id = req.at("turn_id").get<std::string>();
    t.t_tx_ms = req.at("t_tx_ms").get<TimeMs>();
    t.frequency = req.at("frequency").get<std::string>();
    t.clean_text = req.at("text").get<std::string>();
    t.snr_db = req.at("snr_db").get<double>();
    RandomStream noise = derive_stream(seed_, "asr_noise").substream(t.turn_id);
    RandomStream lat = derive_stream(seed_, "asr_latency").substream(t.turn_id);
    const AsrResult a = simulate_asr(t, config_, noise, lat);
    ++calls;
    return AsrPluginResult{a.transcript, a.confidence, a.t_asr_out_ms - t.t_tx_ms};
  }
  int calls = 0;

 private:
  std::uint64_t seed_;
  RunConfig config_;
};

class DeadVision : public VisionPlugin {
 public:
  std::optional<VisionPluginResult> detect(const json&, PluginFailure& f) override {
    f.status = "unreachable";
    f.diagnostic = "connection refused";
    return std::nullopt;
  }
};

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("a finished run has bracketing run_start and run_end") {
  RunResult r;
  const auto recs = parse_log_text(run_text(test::scenario("S01A", "bad-readback"), 42, {}, &r));
  REQUIRE(!recs.empty());
  CHECK(recs.front().kind == "run_start");
  CHECK(recs.back().kind == "run_end");
  CHECK(check_log(recs).complete());
  CHECK(r.metrics.warned);
  // The ledger rebuilt from the log gives the same metrics.
  CHECK(compute_latencies(ledger_from_log(recs)) == r.metrics);
}

TEST_CASE("two runs with the same seed give byte-identical logs") {
  for (const char* v : kVariants) {
    CAPTURE(v);
    const auto s = test::scenario("S01A", v);
    CHECK(run_text(s, 5) == run_text(s, 5));
  }
  const auto s = test::scenario("S01A", "bad-readback");
  CHECK(run_text(s, 5) != run_text(s, 6));
}

TEST_CASE("replay reproduces the log byte for byte") {
  for (const char* v : kVariants) {
    CAPTURE(v);
    RunResult orig;
    const std::string text = run_text(test::scenario("S01A", v), 11, {}, &orig);
    RunResult again;
    CHECK(replay_log(parse_log_text(text), &again) == text);
    CHECK(again.metrics == orig.metrics);
  }
}

TEST_CASE("injected latencies are reproduced exactly and TTFW telescopes") {
  for (const char* v : kVariants) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      CAPTURE(v);
      CAPTURE(seed);
      RunResult r;
      run_text(test::scenario("S01A", v), seed, {}, &r);
      const auto& m = r.metrics;
      REQUIRE(m.asr_latency_ms.count > 0);
      CHECK(m.asr_latency_ms.min == 5880);
      CHECK(m.asr_latency_ms.max == 5880);
      REQUIRE(m.vision_latency_ms.count > 0);
      CHECK(m.vision_latency_ms.min == 415);
      CHECK(m.vision_latency_ms.max == 415);
      REQUIRE(m.tts_latency_ms.count > 0);
      CHECK(m.tts_latency_ms.min == 900);
      CHECK(m.tts_latency_ms.max == 900);
      REQUIRE(m.adsb_latency_ms.count > 0);
      CHECK(m.adsb_latency_ms.min == 50);
      CHECK(m.adsb_latency_ms.max == 50);
      REQUIRE(m.ttfw_ms);
      REQUIRE(m.telescoping);
      const auto& t = *m.telescoping;
      CHECK(*m.ttfw_ms == t.ready_minus_conflict_ms + t.decision_ms + t.tts_ms);
      CHECK(t.tts_ms == 900);
    }
  }
}

TEST_CASE("batch environment overrides reach the prepared scenario") {
  const auto s = test::scenario("S01A", "bad-readback");
  const auto p = prepare_scenario(s, 3, 321.0, 4.5);
  CHECK(p.environment.visibility_m == 321.0);
  CHECK(p.environment.snr_db == 4.5);
  const auto q = prepare_scenario(s, 3);
  CHECK(q.environment.visibility_m == expand_variant(s, 3).environment.visibility_m);
}

TEST_CASE("role claims are validated with distinct error kinds") {
  auto kind_of = [](auto&& f) -> std::optional<RoleError::Kind> {
    try {
      f();
    } catch (const RoleError& e) {
      return e.kind();
    }
    return std::nullopt;
  };
  Director d(prepare_scenario(test::scenario("S01C", "wildlife-crossing"), 1), RunOptions{});
  std::string wildlife;
  for (const auto& a : d.spec().actors) {
    if (a.cls == ActorClass::wildlife) wildlife = a.actor_id;
  }
  REQUIRE(!wildlife.empty());
  CHECK(kind_of([&] { d.claim_role("s1", "NOPE"); }) == RoleError::Kind::not_found);
  CHECK(kind_of([&] { d.claim_role("s1", wildlife); }) == RoleError::Kind::unclaimable);
  CHECK(kind_of([&] { d.transmit("s1", "118.300", std::nullopt, "roger"); }) == RoleError::Kind::not_claimed);
  CHECK_FALSE(kind_of([&] { d.claim_role("s1", "TWR"); }));
  CHECK(d.claimed_actor("s1") == "TWR");
  CHECK(kind_of([&] { d.claim_role("s2", "TWR"); }) == RoleError::Kind::conflict);
  CHECK(kind_of([&] { d.claim_role("s1", "ARR"); }) == RoleError::Kind::conflict);
  CHECK(kind_of([&] { d.transmit("s1", "118.300", std::nullopt, "   "); }) == RoleError::Kind::invalid);
  CHECK(kind_of([&] { d.transmit("s1", "123.450", std::nullopt, "roger"); }) == RoleError::Kind::invalid);
  CHECK(kind_of([&] { d.transmit("s1", "118.300", std::string("N000XX"), "roger"); }) == RoleError::Kind::invalid);
  CHECK_FALSE(kind_of([&] { d.transmit("s1", "118.300", std::string("ARR"), "N742CA, go around"); }));
}

TEST_CASE("a human tower replaces the scripted one from the claim onward") {
  const auto raw = test::scenario("S01A", "cancel-not-received");
  const auto spec = prepare_scenario(raw, 9);
  const TimeMs claim_at = 10000;

  Director base(spec, RunOptions{9});
  REQUIRE(base.run().finished);
  const auto base_recs = base.log().records();
  const auto base_lines = base.log().snapshot();

  Director d(spec, RunOptions{9});
  d.schedule_claim(claim_at, "s1", "TWR");
  d.schedule_human_turn(30000, "s1", "118.300", std::string("DEP"), "N123AB, cleared for takeoff runway zero one");
  d.schedule_human_turn(34500, "s1", "118.300", std::string("N123AB"), "N123AB, cancel takeoff clearance");
  RunResult r = d.run();
  REQUIRE_MESSAGE(r.finished, r.error);
  const auto recs = d.log().records();
  const auto lines = d.log().snapshot();

  // Identical up to the claim, which is the first divergence.
  std::size_t n = 0;
  while (n < lines.size() && n < base_lines.size() && lines[n] == base_lines[n]) ++n;
  REQUIRE(n < lines.size());
  CHECK(recs[n].kind == "role_claim");
  CHECK(recs[n].ts_ms == claim_at);
  CHECK(base_recs[n].ts_ms >= claim_at);

  // Every scripted tower turn after the claim is suppressed instead.
  std::set<std::string> scripted_later, suppressed;
  for (const auto& rec : of_kind(base_recs, "radio_turn")) {
    if (rec.ts_ms >= claim_at && rec.payload["provenance"] == "scripted") scripted_later.insert(rec.payload["turn_id"].get<std::string>());
  }
  for (const auto& rec : of_kind(recs, "script_suppressed")) suppressed.insert(rec.payload["turn_id"].get<std::string>());
  CHECK(scripted_later == std::set<std::string>{"twr-002", "twr-003"});
  CHECK(suppressed == scripted_later);

  json scripted_turn;
  std::vector<json> human;
  for (const auto& rec : of_kind(recs, "radio_turn")) {
    const auto& p = rec.payload;
    if (p["speaker"] == "TWR" && rec.ts_ms >= claim_at) CHECK(p["provenance"] == "human");
    if (p["provenance"] == "human") human.push_back(p);
    if (p["provenance"] == "scripted") scripted_turn = p;
  }
  REQUIRE(human.size() == 2);
  CHECK(human[0]["turn_id"] == "human-001");
  CHECK(human[0]["t_tx_ms"] == 30000);
  CHECK(human[0]["frequency"] == "118.300");
  CHECK(human[0]["addressed_to"] == "N123AB");
  CHECK(human[1]["t_tx_ms"] == 34500);
  // Same schema as a scripted turn.
  CHECK(keys(human[0]) == keys(scripted_turn));

  // The departure hears both and rejects the takeoff; the scripted run has it
  // fly because its cancel never arrived.
  std::map<std::string, std::string> dep_replies;
  for (const auto& rec : of_kind(recs, "radio_rx")) {
    if (rec.payload["receiver"] == "DEP" && rec.payload["reply"].is_string()) {
      dep_replies[rec.payload["turn_id"].get<std::string>()] = rec.payload["reply"].get<std::string>();
    }
  }
  CHECK(dep_replies["human-001"] == "readback");
  CHECK(dep_replies["human-002"] == "readback");
  auto dep = [](const std::vector<ActorState>& v) {
    return *std::find_if(v.begin(), v.end(), [](const ActorState& a) { return a.actor_id == "DEP"; });
  };
  CHECK(is_airborne(dep(base.actors()).phase));
  CHECK_FALSE(is_airborne(dep(d.actors()).phase));
  // No automated tower replies once a human holds the role.
  for (const auto& rec : of_kind(recs, "radio_turn")) {
    if (rec.ts_ms >= claim_at && rec.payload["speaker"] == "TWR") CHECK(rec.payload["provenance"] == "human");
  }

  // Replay re-injects the claim and the human turns.
  CHECK(replay_log(recs) == d.log().text());
}

TEST_CASE("wall-clock runs log the same events as fast-time runs") {
  const auto spec = prepare_scenario(test::scenario("S01A", "tight-timing"), 4);
  RunOptions fast{4};
  Director a(spec, fast);
  REQUIRE(a.run().finished);
  RunOptions rt{4};
  rt.mode = ClockMode::real_time;
  rt.pace = 400.0;
  Director b(spec, rt);
  REQUIRE(b.run().finished);
  auto la = a.log().snapshot();
  auto lb = b.log().snapshot();
  REQUIRE(la.size() == lb.size());
  CHECK(parse_log_text(lb.front())[0].payload["mode"] == "real_time");
  for (std::size_t i = 1; i < la.size(); ++i) REQUIRE(la[i] == lb[i]);
  // The replay of a real-time run keeps its logged mode.
  CHECK(replay_log(b.log().records()) == b.log().text());
}

TEST_CASE("an echo ASR plugin leaves metrics unchanged") {
  for (const char* v : kVariants) {
    CAPTURE(v);
    const auto s = test::scenario("S01A", v);
    RunResult builtin;
    run_text(s, 21, {}, &builtin);
    EchoAsr echo(21, RunConfig{});
    PluginSet p;
    p.asr = &echo;
    RunResult plugged;
    const auto recs = parse_log_text(run_text(s, 21, p, &plugged));
    CHECK(echo.calls > 0);
    CHECK(plugged.metrics == builtin.metrics);
    for (const auto& rec : of_kind(recs, "asr_out")) CHECK(rec.payload["source"] == "plugin");
  }
}

TEST_CASE("a failing vision plugin falls back to the simulator") {
  const auto s = test::scenario("S01A", "bad-readback");
  RunResult builtin;
  run_text(s, 8, {}, &builtin);
  DeadVision dead;
  PluginSet p;
  p.vision = &dead;
  RunResult plugged;
  const auto recs = parse_log_text(run_text(s, 8, p, &plugged));
  const auto fallbacks = of_kind(recs, "plugin_fallback");
  REQUIRE(!fallbacks.empty());
  CHECK(fallbacks.front().payload["role"] == "vision");
  CHECK(fallbacks.front().payload["status"] == "unreachable");
  CHECK(plugged.metrics == builtin.metrics);
}

TEST_CASE("a nominal run raises no spoken advisory") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunResult r;
    run_text(test::nominal_fixture(), seed, {}, &r);
    CHECK_FALSE(r.metrics.warned);
    CHECK_FALSE(r.metrics.conflict_expected);
  }
}

}  // TEST_SUITE
