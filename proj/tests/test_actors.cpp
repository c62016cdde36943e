#include <doctest.h>

#include "common.hpp"
#include "hilt/actors.hpp"

using namespace hilt;

namespace {

struct World {
  ScenarioSpec spec = test::scenario("S01A", "bad-readback");
  RunConfig config;
  const std::vector<Runway>& runways() const { return spec.geometry.runways; }
  const ActorSpec& actor(const std::string& id) const { return *spec.find_actor(id); }
};

ParsedSlots command(const std::string& text) { return parse_phraseology(text); }

}  // namespace

TEST_SUITE("actors") {

TEST_CASE("takeoff roll accelerates strictly, then rotates and climbs") {
  World w;
  const ActorSpec& dep = w.actor("DEP");
  const ActorParams p = resolve_params(dep, w.config);
  auto [s, reply] = receive_command(initial_state(dep, w.config),
                                    command("N123AB, cleared for takeoff runway zero one"), 1.0, 0.8, 0, w.runways());
  REQUIRE(reply);
  CHECK(reply->kind == RadioReply::Kind::readback);
  CHECK(reply->text == "cleared for takeoff runway zero one, N123AB");
  CHECK(s.phase == Phase::lineup);

  bool saw_roll = false, saw_climb = false;
  double prev_speed = -1.0;
  for (TimeMs t = 50; t <= 120000; t += 50) {
    const ActorState next = step(s, 50, t, p, w.runways());
    if (s.phase == Phase::takeoff_roll && next.phase == Phase::takeoff_roll) {
      saw_roll = true;
      CHECK(next.ground_speed_mps > s.ground_speed_mps);
    }
    if (next.phase == Phase::climb_out) saw_climb = true;
    prev_speed = next.ground_speed_mps;
    s = next;
  }
  CHECK(prev_speed >= p.rotation_speed_mps);
  CHECK(saw_roll);
  CHECK(saw_climb);
  CHECK(s.position.z > 100.0);
}

TEST_CASE("arrival glides, flares, rolls out with strictly falling speed and vacates") {
  World w;
  const ActorSpec& arr = w.actor("ARR");
  const ActorParams p = resolve_params(arr, w.config);
  ActorState s = initial_state(arr, w.config);
  CHECK(s.phase == Phase::glide);
  bool saw_rollout = false;
  for (TimeMs t = 50; t <= 200000 && s.phase != Phase::stop; t += 50) {
    const ActorState next = step(s, 50, t, p, w.runways());
    if (s.phase == Phase::rollout && next.phase == Phase::rollout) {
      saw_rollout = true;
      CHECK(next.ground_speed_mps < s.ground_speed_mps);
    }
    CHECK(next.position.z >= 0.0);
    s = next;
  }
  CHECK(saw_rollout);
  CHECK(s.phase == Phase::stop);
  const Runway& r = w.runways()[0];
  CHECK_FALSE(in_protected_area(r, s.position, w.config.protected_area));
}

TEST_CASE("commands below tau leave the state untouched") {
  World w;
  const ActorState s0 = initial_state(w.actor("DEP"), w.config);
  const auto slots = command("N123AB, cleared for takeoff runway zero one");
  for (double conf : {0.0, 0.3, 0.79, 0.7999}) {
    auto [s, reply] = receive_command(s0, slots, conf, 0.8, 1000, w.runways());
    CHECK(s == s0);
    REQUIRE(reply);
    CHECK(reply->kind == RadioReply::Kind::say_again);
    CHECK(reply->text == "say again, N123AB");
  }
  auto [s, reply] = receive_command(s0, slots, 0.8, 0.8, 1000, w.runways());
  CHECK_FALSE(s == s0);
  CHECK(reply->kind == RadioReply::Kind::readback);
}

TEST_CASE("acknowledgements produce no reply and no change") {
  World w;
  const ActorState s0 = initial_state(w.actor("DEP"), w.config);
  auto [s, reply] = receive_command(s0, command("roger, N123AB"), 0.0, 0.8, 0, w.runways());
  CHECK(s == s0);
  CHECK_FALSE(reply);
}

TEST_CASE("non-executable instructions are answered with unable") {
  World w;
  const ActorState s0 = initial_state(w.actor("DEP"), w.config);
  auto [s, reply] = receive_command(s0, command("N123AB, go around"), 1.0, 0.8, 0, w.runways());
  REQUIRE(reply);
  CHECK(reply->kind == RadioReply::Kind::unable);
  CHECK_FALSE(reply->executable);
  auto [s2, reply2] = receive_command(s0, command("N123AB, cleared for takeoff runway two seven"), 1.0, 0.8, 0,
                                      w.runways());
  CHECK(reply2->kind == RadioReply::Kind::unable);
  CHECK(s2.phase == Phase::holding_short);
}

TEST_CASE("a vehicle told to hold short stays out of the protected area until released") {
  ScenarioSpec spec = test::scenario("S01B", "vehicle-noncompliant");
  ActorSpec truck = *spec.find_actor("VEH");
  truck.initial_behavior.noncompliant = false;
  truck.initial_behavior.start_at_ms = 0;
  RunConfig cfg;
  const ActorParams p = resolve_params(truck, cfg);
  const Runway& r = *spec.find_runway_by_end("01");
  ActorState s = initial_state(truck, cfg);
  REQUIRE_FALSE(in_protected_area(r, s.position, cfg.protected_area));
  auto [held, reply] = receive_command(s, parse_phraseology("TRUCK7, hold short runway zero one"), 1.0, 0.8, 0,
                                       spec.geometry.runways);
  REQUIRE(reply);
  CHECK(reply->kind == RadioReply::Kind::readback);
  s = held;
  for (TimeMs t = 50; t <= 120000; t += 50) {
    s = step(s, 50, t, p, spec.geometry.runways);
    REQUIRE_FALSE(in_protected_area(r, s.position, cfg.protected_area));
  }
  CHECK(s.held);

  auto [go, reply2] = receive_command(s, parse_phraseology("TRUCK7, proceed"), 1.0, 0.8, 120000, spec.geometry.runways);
  CHECK(reply2->kind == RadioReply::Kind::readback);
  s = go;
  bool entered = false;
  for (TimeMs t = 120050; t <= 240000; t += 50) {
    s = step(s, 50, t, p, spec.geometry.runways);
    entered = entered || in_protected_area(r, s.position, cfg.protected_area);
  }
  CHECK(entered);
}

TEST_CASE("a noncompliant vehicle ignores hold short") {
  ScenarioSpec spec = test::scenario("S01B", "vehicle-noncompliant");
  const ActorSpec& truck = *spec.find_actor("VEH");
  REQUIRE(truck.initial_behavior.noncompliant);
  RunConfig cfg;
  const ActorParams p = resolve_params(truck, cfg);
  auto [s, reply] = receive_command(initial_state(truck, cfg), parse_phraseology("TRUCK7, hold short runway zero one"),
                                    1.0, 0.8, 0, spec.geometry.runways);
  bool entered = false;
  for (TimeMs t = 50; t <= 90000; t += 50) {
    s = step(s, 50, t, p, spec.geometry.runways);
    entered = entered || in_protected_area(*spec.find_runway_by_end("01"), s.position, cfg.protected_area);
  }
  CHECK(entered);
}

TEST_CASE("cancel takeoff clearance rejects a roll in progress") {
  World w;
  const ActorSpec& dep = w.actor("DEP");
  const ActorParams p = resolve_params(dep, w.config);
  auto [s, r1] = receive_command(initial_state(dep, w.config), command("N123AB, cleared for takeoff runway zero one"),
                                 1.0, 0.8, 0, w.runways());
  TimeMs t = 0;
  while (s.phase != Phase::takeoff_roll && t < 60000) s = step(s, 50, t += 50, p, w.runways());
  for (int i = 0; i < 40; ++i) s = step(s, 50, t += 50, p, w.runways());
  REQUIRE(s.phase == Phase::takeoff_roll);
  auto [c, r2] = receive_command(s, command("N123AB, cancel takeoff clearance"), 1.0, 0.8, t, w.runways());
  CHECK(c.phase == Phase::rejected_takeoff);
  s = c;
  for (int i = 0; i < 2000 && s.phase != Phase::stop; ++i) {
    const auto next = step(s, 50, t += 50, p, w.runways());
    if (s.phase == Phase::rejected_takeoff && next.phase == Phase::rejected_takeoff) {
      CHECK(next.ground_speed_mps < s.ground_speed_mps);
    }
    s = next;
  }
  CHECK(s.phase == Phase::stop);
}

TEST_CASE("readback faults") {
  RandomStream rs = derive_stream(1, "readback_fault");
  RadioReply r;
  r.kind = RadioReply::Kind::readback;
  r.instruction = Instruction{"N123AB", Action::cleared_for_takeoff, "01", {}};
  r.text = render_readback(*r.instruction);
  const auto bad = inject_readback_error(r, ReadbackFault::bad_readback, rs);
  CHECK(bad.text == "cleared for takeoff runway one nine, N123AB");
  const auto mis = inject_readback_error(r, ReadbackFault::misaddressed, rs, std::string("N5521K"));
  CHECK(mis.text == "cleared for takeoff runway zero one, N5521K");
  CHECK(inject_readback_error(r, ReadbackFault::none, rs).text == r.text);
  RadioReply say;
  say.kind = RadioReply::Kind::say_again;
  say.text = "say again, N123AB";
  CHECK(inject_readback_error(say, ReadbackFault::bad_readback, rs).text == say.text);
}

TEST_CASE("airborne phases") {
  CHECK(is_airborne(Phase::climb_out));
  CHECK(is_airborne(Phase::glide));
  CHECK_FALSE(is_airborne(Phase::takeoff_roll));
  CHECK_FALSE(is_airborne(Phase::holding_short));
}

}
