#pragma once

// Kinematic phase machines for aircraft, vehicles, wildlife and scripted
// ATC, plus confidence-gated handling of received instructions.

#include <optional>
#include <string>
#include <vector>

#include "hilt/config.hpp"
#include "hilt/geometry.hpp"
#include "hilt/phraseology.hpp"
#include "hilt/scenario.hpp"

namespace hilt {

enum class Phase {
  holding_short,
  lineup,
  line_up_wait,
  takeoff_roll,
  rotate,
  climb_out,
  cruise,
  glide,
  flare,
  rollout,
  vacate,
  go_around,
  rejected_takeoff,
  drive,
  stop,
  walk,
  stand,
  fly,
  tower,
};

std::string_view to_string(Phase phase);
bool is_airborne(Phase phase);

struct BehaviorCommand {
  Action action = Action::stop;
  std::optional<std::string> runway;
  std::optional<int> altitude_ft;
  TimeMs effective_at_ms = 0;
  bool operator==(const BehaviorCommand&) const = default;
};

/// Kinematic limits after applying per-actor overrides to config defaults.
struct ActorParams {
  double accel_mps2 = 2.0;
  double decel_mps2 = 2.5;
  double rotation_speed_mps = 65.0;
  double climb_rate_mps = 12.0;
  double approach_speed_mps = 70.0;
  double glide_path_deg = 3.0;
  double cruise_speed_mps = 120.0;
  double taxi_speed_mps = 8.0;
  double speed_mps = 8.0;  // vehicle/wildlife travel speed
  double vacate_speed_mps = 15.0;
  double flare_height_m = 15.0;
  double flare_sink_mps = 2.0;
  TimeMs rotate_ms = 2000;
  double protected_lateral_m = 60.0;
  double climb_out_altitude_m = 900.0;
};

ActorParams resolve_params(const ActorSpec& spec, const RunConfig& config);

struct ActorState {
  std::string actor_id;
  ActorClass cls = ActorClass::aircraft;
  std::optional<std::string> callsign;
  Vec3 position;
  double heading_deg = 0.0;
  double ground_speed_mps = 0.0;
  double vertical_speed_mps = 0.0;
  Phase phase = Phase::stop;
  TimeMs phase_since_ms = 0;
  std::vector<BehaviorCommand> pending_clearances;
  double last_instruction_conf = 0.0;

  // Behavior context.
  std::optional<std::string> runway_end;         // runway end in use
  std::optional<std::string> hold_short_runway;  // runway id the actor must not enter
  std::vector<Vec3> path;
  std::size_t path_index = 0;
  TimeMs start_at_ms = 0;
  std::optional<double> target_altitude_m;
  bool takeoff_after_lineup = false;
  bool noncompliant = false;
  bool held = false;  // stopped by a hold-short constraint or "hold position"

  bool operator==(const ActorState&) const = default;
};

ActorState initial_state(const ActorSpec& spec, const RunConfig& config);

/// Advances one kinematic tick. `now_ms` is the time at the end of the tick.
ActorState step(const ActorState& state, TimeMs dt_ms, TimeMs now_ms, const ActorParams& params,
                const std::vector<Runway>& runways);

struct RadioReply {
  enum class Kind { readback, say_again, unable };
  Kind kind = Kind::readback;
  std::string text;
  std::optional<Instruction> instruction;  // what the reply reads back
  bool executable = true;
};

std::string_view to_string(RadioReply::Kind kind);

/// Confidence-gated command acceptance. Below tau the state is returned
/// unchanged and a clarification reply is produced.
std::pair<ActorState, std::optional<RadioReply>> receive_command(const ActorState& state, const ParsedSlots& slots,
                                                                 double slot_conf, double tau, TimeMs now_ms,
                                                                 const std::vector<Runway>& runways);

/// Scripted readback faults: bad_readback swaps the runway for its
/// reciprocal, misaddressed replaces the callsign with `script_callsign`.
RadioReply inject_readback_error(const RadioReply& reply, ReadbackFault fault, RandomStream& stream,
                                 const std::optional<std::string>& script_callsign = std::nullopt);

/// True when p lies inside the runway's protected area (dilated rectangle,
/// below max_height_m).
bool in_protected_area(const Runway& runway, const Vec3& p, const ProtectedAreaConfig& area);

}  // namespace hilt
