#include "hilt/actors.hpp"

#include <algorithm>
#include <cmath>

namespace hilt {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::holding_short: return "holding_short";
    case Phase::lineup: return "lineup";
    case Phase::line_up_wait: return "line_up_wait";
    case Phase::takeoff_roll: return "takeoff_roll";
    case Phase::rotate: return "rotate";
    case Phase::climb_out: return "climb_out";
    case Phase::cruise: return "cruise";
    case Phase::glide: return "glide";
    case Phase::flare: return "flare";
    case Phase::rollout: return "rollout";
    case Phase::vacate: return "vacate";
    case Phase::go_around: return "go_around";
    case Phase::rejected_takeoff: return "rejected_takeoff";
    case Phase::drive: return "drive";
    case Phase::stop: return "stop";
    case Phase::walk: return "walk";
    case Phase::stand: return "stand";
    case Phase::fly: return "fly";
    case Phase::tower: return "tower";
  }
  return "stop";
}

bool is_airborne(Phase phase) {
  switch (phase) {
    case Phase::climb_out:
    case Phase::cruise:
    case Phase::glide:
    case Phase::flare:
    case Phase::go_around:
    case Phase::fly:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(RadioReply::Kind kind) {
  switch (kind) {
    case RadioReply::Kind::readback: return "readback";
    case RadioReply::Kind::say_again: return "say_again";
    case RadioReply::Kind::unable: return "unable";
  }
  return "readback";
}

bool in_protected_area(const Runway& runway, const Vec3& p, const ProtectedAreaConfig& area) {
  return p.z <= area.max_height_m && runway.in_protected_area(p, area.lateral_m);
}

ActorParams resolve_params(const ActorSpec& spec, const RunConfig& config) {
  const ActorDefaults& d = config.actors;
  const Performance& p = spec.performance;
  ActorParams out;
  out.accel_mps2 = p.accel_mps2.value_or(d.accel_mps2);
  out.decel_mps2 = p.decel_mps2.value_or(d.decel_mps2);
  out.rotation_speed_mps = p.rotation_speed_mps.value_or(d.rotation_speed_mps);
  out.climb_rate_mps = p.climb_rate_mps.value_or(d.climb_rate_mps);
  out.approach_speed_mps = p.approach_speed_mps.value_or(d.approach_speed_mps);
  out.glide_path_deg = p.glide_path_deg.value_or(d.glide_path_deg);
  out.cruise_speed_mps = p.cruise_speed_mps.value_or(d.cruise_speed_mps);
  out.taxi_speed_mps = d.taxi_speed_mps;
  out.vacate_speed_mps = d.vacate_speed_mps;
  out.flare_height_m = d.flare_height_m;
  out.flare_sink_mps = d.flare_sink_mps;
  out.rotate_ms = d.rotate_ms;
  out.protected_lateral_m = config.protected_area.lateral_m;
  double speed = d.vehicle_speed_mps;
  if (spec.cls == ActorClass::wildlife) {
    speed = spec.initial_behavior.name == "fly" ? d.wildlife_fly_mps : d.wildlife_walk_mps;
  }
  out.speed_mps = spec.initial_behavior.speed_mps.value_or(p.speed_mps.value_or(speed));
  return out;
}

namespace {

const Runway* runway_by_end(const std::vector<Runway>& runways, std::string_view end) {
  for (const auto& r : runways) {
    if (r.has_end(end)) return &r;
  }
  return nullptr;
}

const Runway* runway_by_id(const std::vector<Runway>& runways, std::string_view id) {
  for (const auto& r : runways) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void set_phase(ActorState& s, Phase phase, TimeMs now) {
  if (s.phase == phase) return;
  s.phase = phase;
  s.phase_since_ms = now;
}

// Moves toward `target` by at most `distance`; returns true when reached.
bool advance_toward(Vec3& pos, const Vec3& target, double distance, bool with_z) {
  Vec3 d = target - pos;
  if (!with_z) d.z = 0.0;
  const double len = with_z ? norm(d) : norm_xy(d);
  if (len <= distance || len < 1e-9) {
    pos.x = target.x;
    pos.y = target.y;
    if (with_z) pos.z = target.z;
    return true;
  }
  pos += d * (distance / len);
  return false;
}

// True if the move from `from` to `to` would enter the constrained runway.
bool blocked_by_hold(const ActorState& s, const Vec3& from, const Vec3& to, const ActorParams& params,
                     const std::vector<Runway>& runways) {
  if (!s.hold_short_runway || s.noncompliant) return false;
  const Runway* r = runway_by_id(runways, *s.hold_short_runway);
  if (!r) return false;
  return !r->in_protected_area(from, params.protected_lateral_m) && r->in_protected_area(to, params.protected_lateral_m);
}

void step_path(ActorState& s, double dt_s, TimeMs now, const ActorParams& params, const std::vector<Runway>& runways,
               Phase done_phase) {
  if (now <= s.start_at_ms || s.held) {
    s.ground_speed_mps = 0.0;
    s.vertical_speed_mps = 0.0;
    return;
  }
  const bool with_z = s.phase == Phase::fly;
  double budget = params.speed_mps * dt_s;
  Vec3 pos = s.position;
  const double z_before = pos.z;
  while (budget > 1e-12 && s.path_index < s.path.size()) {
    const Vec3 target = s.path[s.path_index];
    Vec3 d = target - pos;
    if (!with_z) d.z = 0.0;
    const double len = with_z ? norm(d) : norm_xy(d);
    if (len > 1e-9) s.heading_deg = heading_of(d);
    if (advance_toward(pos, target, budget, with_z)) {
      budget -= len;
      ++s.path_index;
    } else {
      budget = 0.0;
    }
  }
  if (blocked_by_hold(s, s.position, pos, params, runways)) {
    s.held = true;
    s.ground_speed_mps = 0.0;
    s.vertical_speed_mps = 0.0;
    return;
  }
  const double moved = norm_xy(pos - s.position);
  s.ground_speed_mps = moved / dt_s;
  s.vertical_speed_mps = (pos.z - z_before) / dt_s;
  s.position = pos;
  if (s.path_index >= s.path.size()) {
    set_phase(s, done_phase, now);
    s.ground_speed_mps = 0.0;
    s.vertical_speed_mps = 0.0;
  }
}

// Constant-acceleration straight-line move along the current heading.
void roll(ActorState& s, double accel, double dt_s) {
  const double v0 = s.ground_speed_mps;
  double v1 = v0 + accel * dt_s;
  double dist = v0 * dt_s + 0.5 * accel * dt_s * dt_s;
  if (v1 < 0.0) {
    // Stops inside the tick.
    const double t_stop = v0 / -accel;
    dist = v0 * t_stop / 2.0;
    v1 = 0.0;
  }
  s.position += heading_vector(s.heading_deg) * dist;
  s.ground_speed_mps = v1;
}

}  // namespace

ActorState initial_state(const ActorSpec& spec, const RunConfig& config) {
  const ActorParams params = resolve_params(spec, config);
  ActorState s;
  s.actor_id = spec.actor_id;
  s.cls = spec.cls;
  s.callsign = spec.callsign;
  s.position = spec.initial_pose.position;
  s.heading_deg = wrap_heading(spec.initial_pose.heading_deg);
  s.runway_end = spec.initial_behavior.runway;
  s.path = spec.initial_behavior.waypoints;
  s.start_at_ms = spec.initial_behavior.start_at_ms;
  s.noncompliant = spec.initial_behavior.noncompliant;
  const std::string& b = spec.initial_behavior.name;
  if (spec.cls == ActorClass::atc) {
    s.phase = Phase::tower;
  } else if (b == "holding_short") {
    s.phase = Phase::holding_short;
  } else if (b == "approach") {
    s.phase = Phase::glide;
    s.ground_speed_mps = spec.initial_behavior.speed_mps.value_or(params.approach_speed_mps);
    s.vertical_speed_mps = -s.ground_speed_mps * std::tan(params.glide_path_deg * kDegToRad);
  } else if (b == "cruise") {
    s.phase = Phase::cruise;
    s.ground_speed_mps = spec.initial_behavior.speed_mps.value_or(params.cruise_speed_mps);
    s.vertical_speed_mps = spec.initial_behavior.vertical_speed_mps.value_or(0.0);
  } else if (b == "drive") {
    s.phase = Phase::drive;
  } else if (b == "walk") {
    s.phase = Phase::walk;
  } else if (b == "fly") {
    s.phase = Phase::fly;
  } else if (b == "stand") {
    s.phase = Phase::stand;
  } else {
    s.phase = Phase::stop;
  }
  return s;
}

ActorState step(const ActorState& state, TimeMs dt_ms, TimeMs now_ms, const ActorParams& params,
                const std::vector<Runway>& runways) {
  ActorState s = state;
  const double dt = static_cast<double>(dt_ms) / 1000.0;
  const Runway* rwy = s.runway_end ? runway_by_end(runways, *s.runway_end) : nullptr;

  switch (s.phase) {
    case Phase::holding_short:
    case Phase::line_up_wait:
    case Phase::stop:
    case Phase::stand:
    case Phase::tower:
      s.ground_speed_mps = 0.0;
      s.vertical_speed_mps = 0.0;
      break;

    case Phase::lineup: {
      if (!rwy || s.held) {
        s.ground_speed_mps = 0.0;
        break;
      }
      const double along = std::clamp(rwy->along(s.position), 0.0, rwy->length());
      const Vec3 target = rwy->point_at(along, 0.0);
      const double v = std::min(s.ground_speed_mps + params.accel_mps2 * dt, params.taxi_speed_mps);
      const double avg = 0.5 * (s.ground_speed_mps + v);
      Vec3 pos = s.position;
      const Vec3 d = target - pos;
      if (norm_xy(d) > 1e-9) s.heading_deg = heading_of(d);
      const bool reached = advance_toward(pos, target, avg * dt, false);
      if (blocked_by_hold(s, s.position, pos, params, runways)) {
        s.held = true;
        s.ground_speed_mps = 0.0;
        break;
      }
      s.position = pos;
      s.ground_speed_mps = v;
      if (reached) {
        s.heading_deg = rwy->heading(*s.runway_end);
        if (s.takeoff_after_lineup) {
          set_phase(s, Phase::takeoff_roll, now_ms);
        } else {
          s.ground_speed_mps = 0.0;
          set_phase(s, Phase::line_up_wait, now_ms);
        }
      }
      break;
    }

    case Phase::takeoff_roll:
      s.vertical_speed_mps = 0.0;
      roll(s, params.accel_mps2, dt);
      if (s.ground_speed_mps >= params.rotation_speed_mps) set_phase(s, Phase::rotate, now_ms);
      break;

    case Phase::rotate:
      roll(s, params.accel_mps2, dt);
      if (now_ms - s.phase_since_ms >= params.rotate_ms) {
        set_phase(s, Phase::climb_out, now_ms);
        s.vertical_speed_mps = params.climb_rate_mps;
      }
      break;

    case Phase::climb_out: {
      const double top = s.target_altitude_m.value_or(params.climb_out_altitude_m);
      s.vertical_speed_mps = params.climb_rate_mps;
      s.position += heading_vector(s.heading_deg) * (s.ground_speed_mps * dt);
      s.position.z = std::min(top, s.position.z + params.climb_rate_mps * dt);
      if (s.position.z >= top) {
        s.vertical_speed_mps = 0.0;
        set_phase(s, Phase::cruise, now_ms);
      }
      break;
    }

    case Phase::cruise:
    case Phase::go_around: {
      double vs = s.vertical_speed_mps;
      if (s.phase == Phase::go_around) {
        vs = params.climb_rate_mps;
        if (!s.target_altitude_m) s.target_altitude_m = params.climb_out_altitude_m / 2.0;
      }
      if (s.target_altitude_m) {
        const double err = *s.target_altitude_m - s.position.z;
        const double rate = std::min(params.climb_rate_mps, std::abs(err) / dt);
        vs = err >= 0.0 ? rate : -rate;
      }
      vs = std::clamp(vs, -params.climb_rate_mps, params.climb_rate_mps);
      s.position += heading_vector(s.heading_deg) * (s.ground_speed_mps * dt);
      s.position.z = std::max(0.0, s.position.z + vs * dt);
      s.vertical_speed_mps = vs;
      if (s.phase == Phase::go_around && s.target_altitude_m && std::abs(*s.target_altitude_m - s.position.z) < 1e-6) {
        s.vertical_speed_mps = 0.0;
        set_phase(s, Phase::cruise, now_ms);
      }
      break;
    }

    case Phase::glide:
    case Phase::flare: {
      if (rwy) {
        const Vec3 thr = rwy->threshold(*s.runway_end);
        const Vec3 dir = rwy->direction(*s.runway_end);
        const double along = dot(flat(s.position - thr), dir);
        if (along < -1.0) {
          s.heading_deg = heading_of(flat(thr - s.position));
        } else {
          s.heading_deg = rwy->heading(*s.runway_end);
        }
      }
      const double vs = s.phase == Phase::glide ? -s.ground_speed_mps * std::tan(params.glide_path_deg * kDegToRad)
                                                : -params.flare_sink_mps;
      s.vertical_speed_mps = vs;
      s.position += heading_vector(s.heading_deg) * (s.ground_speed_mps * dt);
      s.position.z = std::max(0.0, s.position.z + vs * dt);
      if (s.phase == Phase::glide && s.position.z <= params.flare_height_m) {
        set_phase(s, Phase::flare, now_ms);
      } else if (s.phase == Phase::flare && s.position.z <= 0.0) {
        s.vertical_speed_mps = 0.0;
        set_phase(s, Phase::rollout, now_ms);
      }
      break;
    }

    case Phase::rollout:
      s.vertical_speed_mps = 0.0;
      roll(s, -params.decel_mps2, dt);
      if (s.ground_speed_mps <= params.vacate_speed_mps) {
        set_phase(s, Phase::vacate, now_ms);
        if (rwy) s.heading_deg = wrap_heading(rwy->heading(*s.runway_end) + 90.0);
      }
      break;

    case Phase::vacate: {
      const double v = std::max(params.taxi_speed_mps, s.ground_speed_mps - params.decel_mps2 * dt);
      s.position += heading_vector(s.heading_deg) * (0.5 * (s.ground_speed_mps + v) * dt);
      s.ground_speed_mps = v;
      if (!rwy || !rwy->in_protected_area(s.position, params.protected_lateral_m + 20.0)) {
        s.ground_speed_mps = 0.0;
        set_phase(s, Phase::stop, now_ms);
      }
      break;
    }

    case Phase::rejected_takeoff:
      roll(s, -params.decel_mps2, dt);
      if (s.ground_speed_mps <= 0.0) set_phase(s, Phase::stop, now_ms);
      break;

    case Phase::drive:
      step_path(s, dt, now_ms, params, runways, Phase::stop);
      break;
    case Phase::walk:
      step_path(s, dt, now_ms, params, runways, Phase::stand);
      break;
    case Phase::fly:
      step_path(s, dt, now_ms, params, runways, Phase::stand);
      break;
  }
  return s;
}

namespace {

bool executable_in(const ActorState& s, Action action) {
  const Phase p = s.phase;
  if (s.cls == ActorClass::vehicle) {
    return action == Action::hold_short || action == Action::proceed || action == Action::stop;
  }
  if (s.cls != ActorClass::aircraft) return false;
  switch (action) {
    case Action::cleared_for_takeoff:
      return p == Phase::holding_short || p == Phase::line_up_wait || p == Phase::lineup || p == Phase::stop;
    case Action::line_up_and_wait:
      return p == Phase::holding_short || p == Phase::stop;
    case Action::cleared_to_land:
      return p == Phase::glide || p == Phase::flare || p == Phase::cruise || p == Phase::go_around;
    case Action::hold_short:
    case Action::proceed:
    case Action::stop:
      return !is_airborne(p) && p != Phase::takeoff_roll && p != Phase::rotate;
    case Action::cancel_takeoff_clearance:
      return p == Phase::holding_short || p == Phase::lineup || p == Phase::line_up_wait || p == Phase::takeoff_roll;
    case Action::climb_maintain:
    case Action::descend_maintain:
      return is_airborne(p);
    case Action::go_around:
      return p == Phase::glide || p == Phase::flare;
  }
  return false;
}

void apply_command(ActorState& s, const BehaviorCommand& cmd, TimeMs now, const std::vector<Runway>& runways) {
  const Runway* cmd_rwy = cmd.runway ? runway_by_end(runways, *cmd.runway) : nullptr;
  switch (cmd.action) {
    case Action::cleared_for_takeoff:
      s.runway_end = cmd.runway;
      if (s.hold_short_runway && cmd_rwy && *s.hold_short_runway == cmd_rwy->id) s.hold_short_runway.reset();
      s.held = false;
      s.takeoff_after_lineup = true;
      if (s.phase == Phase::line_up_wait) {
        if (cmd_rwy) s.heading_deg = cmd_rwy->heading(*cmd.runway);
        set_phase(s, Phase::takeoff_roll, now);
      } else if (s.phase != Phase::lineup) {
        set_phase(s, Phase::lineup, now);
      }
      break;
    case Action::line_up_and_wait:
      s.runway_end = cmd.runway;
      if (s.hold_short_runway && cmd_rwy && *s.hold_short_runway == cmd_rwy->id) s.hold_short_runway.reset();
      s.held = false;
      s.takeoff_after_lineup = false;
      set_phase(s, Phase::lineup, now);
      break;
    case Action::cleared_to_land:
      break;
    case Action::hold_short:
      if (cmd_rwy) s.hold_short_runway = cmd_rwy->id;
      break;
    case Action::cancel_takeoff_clearance:
      s.takeoff_after_lineup = false;
      std::erase_if(s.pending_clearances, [](const BehaviorCommand& c) { return c.action == Action::cleared_for_takeoff; });
      if (s.phase == Phase::takeoff_roll || s.phase == Phase::lineup) set_phase(s, Phase::rejected_takeoff, now);
      break;
    case Action::climb_maintain:
    case Action::descend_maintain:
      if (cmd.altitude_ft) s.target_altitude_m = *cmd.altitude_ft * 0.3048;
      break;
    case Action::go_around:
      std::erase_if(s.pending_clearances, [](const BehaviorCommand& c) { return c.action == Action::cleared_to_land; });
      set_phase(s, Phase::go_around, now);
      break;
    case Action::proceed:
      s.hold_short_runway.reset();
      s.held = false;
      if (s.phase == Phase::stop && s.path_index < s.path.size()) {
        set_phase(s, s.cls == ActorClass::vehicle ? Phase::drive : Phase::walk, now);
      }
      break;
    case Action::stop:
      s.held = true;
      s.ground_speed_mps = 0.0;
      if (s.cls == ActorClass::aircraft && s.phase == Phase::lineup) set_phase(s, Phase::stop, now);
      break;
  }
}

}  // namespace

std::pair<ActorState, std::optional<RadioReply>> receive_command(const ActorState& state, const ParsedSlots& slots,
                                                                 double slot_conf, double tau, TimeMs now_ms,
                                                                 const std::vector<Runway>& runways) {
  const std::string own = state.callsign.value_or(state.actor_id);
  if (!slots.action && slots.ack != Acknowledgement::none) return {state, std::nullopt};
  if (!slots.action || slot_conf < tau) {
    RadioReply reply;
    reply.kind = RadioReply::Kind::say_again;
    reply.text = "say again, " + own;
    return {state, reply};
  }

  ActorState s = state;
  s.last_instruction_conf = slot_conf;
  BehaviorCommand cmd{*slots.action, slots.runway, slots.altitude_ft, now_ms};
  Instruction instr{own, cmd.action, cmd.runway, cmd.altitude_ft};

  const bool runway_ok = !is_runway_scoped(cmd.action) || (cmd.runway && runway_by_end(runways, *cmd.runway));
  const bool altitude_ok = !is_altitude_scoped(cmd.action) || cmd.altitude_ft.has_value();
  if (!executable_in(s, cmd.action) || !runway_ok || !altitude_ok) {
    RadioReply reply;
    reply.kind = RadioReply::Kind::unable;
    reply.text = "unable, " + own;
    reply.instruction = instr;
    reply.executable = false;
    return {s, reply};
  }

  apply_command(s, cmd, now_ms, runways);
  s.pending_clearances.push_back(cmd);
  RadioReply reply;
  reply.kind = RadioReply::Kind::readback;
  reply.instruction = instr;
  reply.text = render_readback(instr);
  return {s, reply};
}

RadioReply inject_readback_error(const RadioReply& reply, ReadbackFault fault, RandomStream& /*stream*/,
                                 const std::optional<std::string>& script_callsign) {
  if (fault == ReadbackFault::none || reply.kind != RadioReply::Kind::readback || !reply.instruction) return reply;
  RadioReply out = reply;
  Instruction instr = *reply.instruction;
  if (fault == ReadbackFault::bad_readback) {
    if (!instr.runway) return reply;
    instr.runway = reciprocal_runway(*instr.runway);
  } else if (fault == ReadbackFault::misaddressed) {
    if (!script_callsign) return reply;
    instr.callsign = *script_callsign;
  }
  out.instruction = instr;
  out.text = render_readback(instr);
  return out;
}

}  // namespace hilt
