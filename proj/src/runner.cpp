#include "hilt/runner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hilt {

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json track_json(const Track& t) {
  return {{"actor_id", t.actor_id},         {"callsign", t.callsign},
          {"position", vec_json(t.position)}, {"ground_speed_mps", t.ground_speed_mps},
          {"vertical_speed_mps", t.vertical_speed_mps}, {"heading_deg", t.heading_deg}};
}

json detection_json(const Detection& d) {
  json j = {{"class_label", to_string(d.class_label)},
            {"confidence", d.confidence},
            {"bbox", json::array({d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h})},
            {"range_m", d.range_m},
            {"actor_id_truth", d.actor_id_truth}};
  j["ground_point"] = d.ground_point ? json::array({d.ground_point->x, d.ground_point->y}) : json(nullptr);
  return j;
}

json actor_json(const ActorState& a) {
  return {{"actor_id", a.actor_id},
          {"phase", to_string(a.phase)},
          {"position", vec_json(a.position)},
          {"heading_deg", a.heading_deg},
          {"ground_speed_mps", a.ground_speed_mps},
          {"vertical_speed_mps", a.vertical_speed_mps}};
}

json turn_json(const RadioTurn& t) {
  return {{"turn_id", t.turn_id},
          {"t_tx_ms", t.t_tx_ms},
          {"frequency", t.frequency},
          {"speaker", t.speaker},
          {"addressed_to", t.addressed_to ? json(*t.addressed_to) : json(nullptr)},
          {"clean_text", t.clean_text},
          {"degraded_text", t.degraded_text},
          {"snr_db", t.snr_db},
          {"overheard_by", t.overheard_by},
          {"provenance", t.provenance},
          {"not_received_by", t.not_received_by}};
}

Track truth_track(const ActorState& a, TimeMs now) {
  Track t;
  t.actor_id = a.actor_id;
  t.callsign = a.callsign.value_or("");
  t.t_adsb_in_ms = t.t_adsb_out_ms = now;
  t.position = a.position;
  t.ground_speed_mps = a.ground_speed_mps;
  t.vertical_speed_mps = a.vertical_speed_mps;
  t.heading_deg = a.heading_deg;
  return t;
}

std::string interval_key(const std::string& actor, const std::string& runway, IntervalKind kind) {
  return actor + "|" + runway + "|" + (kind == IntervalKind::authorization ? "authorization" : "occupancy");
}

bool is_release(Action a) {
  return a == Action::cancel_takeoff_clearance || a == Action::go_around || a == Action::stop ||
         a == Action::hold_short;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

ScenarioSpec prepare_scenario(const ScenarioSpec& raw, std::uint64_t seed, std::optional<double> visibility_m,
                              std::optional<double> snr_db) {
  ScenarioSpec s = expand_variant(raw, seed);
  if (visibility_m) s.environment.visibility_m = *visibility_m;
  if (snr_db) {
    s.environment.snr_db = *snr_db;
    for (auto& t : s.comm_timeline) t.snr_db.reset();
  }
  return s;
}

Director::Director(ScenarioSpec spec, RunOptions options)
    : spec_(std::move(spec)),
      options_(std::move(options)),
      kernel_(options_.mode, options_.pace),
      engine_(spec_, options_.config) {
  engine_.set_decision_plugin(options_.plugins.decision);
  for (const auto& f : spec_.geometry.frequencies) bus_.add_frequency(f);
  for (const auto& a : spec_.actors) {
    actors_.push_back(initial_state(a, options_.config));
    params_.push_back(resolve_params(a, options_.config));
    equipped_.push_back(a.adsb_equipped);
    if (a.cls != ActorClass::wildlife) bus_.subscribe(a.actor_id, a.frequency, a.overhear);
    if (a.callsign && a.cls != ActorClass::atc) roster_.push_back(*a.callsign);
  }
  ledger_.conflict_expected = spec_.conflict.expected;
}

Director::~Director() = default;

std::optional<std::size_t> Director::actor_index(const std::string& actor_id) const {
  for (std::size_t i = 0; i < spec_.actors.size(); ++i) {
    if (spec_.actors[i].actor_id == actor_id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Director::actor_by_callsign(const std::string& callsign) const {
  for (std::size_t i = 0; i < spec_.actors.size(); ++i) {
    if (spec_.actors[i].callsign == callsign && spec_.actors[i].cls != ActorClass::atc) return i;
  }
  return std::nullopt;
}

double Director::turn_snr(const std::optional<double>& scripted) const {
  return scripted.value_or(spec_.environment.snr_db);
}

std::string Director::next_turn_id(const std::string& prefix) {
  const int n = ++turn_counters_[prefix];
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%03d", n);
  return prefix + buf;
}

RunResult Director::run() {
  RunResult r;
  r.scenario_id = spec_.scenario_id;
  r.seed = options_.seed;
  if (options_.stop_after_dispatches) {
    const std::uint64_t n = *options_.stop_after_dispatches;
    kernel_.set_dispatch_observer([this, n](TimeMs, std::uint64_t, const std::string&) {
      if (kernel_.dispatched_total() >= n) kernel_.request_stop();
    });
    if (n == 0) kernel_.request_stop();
  }
  try {
    start();
    kernel_.run_until(spec_.duration_ms);
    if (!finished_) {
      // Stopped on request; the dispatch count lets a replay stop at the same event.
      log_.append(kernel_.now(), "run_stopped", {{"dispatched", kernel_.dispatched_total()}});
      r.error = "stopped before the scenario ended";
    }
  } catch (const SimulationError& e) {
    r.error = std::string(e.what()) + " (event " + e.kind() + " at " + std::to_string(e.at_ms()) + " ms)";
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.finished = finished_;
  r.ledger = ledger_;
  r.metrics = compute_latencies(ledger_);
  if (!r.error.empty()) r.metrics.diagnostics.push_back(r.error);
  r.advisories = advisories_;
  r.trace = trace_;
  r.t_conflict_ms = ledger_.t_conflict_ms;
  return r;
}

void Director::start() {
  const RunConfig& cfg = options_.config;
  log_.append(0, "run_start",
              {{"scenario", to_json(spec_)},
               {"config", to_json(cfg)},
               {"seed", options_.seed},
               {"mode", to_string(options_.logged_mode.value_or(options_.mode))},
               {"plugins",
                {{"asr", options_.plugins.asr != nullptr},
                 {"vision", options_.plugins.vision != nullptr},
                 {"decision", options_.plugins.decision != nullptr},
                 {"nlg", options_.plugins.nlg != nullptr}}}});
  update_truth_intervals(0);

  if (cfg.tick_ms < spec_.duration_ms) {
    kernel_.schedule(cfg.tick_ms, "tick", [this](Kernel& k) { tick(k.now()); });
  }
  for (const auto& tx : spec_.comm_timeline) {
    if (tx.at_ms < spec_.duration_ms) {
      kernel_.schedule(tx.at_ms, "radio_tx", [this, &tx](Kernel&) { scripted_transmission(tx); });
    }
  }
  kernel_.schedule(0, "adsb_sample", [this](Kernel& k) { sample_adsb(k.now()); });
  for (std::size_t c = 0; c < spec_.cameras.size(); ++c) {
    kernel_.schedule(0, "camera_frame", [this, c](Kernel& k) { sample_camera(c, 0, k.now()); });
  }
  kernel_.schedule(0, "actor_state", [this](Kernel& k) { log_actor_states(k.now()); });
  kernel_.schedule(spec_.duration_ms, "run_end", [this](Kernel& k) { end_run(k.now()); });
}

// ---------------------------------------------------------------------------
// Human roles

void Director::validate_claim(const std::string& session_id, const std::string& actor_id) const {
  const ActorSpec* a = spec_.find_actor(actor_id);
  if (!a) throw RoleError(RoleError::Kind::not_found, "unknown actor " + actor_id);
  if (a->cls != ActorClass::aircraft && a->cls != ActorClass::atc) {
    throw RoleError(RoleError::Kind::unclaimable, actor_id + " is not a pilot or controller role");
  }
  if (auto it = projected_claims_.find(actor_id); it != projected_claims_.end()) {
    throw RoleError(RoleError::Kind::conflict, actor_id + " is already claimed by session " + it->second);
  }
  if (projected_sessions_.contains(session_id)) {
    throw RoleError(RoleError::Kind::conflict, "session " + session_id + " already holds a role");
  }
}

void Director::claim_role(const std::string& session_id, const std::string& actor_id) {
  if (finished_) throw RoleError(RoleError::Kind::invalid, "run has ended");
  validate_claim(session_id, actor_id);
  projected_claims_[actor_id] = session_id;
  projected_sessions_[session_id] = actor_id;
  HumanAction h;
  h.is_claim = true;
  h.session_id = session_id;
  h.actor_id = actor_id;
  pending_human_.push_back(std::move(h));
}

std::string Director::transmit(const std::string& session_id, const std::string& frequency,
                               const std::optional<std::string>& addressed_to, const std::string& text) {
  if (finished_) throw RoleError(RoleError::Kind::invalid, "run has ended");
  auto it = projected_sessions_.find(session_id);
  if (it == projected_sessions_.end()) {
    throw RoleError(RoleError::Kind::not_claimed, "session " + session_id + " holds no role");
  }
  if (blank(text)) throw RoleError(RoleError::Kind::invalid, "empty transmission");
  if (!bus_.knows_frequency(frequency)) throw RoleError(RoleError::Kind::invalid, "unknown frequency " + frequency);
  // Addressee by callsign, as scripted turns carry it, or by actor id.
  std::optional<std::string> to;
  if (addressed_to) {
    if (spec_.find_by_callsign(*addressed_to)) {
      to = addressed_to;
    } else if (const ActorSpec* a = spec_.find_actor(*addressed_to); a && a->callsign) {
      to = a->callsign;
    } else {
      throw RoleError(RoleError::Kind::invalid, "unknown addressee " + *addressed_to);
    }
  }
  HumanAction h;
  h.session_id = session_id;
  h.actor_id = it->second;
  h.turn_id = next_turn_id("human");
  h.frequency = frequency;
  h.addressed_to = to;
  h.text = text;
  pending_human_.push_back(h);
  return h.turn_id;
}

std::optional<std::string> Director::claimed_actor(const std::string& session_id) const {
  auto it = projected_sessions_.find(session_id);
  if (it == projected_sessions_.end()) return std::nullopt;
  return it->second;
}

void Director::schedule_claim(TimeMs at_ms, const std::string& session_id, const std::string& actor_id) {
  claim_role(session_id, actor_id);
  pending_human_.back().apply_at_ms = at_ms;
}

void Director::schedule_human_turn(TimeMs at_ms, const std::string& session_id, const std::string& frequency,
                                   const std::optional<std::string>& addressed_to, const std::string& text) {
  transmit(session_id, frequency, addressed_to, text);
  pending_human_.back().apply_at_ms = at_ms;
}

void Director::apply_human_actions(TimeMs now) {
  std::vector<HumanAction> keep;
  std::vector<HumanAction> due;
  for (auto& h : pending_human_) {
    if (h.apply_at_ms && *h.apply_at_ms > now) {
      keep.push_back(std::move(h));
    } else {
      due.push_back(std::move(h));
    }
  }
  pending_human_ = std::move(keep);
  for (auto& h : due) {
    if (h.is_claim) {
      claims_[h.actor_id] = h.session_id;
      session_claims_[h.session_id] = h.actor_id;
      log_.append(now, "role_claim", {{"session_id", h.session_id}, {"actor_id", h.actor_id}});
      continue;
    }
    RadioTurn t;
    t.turn_id = h.turn_id;
    t.t_tx_ms = now;
    t.frequency = h.frequency;
    t.speaker = h.actor_id;
    t.addressed_to = h.addressed_to;
    t.clean_text = h.text;
    t.snr_db = turn_snr(std::nullopt);
    t.provenance = "human";
    send_turn(std::move(t), ReadbackFault::none, std::nullopt);
  }
}

// ---------------------------------------------------------------------------
// Periodic events

void Director::tick(TimeMs now) {
  if (finished_) return;
  const TimeMs dt = options_.config.tick_ms;
  apply_human_actions(now);
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    if (actors_[i].cls == ActorClass::atc) continue;
    actors_[i] = step(actors_[i], dt, now, params_[i], spec_.geometry.runways);
  }
  update_truth_intervals(now);
  if (spec_.scene == SceneType::enroute) check_separation(now);
  handle_engine_events(engine_.on_tick(now), now);
  if (now + dt < spec_.duration_ms) kernel_.schedule(now + dt, "tick", [this](Kernel& k) { tick(k.now()); });
}

void Director::sample_adsb(TimeMs now) {
  if (finished_) return;
  RandomStream lat = derive_stream(options_.seed, "adsb_latency").substream(std::to_string(now));
  const TimeMs latency = options_.config.latency.adsb.sample(lat);
  auto tracks = emit_tracks(actors_, equipped_, now, latency);
  kernel_.schedule(now + latency, "adsb_out", [this, tracks = std::move(tracks), now, latency](Kernel& k) {
    if (finished_) return;
    json list = json::array();
    for (const auto& t : tracks) list.push_back(track_json(t));
    log_.append(k.now(), "adsb", {{"t_adsb_in_ms", now}, {"t_adsb_out_ms", now + latency}, {"tracks", list}});
    for (std::size_t i = 0; i < tracks.size(); ++i) ledger_.adsb.push_back({now, now + latency});
    handle_engine_events(engine_.on_tracks(tracks, k.now()), k.now());
  });
  const TimeMs period = std::max<TimeMs>(1, std::llround(1000.0 / options_.config.adsb.hz));
  if (now + period < spec_.duration_ms) {
    kernel_.schedule(now + period, "adsb_sample", [this](Kernel& k) { sample_adsb(k.now()); });
  }
}

void Director::sample_camera(std::size_t camera_index, std::uint64_t frame_index, TimeMs now) {
  if (finished_) return;
  const CameraSpec& cam = spec_.cameras[camera_index];
  const ActorState* mount = nullptr;
  if (cam.mounted_on) {
    if (auto i = actor_index(*cam.mounted_on)) mount = &actors_[*i];
  }
  const std::string key = cam.camera_id + "#" + std::to_string(frame_index);
  FrameContext ctx;
  ctx.camera = &cam;
  ctx.pose = camera_pose(cam, mount);
  ctx.actors = &actors_;
  ctx.t_frame_ms = now;
  ctx.visibility_m = spec_.environment.visibility_m;
  ctx.range_scale = cam.range_scale;
  RandomStream lat = derive_stream(options_.seed, "vision_latency").substream(key);
  ctx.latency_ms = options_.config.latency.vision.sample(lat);

  std::vector<Detection> dets;
  bool from_plugin = false;
  if (options_.plugins.vision) {
    json actors = json::array();
    for (const auto& a : actors_) {
      if (a.cls != ActorClass::atc) actors.push_back(actor_json(a));
    }
    json req = {{"camera_id", cam.camera_id},
                {"frame_index", frame_index},
                {"t_frame_ms", now},
                {"pose",
                 {{"position", vec_json(ctx.pose.position)},
                  {"yaw_deg", ctx.pose.yaw_deg},
                  {"pitch_deg", ctx.pose.pitch_deg}}},
                {"fov_deg", cam.fov_deg},
                {"actors", actors}};
    PluginFailure failure;
    if (auto res = options_.plugins.vision->detect(req, failure)) {
      dets = std::move(res->detections);
      ctx.latency_ms = res->latency_ms;
      from_plugin = true;
    } else {
      log_.append(now, "plugin_fallback",
                  {{"role", "vision"}, {"camera_id", cam.camera_id}, {"status", failure.status},
                   {"diagnostic", failure.diagnostic}});
    }
  }
  if (!from_plugin) {
    RandomStream noise = derive_stream(options_.seed, "vision_noise").substream(key);
    dets = simulate_frame(ctx, options_.config.vision, noise);
  }
  const TimeMs t_vision = now + ctx.latency_ms;
  kernel_.schedule(t_vision, "vision_out", [this, camera_index, frame_index, now, t_vision,
                                            dets = std::move(dets)](Kernel& k) {
    if (finished_) return;
    const std::string& id = spec_.cameras[camera_index].camera_id;
    if (!dets.empty()) {
      json list = json::array();
      double nearest = dets.front().range_m;
      for (const auto& d : dets) {
        list.push_back(detection_json(d));
        nearest = std::min(nearest, d.range_m);
      }
      log_.append(k.now(), "vision",
                  {{"camera_id", id}, {"frame_index", frame_index}, {"t_frame_ms", now}, {"t_vision_ms", t_vision},
                   {"detections", list}});
      ledger_.frames.push_back({id, now, t_vision});
      if (!ledger_.first_detection_range_m) ledger_.first_detection_range_m = nearest;
    }
    handle_engine_events(engine_.on_frame(id, frame_index, dets, k.now()), k.now());
  });
  const TimeMs period = std::max<TimeMs>(1, std::llround(1000.0 / cam.sample_hz));
  if (now + period < spec_.duration_ms) {
    kernel_.schedule(now + period, "camera_frame",
                     [this, camera_index, frame_index](Kernel& k) { sample_camera(camera_index, frame_index + 1, k.now()); });
  }
}

void Director::log_actor_states(TimeMs now) {
  if (finished_) return;
  json list = json::array();
  for (const auto& a : actors_) {
    if (a.cls != ActorClass::atc) list.push_back(actor_json(a));
  }
  log_.append(now, "actor_state", {{"actors", list}});
  if (now + 1000 < spec_.duration_ms) {
    kernel_.schedule(now + 1000, "actor_state", [this](Kernel& k) { log_actor_states(k.now()); });
  }
}

// ---------------------------------------------------------------------------
// Radio

void Director::scripted_transmission(const ScriptedTransmission& tx) {
  if (finished_) return;
  if (claims_.contains(tx.speaker)) {
    log_.append(kernel_.now(), "script_suppressed", {{"turn_id", tx.turn_id}, {"speaker", tx.speaker}});
    return;
  }
  RadioTurn t;
  t.turn_id = tx.turn_id;
  t.t_tx_ms = kernel_.now();
  t.frequency = tx.frequency;
  t.speaker = tx.speaker;
  t.addressed_to = tx.addressed_to;
  t.clean_text = tx.text;
  t.snr_db = turn_snr(tx.snr_db);
  t.not_received_by = tx.not_received_by;
  t.provenance = "scripted";
  send_turn(std::move(t), tx.readback_fault, tx.addressed_to);
}

void Director::send_turn(RadioTurn turn, ReadbackFault fault, const std::optional<std::string>& script_callsign) {
  const RunConfig& cfg = options_.config;
  const TimeMs now = kernel_.now();
  RandomStream noise = derive_stream(options_.seed, "asr_noise").substream(turn.turn_id);
  RandomStream lat = derive_stream(options_.seed, "asr_latency").substream(turn.turn_id);
  AsrResult asr = simulate_asr(turn, cfg, noise, lat);
  turn.degraded_text = asr.channel_text;
  std::string asr_source = "builtin";
  if (options_.plugins.asr) {
    json req = {{"turn_id", turn.turn_id},
                {"t_tx_ms", turn.t_tx_ms},
                {"frequency", turn.frequency},
                {"text", turn.clean_text},
                {"snr_db", turn.snr_db}};
    PluginFailure failure;
    if (auto res = options_.plugins.asr->transcribe(req, failure)) {
      asr.transcript = res->transcript;
      asr.confidence = res->confidence;
      asr.t_asr_out_ms = turn.t_tx_ms + res->latency_ms;
      asr_source = "plugin";
    } else {
      log_.append(now, "plugin_fallback",
                  {{"role", "asr"}, {"turn_id", turn.turn_id}, {"status", failure.status},
                   {"diagnostic", failure.diagnostic}});
    }
  }

  const auto deliveries = bus_.transmit(turn, speech_duration_ms(turn.clean_text, cfg.channel.speech_ms_per_word));
  json payload = turn_json(turn);
  json receivers = json::array();
  for (const auto& d : deliveries) {
    receivers.push_back({{"actor_id", d.receiver}, {"overheard", d.overheard}, {"receive_at_ms", d.receive_at_ms}});
  }
  payload["receivers"] = receivers;
  log_.append(now, "radio_turn", payload);
  ledger_.turns.push_back({turn.turn_id, turn.t_tx_ms, std::nullopt});

  // Authorization opens when the controller grants it.
  const ActorSpec* speaker = spec_.find_actor(turn.speaker);
  if (speaker && speaker->cls == ActorClass::atc) {
    const ParsedSlots slots = resolve_recipient(parse_phraseology(turn.clean_text), roster_);
    if (slots.callsign && slots.action && grants_runway_authorization(*slots.action) && slots.runway) {
      const auto idx = actor_by_callsign(*slots.callsign);
      const Runway* rw = spec_.find_runway_by_end(*slots.runway);
      if (idx && rw) {
        open_interval(spec_.actors[*idx].actor_id, rw->id, IntervalKind::authorization, now,
                      "clearance:" + turn.turn_id);
      }
    }
    if (slots.callsign && slots.action) last_atc_instruction_[*slots.callsign] = turn.clean_text;
  }

  turns_[turn.turn_id] = turn;
  kernel_.schedule(asr.t_asr_out_ms, "asr_out", [this, asr, asr_source, id = turn.turn_id](Kernel& k) {
    if (finished_) return;
    log_.append(k.now(), "asr_out",
                {{"turn_id", asr.turn_id},
                 {"t_tx_ms", asr.t_tx_ms},
                 {"t_asr_out_ms", asr.t_asr_out_ms},
                 {"transcript", asr.transcript},
                 {"confidence", asr.confidence},
                 {"source", asr_source}});
    for (auto& t : ledger_.turns) {
      if (t.turn_id == asr.turn_id) t.t_asr_out_ms = asr.t_asr_out_ms;
    }
    handle_engine_events(engine_.on_transcript(asr, turns_.at(id), k.now()), k.now());
  });
  for (const auto& d : deliveries) {
    kernel_.schedule(d.receive_at_ms, "radio_rx",
                     [this, id = turn.turn_id, d, fault, script_callsign](Kernel&) {
                       if (finished_) return;
                       on_receive(turns_.at(id), d.receiver, d.overheard, fault, script_callsign);
                     });
  }
}

void Director::on_receive(const RadioTurn& turn, const std::string& receiver, bool overheard, ReadbackFault fault,
                          const std::optional<std::string>& script_callsign) {
  const auto idx = actor_index(receiver);
  if (!idx) return;
  const ActorSpec& me = spec_.actors[*idx];
  const RunConfig& cfg = options_.config;
  const TimeMs now = kernel_.now();
  RandomStream ear = derive_stream(options_.seed, "listener_noise").substream(turn.turn_id + "@" + receiver);
  const DegradeResult heard = degrade(turn.clean_text, turn.snr_db + cfg.channel.listener_gain_db, cfg.channel, ear);
  const ParsedSlots slots = resolve_recipient(parse_phraseology(heard.text), roster_);
  const ActorSpec* speaker = spec_.find_actor(turn.speaker);
  const bool claimed = claims_.contains(receiver);

  if (me.cls == ActorClass::atc) {
    if (claimed || overheard || !slots.callsign || !speaker || speaker->cls == ActorClass::atc) return;
    const std::string cs = *slots.callsign;
    if (slots.ack == Acknowledgement::say_again) {
      auto it = last_atc_instruction_.find(cs);
      if (it == last_atc_instruction_.end() || atc_repeated_.contains(turn.turn_id)) return;
      atc_repeated_.insert(turn.turn_id);
      const std::string text = it->second;
      kernel_.schedule(now + cfg.actors.reply_delay_ms, "atc_reply", [this, i = *idx, text, in = turn.turn_id](Kernel&) {
        if (!finished_) actor_reply(i, text, in);
      });
    } else if (slots.action) {
      const std::string text = "roger, " + cs;
      kernel_.schedule(now + cfg.actors.reply_delay_ms, "atc_reply", [this, i = *idx, text, in = turn.turn_id](Kernel&) {
        if (!finished_) actor_reply(i, text, in);
      });
    }
    return;
  }

  // Pilots and drivers act only on controller instructions addressed to them.
  if (overheard || !speaker || speaker->cls != ActorClass::atc) return;
  if (!slots.callsign || !me.callsign || *slots.callsign != *me.callsign) return;
  last_instruction_rx_[receiver] = now;
  auto [state, reply] = receive_command(actors_[*idx], slots, slots.slot_conf, cfg.thresholds.tau_actor, now,
                                        spec_.geometry.runways);
  actors_[*idx] = state;
  json rx = {{"turn_id", turn.turn_id}, {"receiver", receiver}, {"heard_text", heard.text},
             {"slot_conf", slots.slot_conf}};
  rx["reply"] = reply ? json(to_string(reply->kind)) : json(nullptr);
  log_.append(now, "radio_rx", rx);

  if (reply && reply->kind == RadioReply::Kind::readback && reply->executable && slots.action &&
      is_release(*slots.action)) {
    for (const auto& rw : spec_.geometry.runways) {
      close_interval(receiver, rw.id, IntervalKind::authorization, now, "release:" + turn.turn_id);
    }
  }
  if (!reply || claimed) return;

  RadioReply out = *reply;
  if (out.kind == RadioReply::Kind::readback && fault != ReadbackFault::none) {
    RandomStream rs = derive_stream(options_.seed, "readback_fault").substream(turn.turn_id);
    out = inject_readback_error(out, fault, rs, script_callsign);
  }
  kernel_.schedule(now + cfg.actors.reply_delay_ms, "actor_reply",
                   [this, i = *idx, text = out.text, in = turn.turn_id](Kernel&) {
                     if (!finished_) actor_reply(i, text, in);
                   });
  if (out.kind == RadioReply::Kind::say_again && !reasked_.contains(turn.turn_id)) {
    reasked_.insert(turn.turn_id);
    const TimeMs asked_at = now;
    kernel_.schedule(now + cfg.actors.reply_delay_ms + cfg.actors.reask_ms, "actor_reask",
                     [this, i = *idx, text = out.text, in = turn.turn_id, asked_at](Kernel&) {
                       if (finished_) return;
                       if (last_instruction_rx_[spec_.actors[i].actor_id] > asked_at) return;
                       actor_reply(i, text, in);
                     });
  }
}

void Director::actor_reply(std::size_t actor_index, const std::string& text, const std::string& in_reply_to) {
  const ActorSpec& a = spec_.actors[actor_index];
  if (!a.frequency) return;
  RadioTurn t;
  t.turn_id = next_turn_id("auto-" + a.actor_id);
  t.t_tx_ms = kernel_.now();
  t.frequency = *a.frequency;
  t.speaker = a.actor_id;
  t.clean_text = text;
  t.snr_db = turn_snr(std::nullopt);
  t.provenance = "actor";
  (void)in_reply_to;
  send_turn(std::move(t), ReadbackFault::none, std::nullopt);
}

// ---------------------------------------------------------------------------
// Advisories

void Director::handle_engine_events(std::vector<EngineEvent> events, TimeMs now) {
  for (auto& e : events) {
    if (e.kind == EngineEvent::Kind::plugin_fallback) {
      log_.append(now, "plugin_fallback", {{"role", "decision"}, {"diagnostic", e.diagnostic}});
      continue;
    }
    Advisory adv = std::move(e.advisory);
    RandomStream lat = derive_stream(options_.seed, "decision_latency").substream(adv.advisory_id);
    adv.t_dec_ms = adv.t_ready_ms + options_.config.latency.decision.sample(lat);
    const TimeMs at = std::max(adv.t_dec_ms, now);
    kernel_.schedule(at, "advisory", [this, adv = std::move(adv)](Kernel&) mutable {
      if (!finished_) finalize_advisory(std::move(adv));
    });
  }
}

void Director::finalize_advisory(Advisory advisory) {
  const TimeMs now = kernel_.now();
  if (options_.plugins.nlg) {
    PluginFailure failure;
    if (auto m = options_.plugins.nlg->rewrite(to_json(advisory), failure)) {
      advisory.message = *m;
    } else {
      log_.append(now, "plugin_fallback",
                  {{"role", "nlg"}, {"advisory_id", advisory.advisory_id}, {"status", failure.status},
                   {"diagnostic", failure.diagnostic}});
    }
  }
  const Severity speak_min = options_.config.thresholds.speak_min;
  const bool spoken = should_speak(advisory.severity, speak_min);
  json payload = to_json(advisory);
  payload["spoken"] = spoken;
  log_.append(now, "advisory", payload);
  ledger_.advisories.push_back({advisory.advisory_id, advisory.severity, advisory.t_ready_ms, advisory.t_dec_ms, {}});
  advisories_.push_back(advisory);
  if (!spoken) return;
  RandomStream lat = derive_stream(options_.seed, "tts_latency").substream(advisory.advisory_id);
  const auto t_tts = deliver_tts(advisory.severity, advisory.t_dec_ms, speak_min, options_.config.latency.tts, lat);
  if (!t_tts) return;
  kernel_.schedule(std::max(*t_tts, now), "tts", [this, advisory, t = *t_tts](Kernel& k) {
    if (finished_) return;
    log_.append(k.now(), "tts",
                {{"advisory_id", advisory.advisory_id},
                 {"t_dec_ms", advisory.t_dec_ms},
                 {"t_tts_ms", t},
                 {"message", advisory.message},
                 {"recipients", advisory.recipients},
                 {"frequency", spec_.geometry.advisory_frequency}});
    for (auto& a : ledger_.advisories) {
      if (a.advisory_id == advisory.advisory_id) a.t_tts_ms = t;
    }
  });
}

// ---------------------------------------------------------------------------
// Ground truth

void Director::open_interval(const std::string& actor_id, const std::string& runway_id, IntervalKind kind,
                             TimeMs at_ms, const std::string& cause) {
  const std::string key = interval_key(actor_id, runway_id, kind);
  if (open_.contains(key)) return;
  open_[key] = trace_.intervals.size();
  trace_.intervals.push_back({actor_id, runway_id, kind, at_ms, std::nullopt});
  log_.append(at_ms, "interval",
              {{"event", "open"},
               {"actor_id", actor_id},
               {"runway", runway_id},
               {"kind", kind == IntervalKind::authorization ? "authorization" : "occupancy"},
               {"cause", cause}});
  check_conflict(runway_id, at_ms);
}

void Director::close_interval(const std::string& actor_id, const std::string& runway_id, IntervalKind kind,
                              TimeMs at_ms, const std::string& cause) {
  auto it = open_.find(interval_key(actor_id, runway_id, kind));
  if (it == open_.end()) return;
  trace_.intervals[it->second].close_ms = at_ms;
  open_.erase(it);
  log_.append(at_ms, "interval",
              {{"event", "close"},
               {"actor_id", actor_id},
               {"runway", runway_id},
               {"kind", kind == IntervalKind::authorization ? "authorization" : "occupancy"},
               {"cause", cause}});
}

void Director::update_truth_intervals(TimeMs now) {
  if (spec_.scene != SceneType::airport_surface) return;
  for (const auto& a : actors_) {
    if (a.cls == ActorClass::atc) continue;
    for (const auto& rw : spec_.geometry.runways) {
      const bool inside = in_protected_area(rw, a.position, options_.config.protected_area);
      const bool open = open_.contains(interval_key(a.actor_id, rw.id, IntervalKind::occupancy));
      if (inside && !open) {
        occupied_once_.insert(a.actor_id + "|" + rw.id);
        open_interval(a.actor_id, rw.id, IntervalKind::occupancy, now, "entered");
      } else if (!inside && open) {
        close_interval(a.actor_id, rw.id, IntervalKind::occupancy, now, "exited");
        close_interval(a.actor_id, rw.id, IntervalKind::authorization, now, "vacated");
      }
    }
  }
}

void Director::check_conflict(const std::string& runway_id, TimeMs now) {
  if (live_conflict_ms_) return;
  std::set<std::string> holders;
  for (const auto& [key, index] : open_) {
    const auto& iv = trace_.intervals[index];
    if (iv.runway_id == runway_id) holders.insert(iv.actor_id);
  }
  if (holders.size() < 2) return;
  live_conflict_ms_ = now;
  log_.append(now, "conflict",
              {{"runway", runway_id}, {"actors", std::vector<std::string>(holders.begin(), holders.end())}});
}

void Director::check_separation(TimeMs now) {
  if (trace_.first_predicted_loss_ms) return;
  const SeparationMinima minima = spec_.conflict.separation.value_or(
      SeparationMinima{options_.config.separation.horizontal_m, options_.config.separation.vertical_m});
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    if (actors_[i].cls != ActorClass::aircraft) continue;
    for (std::size_t j = i + 1; j < actors_.size(); ++j) {
      if (actors_[j].cls != ActorClass::aircraft) continue;
      const auto loss = predicted_loss_time(truth_track(actors_[i], now), truth_track(actors_[j], now),
                                            minima.horizontal_m, minima.vertical_m,
                                            options_.config.separation.lookahead_s);
      if (loss) {
        trace_.first_predicted_loss_ms = now;
        live_conflict_ms_ = now;
        log_.append(now, "conflict",
                    {{"actors", {actors_[i].actor_id, actors_[j].actor_id}}, {"t_loss_s", *loss}});
        return;
      }
    }
  }
}

void Director::end_run(TimeMs now) {
  if (finished_) return;
  const auto t_conflict = derive_conflict_open(spec_, trace_);
  ledger_.t_conflict_ms = t_conflict;
  std::string source = "none";
  if (spec_.conflict.t_conflict_ms) {
    source = "annotation";
  } else if (t_conflict) {
    source = "derived";
  }
  log_.append(now, "run_end",
              {{"t_end_ms", now},
               {"t_conflict_ms", t_conflict ? json(*t_conflict) : json(nullptr)},
               {"conflict_source", source},
               {"advisories", advisories_.size()},
               {"intervals", trace_.intervals.size()}});
  finished_ = true;
}

// ---------------------------------------------------------------------------

RunResult run_scenario(const ScenarioSpec& raw, std::uint64_t seed, const RunConfig& config, PluginSet plugins,
                       std::optional<double> visibility_m, std::optional<double> snr_db, std::string* log_text) {
  RunOptions opts;
  opts.seed = seed;
  opts.config = config;
  opts.plugins = plugins;
  Director d(prepare_scenario(raw, seed, visibility_m, snr_db), opts);
  RunResult r = d.run();
  if (log_text) *log_text = d.log().text();
  return r;
}

std::string replay_log(const std::vector<LogRecord>& records, RunResult* result, PluginSet plugins) {
  if (records.empty() || records.front().kind != "run_start") {
    throw std::runtime_error("replay: log does not begin with run_start");
  }
  const json& start = records.front().payload;
  RunOptions opts;
  opts.seed = start.at("seed").get<std::uint64_t>();
  opts.config = apply_overrides(RunConfig{}, start.at("config"));
  opts.plugins = plugins;
  opts.logged_mode = clock_mode_from_string(start.at("mode").get<std::string>());
  for (const auto& r : records) {
    if (r.kind == "run_stopped") opts.stop_after_dispatches = r.payload.at("dispatched").get<std::uint64_t>();
  }
  Director d(scenario_from_json(start.at("scenario")), opts);

  std::map<std::string, std::string> session_of;  // actor id -> session id
  for (const auto& r : records) {
    if (r.kind == "role_claim") {
      const auto session = r.payload.at("session_id").get<std::string>();
      const auto actor = r.payload.at("actor_id").get<std::string>();
      session_of[actor] = session;
      d.schedule_claim(r.ts_ms, session, actor);
    } else if (r.kind == "radio_turn" && r.payload.value("provenance", "") == "human") {
      const auto speaker = r.payload.at("speaker").get<std::string>();
      auto it = session_of.find(speaker);
      if (it == session_of.end()) throw std::runtime_error("replay: human turn from unclaimed actor " + speaker);
      std::optional<std::string> to;
      if (r.payload.contains("addressed_to") && r.payload["addressed_to"].is_string()) {
        to = r.payload["addressed_to"].get<std::string>();
      }
      d.schedule_human_turn(r.ts_ms, it->second, r.payload.at("frequency").get<std::string>(), to,
                            r.payload.at("clean_text").get<std::string>());
    }
  }
  RunResult r = d.run();
  if (result) *result = std::move(r);
  return d.log().text();
}

}  // namespace hilt
