#include "hilt/assistant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

#include "hilt/actors.hpp"

namespace hilt {

std::optional<GateDecision> evaluate_ladder(const EvidenceState& e, double ttg_gate_s) {
  std::vector<std::pair<std::string, Severity>> fired;
  if (e.readback_mismatch && e.activity) fired.emplace_back("readback_mismatch", Severity::CAUTION);
  const bool ttg_close = e.ttg_s && *e.ttg_s <= ttg_gate_s;
  if (e.occupancy && (ttg_close || e.arrival_context)) fired.emplace_back("occupancy_conflict", Severity::WARNING);
  if (e.recipient_ambiguous && e.activity) fired.emplace_back("recipient_ambiguity", Severity::CAUTION);
  if (fired.empty()) return std::nullopt;

  std::size_t best = 0;
  for (std::size_t i = 1; i < fired.size(); ++i) {
    if (level(fired[i].second) > level(fired[best].second)) best = i;
  }
  GateDecision d;
  d.type = fired[best].first;
  d.severity = fired[best].second;
  for (const auto& f : fired) d.rules_triggered.push_back(f.first);
  d.S = evidence_score(e.W_V, e.W_A, e.W_C);
  return d;
}

double evidence_score(double w_v, double w_a, double w_c) {
  return kWeightVision * w_v + kWeightAsr * w_a + kWeightContext * w_c;
}

std::optional<GateDecision> evidence_fallback(const EvidenceState& e) {
  const double s = evidence_score(e.W_V, e.W_A, e.W_C);
  // Thresholds are decimal; absorb binary rounding of the weighted sum.
  constexpr double eps = 1e-9;
  GateDecision d;
  d.type = "evidence_fallback";
  d.rules_triggered = {"evidence_fallback"};
  d.S = s;
  if (s >= kFallbackCaution - eps) {
    d.severity = Severity::CAUTION;
    return d;
  }
  if (s >= kFallbackAdvisory - eps) {
    d.severity = Severity::ADVISORY;
    return d;
  }
  return std::nullopt;
}

std::optional<GateDecision> decide(const EvidenceState& e, double ttg_gate_s) {
  if (auto d = evaluate_ladder(e, ttg_gate_s)) return d;
  return evidence_fallback(e);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const Advisory& a) {
  nlohmann::json ev{
      {"turn_ids", a.evidence.turn_ids},
      {"camera_ids", a.evidence.camera_ids},
      {"track_ids", a.evidence.track_ids},
      {"rules_triggered", a.evidence.rules_triggered},
      {"W_V", a.evidence.W_V},
      {"W_A", a.evidence.W_A},
      {"W_C", a.evidence.W_C},
      {"S", a.evidence.S},
  };
  ev["ttg_s"] = a.evidence.ttg_s && std::isfinite(*a.evidence.ttg_s) ? nlohmann::json(*a.evidence.ttg_s) : nlohmann::json(nullptr);
  ev["runway"] = a.evidence.runway ? nlohmann::json(*a.evidence.runway) : nlohmann::json(nullptr);
  return nlohmann::json{
      {"advisory_id", a.advisory_id}, {"type", a.type},         {"severity", to_string(a.severity)},
      {"level", level(a.severity)},   {"message", a.message},   {"recipients", a.recipients},
      {"evidence", ev},               {"t_ready_ms", a.t_ready_ms}, {"t_dec_ms", a.t_dec_ms},
      {"provenance", a.provenance},   {"actors", a.actors},
  };
}

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& msg) {
  throw std::invalid_argument(path + ": " + msg);
}

std::vector<std::string> string_list(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array()) schema_fail(path, "expected array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) schema_fail(path + "[" + std::to_string(i) + "]", "expected string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

double unit_number(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) schema_fail(path, "expected number");
  const double x = v.get<double>();
  if (!(x >= 0.0 && x <= 1.0)) schema_fail(path, "out of range [0, 1]");
  return x;
}

}  // namespace

Advisory advisory_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) schema_fail("$", "advisory must be an object");
  static const std::set<std::string> allowed{"advisory_id", "type",     "severity",   "level",      "message",
                                             "recipients",  "evidence", "t_ready_ms", "t_dec_ms",   "provenance",
                                             "actors",      "metadata", "recommendations"};
  for (const auto& [k, _] : doc.items()) {
    if (!allowed.contains(k)) schema_fail("$." + k, "unknown field");
  }
  Advisory a;
  if (!doc.contains("severity") || !doc["severity"].is_string()) schema_fail("$.severity", "required string");
  const auto sev = severity_from_string(doc["severity"].get<std::string>());
  if (!sev) schema_fail("$.severity", "not one of INFO, ADVISORY, CAUTION, WARNING");
  a.severity = *sev;
  if (doc.contains("level") && (!doc["level"].is_number_integer() || doc["level"].get<int>() != level(a.severity))) {
    schema_fail("$.level", "does not match severity");
  }
  if (!doc.contains("message") || !doc["message"].is_string()) schema_fail("$.message", "required string");
  a.message = doc["message"].get<std::string>();
  if (a.message.empty()) schema_fail("$.message", "must not be empty");
  a.type = "plugin_decision";
  if (doc.contains("type")) {
    if (!doc["type"].is_string() || doc["type"].get<std::string>().empty()) schema_fail("$.type", "expected string");
    a.type = doc["type"].get<std::string>();
  }
  if (doc.contains("recipients")) a.recipients = string_list(doc["recipients"], "$.recipients");
  if (doc.contains("actors")) a.actors = string_list(doc["actors"], "$.actors");
  if (doc.contains("evidence")) {
    const auto& ev = doc["evidence"];
    if (!ev.is_object()) schema_fail("$.evidence", "expected object");
    static const std::set<std::string> ev_allowed{"turn_ids", "camera_ids", "track_ids", "ttg_s", "rules_triggered",
                                                  "W_V",      "W_A",        "W_C",       "S",     "runway"};
    for (const auto& [k, _] : ev.items()) {
      if (!ev_allowed.contains(k)) schema_fail("$.evidence." + k, "unknown field");
    }
    if (ev.contains("turn_ids")) a.evidence.turn_ids = string_list(ev["turn_ids"], "$.evidence.turn_ids");
    if (ev.contains("camera_ids")) a.evidence.camera_ids = string_list(ev["camera_ids"], "$.evidence.camera_ids");
    if (ev.contains("track_ids")) a.evidence.track_ids = string_list(ev["track_ids"], "$.evidence.track_ids");
    if (ev.contains("rules_triggered")) {
      a.evidence.rules_triggered = string_list(ev["rules_triggered"], "$.evidence.rules_triggered");
    }
    if (ev.contains("ttg_s") && !ev["ttg_s"].is_null()) {
      if (!ev["ttg_s"].is_number()) schema_fail("$.evidence.ttg_s", "expected number or null");
      a.evidence.ttg_s = ev["ttg_s"].get<double>();
    }
    if (ev.contains("W_V")) a.evidence.W_V = unit_number(ev["W_V"], "$.evidence.W_V");
    if (ev.contains("W_A")) a.evidence.W_A = unit_number(ev["W_A"], "$.evidence.W_A");
    if (ev.contains("W_C")) a.evidence.W_C = unit_number(ev["W_C"], "$.evidence.W_C");
    if (ev.contains("S")) a.evidence.S = unit_number(ev["S"], "$.evidence.S");
    if (ev.contains("runway") && !ev["runway"].is_null()) {
      if (!ev["runway"].is_string()) schema_fail("$.evidence.runway", "expected string or null");
      a.evidence.runway = ev["runway"].get<std::string>();
    }
  }
  a.provenance = "plugin";
  return a;
}

std::optional<Advisory> guard(const ParsedSlots& slots, double slot_conf, double tau, const std::string& speaker_callsign,
                              const std::string& turn_id, TimeMs now_ms) {
  (void)slots;
  if (!(slot_conf < tau)) return std::nullopt;
  Advisory a;
  a.type = "clarification_request";
  a.severity = Severity::INFO;
  a.recipients = {speaker_callsign};
  a.message = render_message(a.type, a.severity, TemplateSlots{std::nullopt, {speaker_callsign}, std::nullopt, {}});
  a.evidence.turn_ids = {turn_id};
  a.evidence.rules_triggered = {"slot_confidence_guard"};
  a.t_ready_ms = now_ms;
  a.t_dec_ms = now_ms;
  return a;
}

namespace {

std::string severity_word(Severity s) {
  switch (s) {
    case Severity::INFO: return "Info";
    case Severity::ADVISORY: return "Advisory";
    case Severity::CAUTION: return "Caution";
    case Severity::WARNING: return "Warning";
  }
  return "Info";
}

std::string callsign_at(const TemplateSlots& s, std::size_t i) {
  return i < s.callsigns.size() ? s.callsigns[i] : std::string("traffic");
}

std::string seconds_text(double ttg) {
  const long n = std::lround(std::max(0.0, ttg));
  return std::to_string(n) + (n == 1 ? " second" : " seconds");
}

}  // namespace

std::string render_message(const std::string& type, Severity severity, const TemplateSlots& s) {
  const std::string sev = severity_word(severity);
  const std::string rw = s.runway.value_or("unknown");
  const bool finite_ttg = s.ttg_s && std::isfinite(*s.ttg_s);
  if (type == "occupancy_conflict") {
    std::string tail;
    if (finite_ttg && *s.ttg_s > 0.0) {
      tail = callsign_at(s, 1) + " " + seconds_text(*s.ttg_s) + " from threshold";
    } else if (finite_ttg) {
      tail = callsign_at(s, 1) + " on runway";
    } else {
      tail = callsign_at(s, 1) + " on approach";
    }
    return sev + ", runway " + rw + " occupied by " + callsign_at(s, 0) + ", " + tail;
  }
  if (type == "readback_mismatch") {
    if (s.heard_runway) {
      return sev + ", " + callsign_at(s, 0) + " read back runway " + *s.heard_runway + ", cleared runway " + rw;
    }
    return sev + ", " + callsign_at(s, 0) + " readback does not match clearance, runway " + rw;
  }
  if (type == "recipient_ambiguity") {
    return sev + ", runway " + rw + " clearance recipient unclear, confirm callsign";
  }
  if (type == "evidence_fallback") return sev + ", possible conflict runway " + rw;
  if (type == "clarification_request") return callsign_at(s, 0) + ", say again";
  if (type == "separation_conflict") {
    std::string msg = sev + ", traffic conflict " + callsign_at(s, 0) + " and " + callsign_at(s, 1);
    if (finite_ttg) msg += ", loss of separation in " + seconds_text(*s.ttg_s);
    return msg;
  }
  if (type == "unidentified_traffic") {
    return sev + ", " + callsign_at(s, 0) + ", unidentified traffic ahead, no transponder";
  }
  return sev + ", " + type;
}

std::string_view to_string(DecisionOutcome::Status status) {
  switch (status) {
    case DecisionOutcome::Status::ok: return "ok";
    case DecisionOutcome::Status::no_advisory: return "no_advisory";
    case DecisionOutcome::Status::timeout: return "timeout";
    case DecisionOutcome::Status::schema_violation: return "schema_violation";
    case DecisionOutcome::Status::unreachable: return "unreachable";
  }
  return "unreachable";
}

// ---------------------------------------------------------------------------
// Engine

namespace {

constexpr TimeMs kAmbiguityHoldMs = 30000;
constexpr double kApproachCrossM = 150.0;
constexpr double kApproachHeadingDeg = 15.0;
constexpr double kApproachMaxDistM = 15000.0;
constexpr double kBboxMargin = 0.01;
constexpr std::size_t kBundleDepth = 16;

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

void push_capped(std::vector<nlohmann::json>& v, nlohmann::json j) {
  v.push_back(std::move(j));
  if (v.size() > kBundleDepth) v.erase(v.begin());
}

Vec3 extrapolate(const Track& t, TimeMs at_ms) {
  const double dt = static_cast<double>(at_ms - t.t_adsb_in_ms) / 1000.0;
  return t.position + t.velocity() * dt;
}

nlohmann::json track_json(const Track& t) {
  return {{"actor_id", t.actor_id},
          {"callsign", t.callsign},
          {"t_adsb_in_ms", t.t_adsb_in_ms},
          {"t_adsb_out_ms", t.t_adsb_out_ms},
          {"position", {t.position.x, t.position.y, t.position.z}},
          {"ground_speed_mps", t.ground_speed_mps},
          {"vertical_speed_mps", t.vertical_speed_mps},
          {"heading_deg", t.heading_deg}};
}

}  // namespace

AssistantEngine::AssistantEngine(const ScenarioSpec& spec, const RunConfig& config) : spec_(spec), config_(config) {
  for (const auto& a : spec_.actors) {
    if (a.cls != ActorClass::atc && a.callsign) roster_callsigns_.push_back(*a.callsign);
  }
  CorroborationPolicy policy;
  policy.k_cameras = config_.thresholds.k_cameras;
  policy.tau_vis = config_.thresholds.tau_vis;
  policy.m_frames = config_.thresholds.m_frames;
  policy.window_ms = config_.thresholds.corroboration_window_ms;
  policy.staleness_ms = config_.thresholds.staleness_ms;
  policy.activity_speed_mps = config_.thresholds.stationary_speed_mps;
  for (const auto& r : spec_.geometry.runways) corroborators_.emplace(r.id, Corroborator(r.id, policy));
}

const ActorSpec* AssistantEngine::actor_by_callsign(const std::string& callsign) const {
  return spec_.find_by_callsign(callsign);
}

const OccupancyFlag* AssistantEngine::occupancy(const std::string& runway_id) const {
  auto it = corroborators_.find(runway_id);
  return it == corroborators_.end() ? nullptr : &it->second.flag();
}

std::vector<const Track*> AssistantEngine::fresh_tracks(TimeMs now_ms) const {
  const TimeMs period = static_cast<TimeMs>(std::llround(1000.0 / config_.adsb.hz));
  const TimeMs max_age = 3 * period;
  std::vector<const Track*> out;
  for (const auto& [_, t] : tracks_) {
    if (now_ms - t.t_adsb_out_ms <= max_age) out.push_back(&t);
  }
  return out;
}

std::vector<AssistantEngine::Arrival> AssistantEngine::arrivals_for(const Runway& runway, TimeMs now_ms) const {
  std::vector<Arrival> out;
  const auto mem_it = arrival_memory_.find(runway.id);
  for (const Track* t : fresh_tracks(now_ms)) {
    const ActorSpec* a = spec_.find_actor(t->actor_id);
    if (!a || a->cls != ActorClass::aircraft) continue;
    const bool in_pa = in_protected_area(runway, t->position, config_.protected_area);

    std::optional<std::string> end;
    auto lc = landing_clearances_.find(t->callsign);
    if (lc != landing_clearances_.end() && lc->second.runway_id == runway.id) end = lc->second.runway_end;
    if (!end && t->position.z > 5.0 && t->ground_speed_mps > config_.thresholds.stationary_speed_mps) {
      for (const std::string& e : {runway.low_end, runway.high_end}) {
        const Vec3 d = runway.direction(e);
        const Vec3 rel = flat(t->position - runway.threshold(e));
        const double along = dot(rel, d);
        const double cross_m = std::abs(rel.x * d.y - rel.y * d.x);
        const double hdg = std::abs(heading_difference(t->heading_deg, runway.heading(e)));
        if (along < 0.0 && along > -kApproachMaxDistM && cross_m <= kApproachCrossM && hdg <= kApproachHeadingDeg) {
          end = e;
          break;
        }
      }
    }
    const bool remembered = mem_it != arrival_memory_.end() && mem_it->second.contains(t->actor_id);
    if (!end && !(remembered && in_pa)) continue;

    Arrival arr;
    arr.actor_id = t->actor_id;
    arr.callsign = t->callsign;
    arr.runway_end = end.value_or(runway.low_end);
    if (in_pa) {
      arr.ttg_s = 0.0;
    } else {
      const auto ttg = compute_ttg(*t, runway.threshold(arr.runway_end), config_.thresholds.stationary_speed_mps);
      arr.ttg_s = ttg.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    out.push_back(std::move(arr));
  }
  return out;
}

std::optional<std::string> AssistantEngine::associate(const CameraPose& pose, double fov_deg, const Detection& d,
                                                      TimeMs now_ms) const {
  for (const Track* t : fresh_tracks(now_ms)) {
    const Vec3 p = extrapolate(*t, d.ts_ms);
    if (d.ground_point && norm_xy(*d.ground_point - p) <= config_.vision.association_m && p.z < 5.0) {
      return t->actor_id;
    }
    const ActorSpec* a = spec_.find_actor(t->actor_id);
    const double half_h = a ? actor_dimensions(a->cls).z / 2.0 : 0.0;
    const auto uv = project_to_image(pose, fov_deg, config_.vision, p + Vec3{0.0, 0.0, half_h});
    if (!uv) continue;
    const auto& b = d.bbox;
    if ((*uv)[0] >= b.x - kBboxMargin && (*uv)[0] <= b.x + b.w + kBboxMargin && (*uv)[1] >= b.y - kBboxMargin &&
        (*uv)[1] <= b.y + b.h + kBboxMargin) {
      return t->actor_id;
    }
  }
  return std::nullopt;
}

AssistantEngine::RunwayView AssistantEngine::view(const Runway& runway, TimeMs now_ms) const {
  RunwayView v;
  EvidenceState& e = v.evidence;
  const auto& th = config_.thresholds;
  v.arrivals = arrivals_for(runway, now_ms);
  std::set<std::string> arrival_ids;
  for (const auto& a : v.arrivals) arrival_ids.insert(a.actor_id);

  for (const Track* t : fresh_tracks(now_ms)) {
    if (!in_protected_area(runway, t->position, config_.protected_area)) continue;
    if (t->ground_speed_mps > th.stationary_speed_mps) e.activity = true;
    if (arrival_ids.contains(t->actor_id)) continue;
    v.occupant_actors.push_back(t->actor_id);
    v.occupant_callsigns.push_back(t->callsign.empty() ? t->actor_id : t->callsign);
    push_unique(v.track_ids, t->actor_id);
    auto tc = takeoff_clearances_.find(t->callsign);
    if (tc != takeoff_clearances_.end()) push_unique(v.turn_ids, tc->second.turn_id);
  }

  const OccupancyFlag& flag = corroborators_.at(runway.id).flag();
  if (flag.occupied) {
    v.camera_ids = flag.camera_ids;
    if (flag.activity) e.activity = true;
    auto vw = vision_.find(runway.id);
    double w = 0.0;
    if (vw != vision_.end()) {
      for (const auto& [_, x] : vw->second.w_v) w = std::max(w, x);
    }
    e.W_V = std::clamp(w, 0.0, 1.0);
    if (v.occupant_callsigns.empty()) {
      const auto label = vw != vision_.end() && vw->second.label ? vw->second.label : std::optional<ClassLabel>();
      v.occupant_callsigns.push_back("unidentified " + std::string(label ? to_string(*label) : "object"));
      v.occupant_actors.push_back("vision:" + runway.id);
    }
  }
  e.occupancy = !v.occupant_actors.empty();

  bool cleared_arrival = false;
  for (const auto& [cs, c] : landing_clearances_) {
    if (c.runway_id != runway.id) continue;
    cleared_arrival = true;
    push_unique(v.turn_ids, c.turn_id);
  }
  for (const auto& a : v.arrivals) {
    push_unique(v.track_ids, a.actor_id);
    if (std::isnan(a.ttg_s) || !std::isfinite(a.ttg_s)) continue;
    if (!e.ttg_s || a.ttg_s < *e.ttg_s) e.ttg_s = a.ttg_s;
    if (a.ttg_s <= th.arrival_context_s) e.arrival_context = true;
  }
  if (e.ttg_s) {
    e.W_C = std::clamp(1.0 - *e.ttg_s / th.ttg_max_s, 0.0, 1.0);
  } else if (cleared_arrival) {
    e.W_C = 0.5;
  }

  auto mm = mismatches_.find(runway.id);
  if (mm != mismatches_.end()) {
    e.readback_mismatch = true;
    e.W_A = std::clamp(mm->second.weight, 0.0, 1.0);
    for (const auto& id : mm->second.turn_ids) push_unique(v.turn_ids, id);
  }
  auto amb = ambiguities_.find(runway.id);
  if (amb != ambiguities_.end() && now_ms - amb->second.at_ms <= kAmbiguityHoldMs) {
    e.recipient_ambiguous = true;
    push_unique(v.turn_ids, amb->second.turn_id);
  }
  e.slot_conf = last_slot_conf_;
  return v;
}

EvidenceState AssistantEngine::evidence_for(const std::string& runway_id, TimeMs now_ms) const {
  for (const auto& r : spec_.geometry.runways) {
    if (r.id == runway_id) return view(r, now_ms).evidence;
  }
  return {};
}

namespace {

std::string debounce_key(const Advisory& a) {
  std::vector<std::string> pair = a.actors;
  std::sort(pair.begin(), pair.end());
  std::string key = a.type + "|" + a.evidence.runway.value_or("");
  for (const auto& p : pair) key += "|" + p;
  return key;
}

}  // namespace

bool AssistantEngine::admit(const Advisory& a, TimeMs now_ms) {
  const std::string key = debounce_key(a);
  auto it = debounce_.find(key);
  if (it != debounce_.end() && now_ms - it->second.at_ms < config_.thresholds.debounce_ms &&
      level(a.severity) <= level(it->second.severity)) {
    return false;
  }
  debounce_[key] = DebounceEntry{now_ms, a.severity};
  return true;
}

Advisory AssistantEngine::make_advisory(const std::string& type, Severity severity, TimeMs now_ms) {
  Advisory a;
  a.type = type;
  a.severity = severity;
  a.t_ready_ms = now_ms;
  a.t_dec_ms = now_ms;
  return a;
}

std::vector<EngineEvent> AssistantEngine::finalize(Advisory candidate, const nlohmann::json& context, TimeMs now_ms) {
  std::vector<EngineEvent> out;
  // Check the builtin candidate against the debounce table without
  // recording it, so suppressed findings never reach the plugin.
  {
    auto it = debounce_.find(debounce_key(candidate));
    if (it != debounce_.end() && now_ms - it->second.at_ms < config_.thresholds.debounce_ms &&
        level(candidate.severity) <= level(it->second.severity)) {
      return out;
    }
  }

  Advisory chosen = std::move(candidate);
  if (plugin_) {
    nlohmann::json tracks = nlohmann::json::array();
    for (const Track* t : fresh_tracks(now_ms)) tracks.push_back(track_json(*t));
    nlohmann::json bundle{{"t_ms", now_ms},
                          {"context", context},
                          {"candidate", to_json(chosen)},
                          {"transcripts", recent_transcripts_},
                          {"detections", recent_detections_},
                          {"adsb_slice", tracks}};
    DecisionOutcome outcome = plugin_->decide(bundle);
    if (outcome.status == DecisionOutcome::Status::ok && outcome.advisory) {
      Advisory p = std::move(*outcome.advisory);
      p.t_ready_ms = chosen.t_ready_ms;
      p.t_dec_ms = chosen.t_dec_ms;
      p.provenance = "plugin";
      if (p.evidence.rules_triggered.empty() && p.evidence.turn_ids.empty() && p.evidence.camera_ids.empty() &&
          p.evidence.track_ids.empty()) {
        p.evidence = chosen.evidence;
      }
      if (p.actors.empty()) p.actors = chosen.actors;
      if (!p.evidence.runway) p.evidence.runway = chosen.evidence.runway;
      chosen = std::move(p);
    } else if (outcome.status == DecisionOutcome::Status::no_advisory) {
      debounce_[debounce_key(chosen)] = DebounceEntry{now_ms, chosen.severity};
      return out;
    } else {
      EngineEvent fb;
      fb.kind = EngineEvent::Kind::plugin_fallback;
      fb.diagnostic = std::string(to_string(outcome.status)) + ": " + outcome.diagnostic;
      fb.advisory = chosen;
      out.push_back(std::move(fb));
    }
  }
  if (!admit(chosen, now_ms)) return out;
  char id[32];
  std::snprintf(id, sizeof id, "adv-%04llu", static_cast<unsigned long long>(next_id_++));
  chosen.advisory_id = id;
  EngineEvent ev;
  ev.kind = EngineEvent::Kind::advisory;
  ev.advisory = std::move(chosen);
  out.push_back(std::move(ev));
  return out;
}

std::vector<EngineEvent> AssistantEngine::evaluate(TimeMs now_ms) {
  if (spec_.scene == SceneType::enroute) return evaluate_enroute(now_ms);
  std::vector<EngineEvent> out;
  for (const Runway& runway : spec_.geometry.runways) {
    RunwayView v = view(runway, now_ms);
    const auto d = decide(v.evidence, config_.thresholds.ttg_gate_s);
    if (!d) continue;

    Advisory a = make_advisory(d->type, d->severity, now_ms);
    a.evidence.turn_ids = v.turn_ids;
    a.evidence.camera_ids = v.camera_ids;
    a.evidence.track_ids = v.track_ids;
    a.evidence.ttg_s = v.evidence.ttg_s;
    a.evidence.rules_triggered = d->rules_triggered;
    a.evidence.W_V = v.evidence.W_V;
    a.evidence.W_A = v.evidence.W_A;
    a.evidence.W_C = v.evidence.W_C;
    a.evidence.S = d->S;
    a.evidence.runway = runway.id;

    const Arrival* arrival = nullptr;
    for (const auto& arr : v.arrivals) {
      if (std::isnan(arr.ttg_s)) continue;
      if (!arrival || arr.ttg_s < arrival->ttg_s) arrival = &arr;
    }
    if (!arrival && !v.arrivals.empty()) arrival = &v.arrivals.front();
    std::string end = arrival ? arrival->runway_end : runway.low_end;

    TemplateSlots slots;
    if (d->type == "occupancy_conflict") {
      std::string arrival_cs = arrival ? arrival->callsign : std::string("arrival");
      if (!arrival) {
        for (const auto& [cs, c] : landing_clearances_) {
          if (c.runway_id == runway.id) {
            arrival_cs = cs;
            end = c.runway_end;
          }
        }
      }
      slots.runway = end;
      slots.callsigns = {v.occupant_callsigns.front(), arrival_cs};
      slots.ttg_s = v.evidence.ttg_s;
      a.recipients = {"ATC", arrival_cs, v.occupant_callsigns.front()};
      a.actors = {v.occupant_actors.front()};
      if (arrival) a.actors.push_back(arrival->actor_id);
    } else if (d->type == "readback_mismatch") {
      const Mismatch& mm = mismatches_.at(runway.id);
      slots.runway = mm.cleared_end;
      slots.callsigns = {mm.callsign};
      if (!mm.heard_end.empty()) slots.heard_runway = mm.heard_end;
      a.recipients = {"ATC", mm.callsign};
      const ActorSpec* who = actor_by_callsign(mm.callsign);
      a.actors = {who ? who->actor_id : mm.callsign};
    } else if (d->type == "recipient_ambiguity") {
      slots.runway = ambiguities_.at(runway.id).runway_end;
      a.recipients = {"ATC"};
      a.actors = {"atc"};
    } else {
      slots.runway = end;
      a.recipients = {"ATC"};
      if (!v.occupant_actors.empty()) a.actors = {v.occupant_actors.front()};
    }
    a.message = render_message(a.type, a.severity, slots);
    nlohmann::json ctx{{"runway", runway.id}, {"scene", "airport_surface"}};
    auto evs = finalize(std::move(a), ctx, now_ms);
    out.insert(out.end(), std::make_move_iterator(evs.begin()), std::make_move_iterator(evs.end()));
  }
  return out;
}

std::vector<EngineEvent> AssistantEngine::evaluate_enroute(TimeMs now_ms) {
  std::vector<EngineEvent> out;
  const auto& sep = config_.separation;
  const double h = spec_.conflict.separation ? spec_.conflict.separation->horizontal_m : sep.horizontal_m;
  const double vmin = spec_.conflict.separation ? spec_.conflict.separation->vertical_m : sep.vertical_m;
  const auto tracks = fresh_tracks(now_ms);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = i + 1; j < tracks.size(); ++j) {
      Track a = *tracks[i];
      Track b = *tracks[j];
      a.position = extrapolate(a, now_ms);
      b.position = extrapolate(b, now_ms);
      const auto loss = predicted_loss_time(a, b, h, vmin, sep.lookahead_s);
      if (!loss) continue;
      const Severity severity = *loss <= sep.warning_s ? Severity::WARNING : Severity::CAUTION;
      Advisory adv = make_advisory("separation_conflict", severity, now_ms);
      adv.evidence.track_ids = {a.actor_id, b.actor_id};
      adv.evidence.ttg_s = *loss;
      adv.evidence.rules_triggered = {"separation_conflict"};
      adv.evidence.W_C = std::clamp(1.0 - *loss / config_.thresholds.ttg_max_s, 0.0, 1.0);
      adv.evidence.S = evidence_score(0.0, 0.0, adv.evidence.W_C);
      adv.recipients = {a.callsign, b.callsign};
      adv.actors = {a.actor_id, b.actor_id};
      adv.message = render_message(adv.type, severity, TemplateSlots{std::nullopt, {a.callsign, b.callsign}, *loss, {}});
      nlohmann::json ctx{{"scene", "enroute"}, {"pair", {a.actor_id, b.actor_id}}};
      auto evs = finalize(std::move(adv), ctx, now_ms);
      out.insert(out.end(), std::make_move_iterator(evs.begin()), std::make_move_iterator(evs.end()));
    }
  }
  return out;
}

std::vector<EngineEvent> AssistantEngine::on_transcript(const AsrResult& asr, const RadioTurn& turn, TimeMs now_ms) {
  std::vector<EngineEvent> out;
  ParsedSlots slots = resolve_recipient(parse_phraseology(asr.transcript), roster_callsigns_);
  const ActorSpec* speaker = spec_.find_actor(turn.speaker);
  const bool from_atc = speaker && speaker->cls == ActorClass::atc;
  const std::string speaker_cs = speaker && speaker->callsign ? *speaker->callsign : turn.speaker;
  push_capped(recent_transcripts_, nlohmann::json{{"turn_id", asr.turn_id},
                                                  {"transcript", asr.transcript},
                                                  {"confidence", asr.confidence},
                                                  {"speaker", turn.speaker},
                                                  {"frequency", turn.frequency},
                                                  {"t_asr_out_ms", asr.t_asr_out_ms}});

  if (slots.ack != Acknowledgement::none && !slots.action) return evaluate(now_ms);
  const double slot_conf = std::min(slots.slot_conf, asr.confidence);
  last_slot_conf_ = slot_conf;
  if (auto clar = guard(slots, slot_conf, config_.thresholds.tau_asr, speaker_cs, asr.turn_id, now_ms)) {
    if (clarified_turns_.insert(asr.turn_id).second) {
      char id[32];
      std::snprintf(id, sizeof id, "adv-%04llu", static_cast<unsigned long long>(next_id_++));
      clar->advisory_id = id;
      clar->actors = {turn.speaker};
      out.push_back(EngineEvent{EngineEvent::Kind::advisory, std::move(*clar), {}});
    }
    return out;
  }

  const Runway* runway = slots.runway ? spec_.find_runway_by_end(*slots.runway) : nullptr;
  if (from_atc) {
    if (slots.ambiguous_recipient || (!slots.callsign && slots.action)) {
      if (runway) ambiguities_[runway->id] = Ambiguity{asr.turn_id, *slots.runway, now_ms};
    }
    if (slots.callsign && slots.action) {
      const std::string& cs = *slots.callsign;
      last_instruction_[cs] = LastInstruction{slots, asr.turn_id};
      const Action act = *slots.action;
      if (runway) {
        auto mm = mismatches_.find(runway->id);
        if (mm != mismatches_.end() && mm->second.callsign == cs) mismatches_.erase(mm);
      }
      if ((act == Action::cleared_for_takeoff || act == Action::line_up_and_wait) && runway) {
        takeoff_clearances_[cs] = Clearance{act, *slots.runway, runway->id, asr.turn_id, now_ms};
      } else if (act == Action::cleared_to_land && runway) {
        landing_clearances_[cs] = Clearance{act, *slots.runway, runway->id, asr.turn_id, now_ms};
      } else if (act == Action::cancel_takeoff_clearance || act == Action::stop || act == Action::hold_short) {
        takeoff_clearances_.erase(cs);
      } else if (act == Action::go_around) {
        landing_clearances_.erase(cs);
      }
    }
  } else if (speaker && speaker->callsign) {
    auto li = last_instruction_.find(*speaker->callsign);
    if (li != last_instruction_.end() && slots.action) {
      const ParsedSlots& want = li->second.slots;
      int compared = 0;
      int mismatched = 0;
      if (slots.callsign) {
        ++compared;
        if (*slots.callsign != *speaker->callsign) ++mismatched;
      }
      ++compared;
      if (slots.action != want.action) ++mismatched;
      if (want.runway && slots.runway) {
        ++compared;
        if (*want.runway != *slots.runway) ++mismatched;
      }
      if (want.altitude_ft && slots.altitude_ft) {
        ++compared;
        if (*want.altitude_ft != *slots.altitude_ft) ++mismatched;
      }
      const Runway* cleared = want.runway ? spec_.find_runway_by_end(*want.runway) : nullptr;
      if (cleared) {
        if (mismatched > 0) {
          Mismatch m;
          m.callsign = *speaker->callsign;
          m.cleared_end = *want.runway;
          m.heard_end = slots.runway && *slots.runway != *want.runway ? *slots.runway : std::string();
          m.turn_ids = {li->second.turn_id, asr.turn_id};
          m.weight = slot_conf * static_cast<double>(mismatched) / static_cast<double>(compared);
          mismatches_[cleared->id] = std::move(m);
          if (slots.callsign && *slots.callsign != *speaker->callsign) {
            ambiguities_[cleared->id] = Ambiguity{asr.turn_id, *want.runway, now_ms};
          }
        } else {
          auto mm = mismatches_.find(cleared->id);
          if (mm != mismatches_.end() && mm->second.callsign == *speaker->callsign) mismatches_.erase(mm);
        }
      }
    }
  }
  auto evs = evaluate(now_ms);
  out.insert(out.end(), std::make_move_iterator(evs.begin()), std::make_move_iterator(evs.end()));
  return out;
}

std::vector<EngineEvent> AssistantEngine::on_tracks(const std::vector<Track>& tracks, TimeMs now_ms) {
  for (const auto& t : tracks) tracks_[t.actor_id] = t;
  for (const Runway& r : spec_.geometry.runways) {
    std::set<std::string> now_arrivals;
    for (const auto& a : arrivals_for(r, now_ms)) now_arrivals.insert(a.actor_id);
    arrival_memory_[r.id] = std::move(now_arrivals);
  }
  return evaluate(now_ms);
}

std::vector<EngineEvent> AssistantEngine::on_frame(const std::string& camera_id, std::uint64_t frame_index,
                                                   const std::vector<Detection>& detections, TimeMs now_ms) {
  const CameraSpec* cam = nullptr;
  for (const auto& c : spec_.cameras) {
    if (c.camera_id == camera_id) cam = &c;
  }
  if (!cam) return {};
  for (const auto& d : detections) {
    push_capped(recent_detections_, nlohmann::json{{"camera_id", d.camera_id},
                                                   {"ts_ms", d.ts_ms},
                                                   {"class_label", to_string(d.class_label)},
                                                   {"confidence", d.confidence},
                                                   {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}});
  }

  std::optional<CameraPose> pose;
  if (cam->mounted_on) {
    auto own = tracks_.find(*cam->mounted_on);
    if (own != tracks_.end()) {
      ActorState mount;
      mount.position = extrapolate(own->second, now_ms);
      mount.heading_deg = own->second.heading_deg;
      pose = camera_pose(*cam, &mount);
    }
  } else {
    pose = camera_pose(*cam, nullptr);
  }

  if (spec_.scene == SceneType::enroute) {
    if (!cam->mounted_on || !pose) return evaluate(now_ms);
    std::vector<const Detection*> unknown;
    for (const auto& d : detections) {
      if (d.confidence < config_.thresholds.tau_vis || d.class_label != ClassLabel::airplane) continue;
      if (associate(*pose, cam->fov_deg, d, now_ms)) continue;
      unknown.push_back(&d);
    }
    int& streak = unidentified_streak_[camera_id];
    streak = unknown.empty() ? 0 : streak + 1;
    std::vector<EngineEvent> out = evaluate(now_ms);
    if (streak >= config_.thresholds.m_frames) {
      const ActorSpec* own = spec_.find_actor(*cam->mounted_on);
      const std::string own_cs = own && own->callsign ? *own->callsign : *cam->mounted_on;
      Advisory adv = make_advisory("unidentified_traffic", Severity::CAUTION, now_ms);
      adv.evidence.camera_ids = {camera_id};
      adv.evidence.track_ids = {*cam->mounted_on};
      adv.evidence.rules_triggered = {"unidentified_traffic"};
      adv.evidence.W_V = unknown.front()->confidence;
      adv.evidence.S = evidence_score(adv.evidence.W_V, 0.0, 0.0);
      adv.recipients = {own_cs};
      adv.actors = {*cam->mounted_on, "unidentified"};
      adv.message = render_message(adv.type, adv.severity, TemplateSlots{std::nullopt, {own_cs}, std::nullopt, {}});
      nlohmann::json ctx{{"scene", "enroute"}, {"camera_id", camera_id}};
      auto evs = finalize(std::move(adv), ctx, now_ms);
      out.insert(out.end(), std::make_move_iterator(evs.begin()), std::make_move_iterator(evs.end()));
    }
    return out;
  }

  for (const Runway& r : spec_.geometry.runways) {
    std::set<std::string> arrival_ids;
    for (const auto& a : arrivals_for(r, now_ms)) arrival_ids.insert(a.actor_id);
    std::vector<Detection> in_area;
    for (const auto& d : detections) {
      if (!d.ground_point || !in_protected_area(r, *d.ground_point, config_.protected_area)) continue;
      if (pose) {
        const auto who = associate(*pose, cam->fov_deg, d, now_ms);
        if (who && arrival_ids.contains(*who)) continue;
      }
      in_area.push_back(d);
    }
    Corroborator& c = corroborators_.at(r.id);
    c.on_frame(camera_id, frame_index, now_ms, in_area);
    VisionWindow& vw = vision_[r.id];
    std::erase_if(vw.w_v, [&](const auto& p) { return p.first < now_ms - config_.thresholds.corroboration_window_ms; });
    const OccupancyFlag& f = c.flag();
    if (f.occupied) {
      const double k = static_cast<double>(config_.thresholds.k_cameras);
      vw.w_v.emplace_back(now_ms, f.confidence * std::min(static_cast<double>(f.corroboration) / k, 1.0));
    } else {
      vw.w_v.clear();
    }
    if (!in_area.empty()) vw.label = in_area.front().class_label;
  }
  return evaluate(now_ms);
}

std::vector<EngineEvent> AssistantEngine::on_tick(TimeMs now_ms) {
  bool changed = false;
  for (auto& [id, c] : corroborators_) {
    if (c.on_tick(now_ms)) {
      changed = true;
      if (!c.flag().occupied) vision_[id].w_v.clear();
    }
  }
  for (auto it = ambiguities_.begin(); it != ambiguities_.end();) {
    if (now_ms - it->second.at_ms > kAmbiguityHoldMs) {
      it = ambiguities_.erase(it);
      changed = true;
    } else {
      ++it;
    }
  }
  if (!changed) return {};
  return evaluate(now_ms);
}

}  // namespace hilt
