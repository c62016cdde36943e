#include "hilt/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hilt {

using nlohmann::json;

std::string_view to_string(SceneType v) { return v == SceneType::enroute ? "enroute" : "airport_surface"; }

std::string_view to_string(ActorClass v) {
  switch (v) {
    case ActorClass::aircraft: return "aircraft";
    case ActorClass::atc: return "atc";
    case ActorClass::vehicle: return "vehicle";
    case ActorClass::wildlife: return "wildlife";
  }
  return "aircraft";
}

std::string_view to_string(CameraMount v) {
  switch (v) {
    case CameraMount::tower: return "tower";
    case CameraMount::nose: return "nose";
    case CameraMount::tail: return "tail";
    case CameraMount::runway_fixed: return "runway_fixed";
  }
  return "tower";
}

std::string_view to_string(ReadbackFault v) {
  switch (v) {
    case ReadbackFault::none: return "none";
    case ReadbackFault::bad_readback: return "bad_readback";
    case ReadbackFault::misaddressed: return "misaddressed";
  }
  return "none";
}

const ActorSpec* ScenarioSpec::find_actor(std::string_view actor_id) const {
  for (const auto& a : actors) {
    if (a.actor_id == actor_id) return &a;
  }
  return nullptr;
}

const ActorSpec* ScenarioSpec::find_by_callsign(std::string_view callsign) const {
  for (const auto& a : actors) {
    if (a.callsign && *a.callsign == callsign) return &a;
  }
  return nullptr;
}

const Runway* ScenarioSpec::find_runway_by_end(std::string_view end_token) const {
  for (const auto& r : geometry.runways) {
    if (r.has_end(end_token)) return &r;
  }
  return nullptr;
}

namespace {

// Strict object reader: every key must be consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_.empty() ? "<root>" : path_, "expected object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }
  const json& need(const std::string& key) {
    const json* v = get(key);
    if (!v) throw ParseError(at(key), "required");
    return *v;
  }

  std::string str(const std::string& key) { return as_string(need(key), at(key)); }
  std::optional<std::string> opt_str(const std::string& key) {
    const json* v = get(key);
    return v ? std::optional(as_string(*v, at(key))) : std::nullopt;
  }
  double num(const std::string& key, double fallback) {
    const json* v = get(key);
    return v ? as_number(*v, at(key)) : fallback;
  }
  std::optional<double> opt_num(const std::string& key) {
    const json* v = get(key);
    return v ? std::optional(as_number(*v, at(key))) : std::nullopt;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ParseError(at(key), "expected integer");
    return v->get<std::int64_t>();
  }
  std::optional<std::int64_t> opt_integer(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) throw ParseError(at(key), "expected integer");
    return v->get<std::int64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ParseError(at(key), "expected boolean");
    return v->get<bool>();
  }
  std::vector<std::string> strings(const std::string& key) {
    std::vector<std::string> out;
    const json* v = get(key);
    if (!v) return out;
    if (!v->is_array()) throw ParseError(at(key), "expected array");
    for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_string((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ParseError(at(key), "unknown key");
    }
  }

  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ParseError(path, "expected string");
    return v.get<std::string>();
  }
  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path, "expected number");
    return v.get<double>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 as_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() < 2 || v.size() > 3) throw ParseError(path, "expected [x, y] or [x, y, z]");
  Vec3 out;
  out.x = Obj::as_number(v[0], path + "[0]");
  out.y = Obj::as_number(v[1], path + "[1]");
  if (v.size() == 3) out.z = Obj::as_number(v[2], path + "[2]");
  return out;
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

template <class E, std::size_t N>
E parse_enum(const std::string& text, const std::array<E, N>& values, const std::string& path) {
  for (E e : values) {
    if (to_string(e) == text) return e;
  }
  std::string allowed;
  for (E e : values) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(e));
  throw ParseError(path, "'" + text + "' is not one of " + allowed);
}

constexpr std::array kSceneTypes = {SceneType::airport_surface, SceneType::enroute};
constexpr std::array kActorClasses = {ActorClass::aircraft, ActorClass::atc, ActorClass::vehicle, ActorClass::wildlife};
constexpr std::array kMounts = {CameraMount::tower, CameraMount::nose, CameraMount::tail, CameraMount::runway_fixed};
constexpr std::array kFaults = {ReadbackFault::none, ReadbackFault::bad_readback, ReadbackFault::misaddressed};

template <class F>
void each(const json& arr, const std::string& path, F&& f) {
  if (!arr.is_array()) throw ParseError(path, "expected array");
  for (std::size_t i = 0; i < arr.size(); ++i) f(arr[i], path + "[" + std::to_string(i) + "]");
}

Runway parse_runway(const json& j, const std::string& path) {
  Obj o(j, path);
  Runway r;
  r.id = o.str("id");
  r.width_m = o.num("width_m", 45.0);
  const json& ends = o.need("ends");
  if (!ends.is_array() || ends.size() != 2) throw ParseError(o.at("ends"), "expected exactly two runway ends");
  for (int i = 0; i < 2; ++i) {
    Obj e(ends[i], o.at("ends") + "[" + std::to_string(i) + "]");
    const std::string token = e.str("token");
    const Vec3 thr = as_vec3(e.need("threshold"), e.at("threshold"));
    e.finish();
    (i == 0 ? r.low_end : r.high_end) = token;
    (i == 0 ? r.low_threshold : r.high_threshold) = thr;
  }
  o.finish();
  return r;
}

BehaviorSpec parse_behavior(const json& j, const std::string& path) {
  Obj o(j, path);
  BehaviorSpec b;
  b.name = o.str("name");
  b.runway = o.opt_str("runway");
  if (const json* w = o.get("waypoints")) each(*w, o.at("waypoints"), [&](const json& p, const std::string& pp) {
      b.waypoints.push_back(as_vec3(p, pp));
    });
  b.speed_mps = o.opt_num("speed_mps");
  b.vertical_speed_mps = o.opt_num("vertical_speed_mps");
  b.start_at_ms = o.integer("start_at_ms", 0);
  b.noncompliant = o.boolean("noncompliant", false);
  o.finish();
  return b;
}

Performance parse_performance(const json& j, const std::string& path) {
  Obj o(j, path);
  Performance p;
  p.accel_mps2 = o.opt_num("accel_mps2");
  p.decel_mps2 = o.opt_num("decel_mps2");
  p.rotation_speed_mps = o.opt_num("rotation_speed_mps");
  p.climb_rate_mps = o.opt_num("climb_rate_mps");
  p.approach_speed_mps = o.opt_num("approach_speed_mps");
  p.glide_path_deg = o.opt_num("glide_path_deg");
  p.cruise_speed_mps = o.opt_num("cruise_speed_mps");
  p.speed_mps = o.opt_num("speed_mps");
  o.finish();
  return p;
}

ActorSpec parse_actor(const json& j, const std::string& path) {
  Obj o(j, path);
  ActorSpec a;
  a.actor_id = o.str("actor_id");
  a.cls = parse_enum(o.str("class"), kActorClasses, o.at("class"));
  a.callsign = o.opt_str("callsign");
  a.frequency = o.opt_str("frequency");
  a.overhear = o.strings("overhear");
  {
    Obj p(o.need("initial_pose"), o.at("initial_pose"));
    a.initial_pose.position = as_vec3(p.need("position"), p.at("position"));
    a.initial_pose.heading_deg = p.num("heading_deg", 0.0);
    p.finish();
  }
  a.initial_behavior = parse_behavior(o.need("initial_behavior"), o.at("initial_behavior"));
  if (const json* perf = o.get("performance")) a.performance = parse_performance(*perf, o.at("performance"));
  a.adsb_equipped = o.boolean("adsb_equipped", a.cls != ActorClass::wildlife && a.cls != ActorClass::atc);
  o.finish();
  return a;
}

ScriptedTransmission parse_transmission(const json& j, const std::string& path) {
  Obj o(j, path);
  ScriptedTransmission t;
  t.turn_id = o.str("turn_id");
  t.at_ms = o.integer("at_ms", 0);
  t.speaker = o.str("speaker");
  t.frequency = o.str("frequency");
  t.addressed_to = o.opt_str("addressed_to");
  t.text = o.str("text");
  t.snr_db = o.opt_num("snr_db");
  if (auto f = o.opt_str("readback_fault")) t.readback_fault = parse_enum(*f, kFaults, o.at("readback_fault"));
  t.not_received_by = o.strings("not_received_by");
  o.finish();
  return t;
}

CameraSpec parse_camera(const json& j, const std::string& path) {
  Obj o(j, path);
  CameraSpec c;
  c.camera_id = o.str("camera_id");
  c.mount = parse_enum(o.str("mount"), kMounts, o.at("mount"));
  c.mounted_on = o.opt_str("mounted_on");
  if (const json* p = o.get("position")) c.position = as_vec3(*p, o.at("position"));
  c.yaw_deg = o.num("yaw_deg", 0.0);
  c.pitch_deg = o.num("pitch_deg", 0.0);
  c.fov_deg = o.num("fov_deg", 60.0);
  c.sample_hz = o.num("sample_hz", 20.0);
  c.range_scale = o.num("range_scale", 1.0);
  c.ego_mask = o.boolean("ego_mask", true);
  o.finish();
  return c;
}

}  // namespace

ScenarioSpec scenario_from_json(const json& doc) {
  Obj o(doc, "");
  ScenarioSpec s;
  s.schema_version = static_cast<int>(o.integer("schema_version", kScenarioSchemaVersion));
  if (s.schema_version != kScenarioSchemaVersion) {
    throw ParseError("schema_version", "unsupported version " + std::to_string(s.schema_version));
  }
  s.scenario_id = o.str("scenario_id");
  s.family = o.str("family");
  s.description = o.opt_str("description").value_or("");
  s.scene = parse_enum(o.str("scene"), kSceneTypes, "scene");
  {
    Obj g(o.need("geometry"), "geometry");
    if (const json* r = g.get("runways")) each(*r, "geometry.runways", [&](const json& rj, const std::string& p) {
        s.geometry.runways.push_back(parse_runway(rj, p));
      });
    s.geometry.frequencies = g.strings("frequencies");
    s.geometry.advisory_frequency = g.opt_str("advisory_frequency").value_or("");
    g.finish();
  }
  each(o.need("actors"), "actors", [&](const json& aj, const std::string& p) { s.actors.push_back(parse_actor(aj, p)); });
  if (const json* c = o.get("comm_timeline")) each(*c, "comm_timeline", [&](const json& tj, const std::string& p) {
      s.comm_timeline.push_back(parse_transmission(tj, p));
    });
  if (const json* c = o.get("cameras")) each(*c, "cameras", [&](const json& cj, const std::string& p) {
      s.cameras.push_back(parse_camera(cj, p));
    });
  {
    const json* seed = o.get("seed");
    if (seed) {
      if (!seed->is_number_unsigned() && !seed->is_number_integer()) throw ParseError("seed", "expected integer");
      s.seed = seed->get<std::uint64_t>();
    }
  }
  if (const json* p = o.get("perturbations")) {
    Obj po(*p, "perturbations");
    s.perturbations.timing_ms = po.integer("timing_ms", 0);
    s.perturbations.position_m = po.num("position_m", 0.0);
    po.finish();
  }
  if (const json* e = o.get("environment")) {
    Obj eo(*e, "environment");
    s.environment.visibility_m = eo.num("visibility_m", s.environment.visibility_m);
    s.environment.snr_db = eo.num("snr_db", s.environment.snr_db);
    eo.finish();
  }
  if (const json* c = o.get("conflict")) {
    Obj co(*c, "conflict");
    s.conflict.t_conflict_ms = co.opt_integer("t_conflict_ms");
    s.conflict.derivable = co.boolean("derivable", false);
    s.conflict.expected = co.boolean("expected", true);
    if (const json* sep = co.get("separation")) {
      Obj so(*sep, "conflict.separation");
      SeparationMinima m;
      m.horizontal_m = so.num("horizontal_m", m.horizontal_m);
      m.vertical_m = so.num("vertical_m", m.vertical_m);
      so.finish();
      s.conflict.separation = m;
    }
    co.finish();
  }
  s.duration_ms = o.integer("duration_ms", s.duration_ms);
  o.finish();
  return s;
}

json to_json(const ScenarioSpec& s) {
  json doc;
  doc["schema_version"] = s.schema_version;
  doc["scenario_id"] = s.scenario_id;
  doc["family"] = s.family;
  if (!s.description.empty()) doc["description"] = s.description;
  doc["scene"] = to_string(s.scene);
  json runways = json::array();
  for (const auto& r : s.geometry.runways) {
    runways.push_back({{"id", r.id},
                       {"width_m", r.width_m},
                       {"ends", json::array({{{"token", r.low_end}, {"threshold", vec_json(r.low_threshold)}},
                                             {{"token", r.high_end}, {"threshold", vec_json(r.high_threshold)}}})}});
  }
  doc["geometry"] = {{"runways", runways},
                     {"frequencies", s.geometry.frequencies},
                     {"advisory_frequency", s.geometry.advisory_frequency}};
  json actors = json::array();
  for (const auto& a : s.actors) {
    json aj;
    aj["actor_id"] = a.actor_id;
    aj["class"] = to_string(a.cls);
    if (a.callsign) aj["callsign"] = *a.callsign;
    if (a.frequency) aj["frequency"] = *a.frequency;
    if (!a.overhear.empty()) aj["overhear"] = a.overhear;
    aj["initial_pose"] = {{"position", vec_json(a.initial_pose.position)}, {"heading_deg", a.initial_pose.heading_deg}};
    json b;
    b["name"] = a.initial_behavior.name;
    if (a.initial_behavior.runway) b["runway"] = *a.initial_behavior.runway;
    if (!a.initial_behavior.waypoints.empty()) {
      json w = json::array();
      for (const auto& p : a.initial_behavior.waypoints) w.push_back(vec_json(p));
      b["waypoints"] = w;
    }
    if (a.initial_behavior.speed_mps) b["speed_mps"] = *a.initial_behavior.speed_mps;
    if (a.initial_behavior.vertical_speed_mps) b["vertical_speed_mps"] = *a.initial_behavior.vertical_speed_mps;
    if (a.initial_behavior.start_at_ms) b["start_at_ms"] = a.initial_behavior.start_at_ms;
    if (a.initial_behavior.noncompliant) b["noncompliant"] = true;
    aj["initial_behavior"] = b;
    json perf = json::object();
    auto put = [&](const char* k, const std::optional<double>& v) {
      if (v) perf[k] = *v;
    };
    put("accel_mps2", a.performance.accel_mps2);
    put("decel_mps2", a.performance.decel_mps2);
    put("rotation_speed_mps", a.performance.rotation_speed_mps);
    put("climb_rate_mps", a.performance.climb_rate_mps);
    put("approach_speed_mps", a.performance.approach_speed_mps);
    put("glide_path_deg", a.performance.glide_path_deg);
    put("cruise_speed_mps", a.performance.cruise_speed_mps);
    put("speed_mps", a.performance.speed_mps);
    if (!perf.empty()) aj["performance"] = perf;
    aj["adsb_equipped"] = a.adsb_equipped;
    actors.push_back(aj);
  }
  doc["actors"] = actors;
  json timeline = json::array();
  for (const auto& t : s.comm_timeline) {
    json tj;
    tj["turn_id"] = t.turn_id;
    tj["at_ms"] = t.at_ms;
    tj["speaker"] = t.speaker;
    tj["frequency"] = t.frequency;
    if (t.addressed_to) tj["addressed_to"] = *t.addressed_to;
    tj["text"] = t.text;
    if (t.snr_db) tj["snr_db"] = *t.snr_db;
    if (t.readback_fault != ReadbackFault::none) tj["readback_fault"] = to_string(t.readback_fault);
    if (!t.not_received_by.empty()) tj["not_received_by"] = t.not_received_by;
    timeline.push_back(tj);
  }
  doc["comm_timeline"] = timeline;
  json cams = json::array();
  for (const auto& c : s.cameras) {
    json cj;
    cj["camera_id"] = c.camera_id;
    cj["mount"] = to_string(c.mount);
    if (c.mounted_on) cj["mounted_on"] = *c.mounted_on;
    cj["position"] = vec_json(c.position);
    cj["yaw_deg"] = c.yaw_deg;
    cj["pitch_deg"] = c.pitch_deg;
    cj["fov_deg"] = c.fov_deg;
    cj["sample_hz"] = c.sample_hz;
    cj["range_scale"] = c.range_scale;
    cj["ego_mask"] = c.ego_mask;
    cams.push_back(cj);
  }
  doc["cameras"] = cams;
  doc["seed"] = s.seed;
  doc["perturbations"] = {{"timing_ms", s.perturbations.timing_ms}, {"position_m", s.perturbations.position_m}};
  doc["environment"] = {{"visibility_m", s.environment.visibility_m}, {"snr_db", s.environment.snr_db}};
  json conflict;
  if (s.conflict.t_conflict_ms) conflict["t_conflict_ms"] = *s.conflict.t_conflict_ms;
  conflict["derivable"] = s.conflict.derivable;
  conflict["expected"] = s.conflict.expected;
  if (s.conflict.separation) {
    conflict["separation"] = {{"horizontal_m", s.conflict.separation->horizontal_m},
                              {"vertical_m", s.conflict.separation->vertical_m}};
  }
  doc["conflict"] = conflict;
  doc["duration_ms"] = s.duration_ms;
  return doc;
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), "cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(file.string(), std::string("malformed JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

std::vector<Violation> validate(const ScenarioSpec& s) {
  std::vector<Violation> out;
  auto bad = [&](std::string path, std::string message) { out.push_back({std::move(path), std::move(message)}); };
  auto idx = [](const char* base, std::size_t i) { return std::string(base) + "[" + std::to_string(i) + "]"; };

  if (s.scenario_id.empty()) bad("scenario_id", "must not be empty");
  if (s.family.empty()) bad("family", "must not be empty");
  if (s.duration_ms <= 0) bad("duration_ms", "must be > 0");

  std::set<std::string> freqs(s.geometry.frequencies.begin(), s.geometry.frequencies.end());
  if (freqs.size() != s.geometry.frequencies.size()) bad("geometry.frequencies", "duplicate frequency");
  if (!s.geometry.advisory_frequency.empty() && !freqs.count(s.geometry.advisory_frequency)) {
    bad("geometry.advisory_frequency", "not in geometry.frequencies");
  }
  std::set<std::string> ends;
  for (std::size_t i = 0; i < s.geometry.runways.size(); ++i) {
    const Runway& r = s.geometry.runways[i];
    const std::string p = idx("geometry.runways", i);
    for (int e = 0; e < 2; ++e) {
      const std::string& tok = e == 0 ? r.low_end : r.high_end;
      const std::string ep = p + ".ends[" + std::to_string(e) + "].token";
      if (!is_canonical_runway(tok)) {
        bad(ep, "runway token '" + tok + "' is not canonical (\"01\"..\"36\" with optional L/C/R)");
      } else if (!ends.insert(tok).second) {
        bad(ep, "runway end '" + tok + "' declared twice");
      }
    }
    if (is_canonical_runway(r.low_end) && is_canonical_runway(r.high_end) &&
        reciprocal_runway(r.low_end) != r.high_end) {
      bad(p + ".ends", "ends '" + r.low_end + "' and '" + r.high_end + "' are not reciprocal");
    }
    if (r.length() < 1.0) bad(p + ".ends", "thresholds coincide");
    if (r.width_m <= 0.0) bad(p + ".width_m", "must be > 0");
  }
  if (s.scene == SceneType::airport_surface && s.geometry.runways.empty()) {
    bad("geometry.runways", "airport_surface scenes need at least one runway");
  }

  std::set<std::string> ids, callsigns;
  for (std::size_t i = 0; i < s.actors.size(); ++i) {
    const ActorSpec& a = s.actors[i];
    const std::string p = idx("actors", i);
    if (a.actor_id.empty() || !ids.insert(a.actor_id).second) bad(p + ".actor_id", "missing or duplicate actor_id");
    const bool needs_callsign = a.cls != ActorClass::wildlife;
    if (needs_callsign && !a.callsign) bad(p + ".callsign", std::string(to_string(a.cls)) + " actors need a callsign");
    if (!needs_callsign && a.callsign) bad(p + ".callsign", "wildlife has no callsign");
    if (a.callsign && !callsigns.insert(*a.callsign).second) bad(p + ".callsign", "duplicate callsign");
    if (!a.adsb_equipped && a.cls == ActorClass::vehicle) {
      bad(p + ".adsb_equipped", "only aircraft and wildlife may be unequipped");
    }
    if (a.adsb_equipped && (a.cls == ActorClass::wildlife || a.cls == ActorClass::atc)) {
      bad(p + ".adsb_equipped", std::string(to_string(a.cls)) + " actors cannot broadcast ADS-B");
    }
    if (a.frequency && !freqs.count(*a.frequency)) bad(p + ".frequency", "unknown frequency '" + *a.frequency + "'");
    if (needs_callsign && !a.frequency) bad(p + ".frequency", "radio-equipped actors need a tuned frequency");
    for (std::size_t k = 0; k < a.overhear.size(); ++k) {
      if (!freqs.count(a.overhear[k])) bad(p + ".overhear[" + std::to_string(k) + "]", "unknown frequency");
    }

    static const std::map<ActorClass, std::set<std::string>> allowed = {
        {ActorClass::aircraft, {"holding_short", "approach", "cruise", "stop"}},
        {ActorClass::vehicle, {"drive", "stop"}},
        {ActorClass::wildlife, {"walk", "stand", "fly"}},
        {ActorClass::atc, {"tower"}},
    };
    const BehaviorSpec& b = a.initial_behavior;
    const std::string bp = p + ".initial_behavior";
    if (!allowed.at(a.cls).count(b.name)) {
      bad(bp + ".name", "behavior '" + b.name + "' not available for " + std::string(to_string(a.cls)));
    }
    if (b.runway) {
      if (!is_canonical_runway(*b.runway)) bad(bp + ".runway", "runway token '" + *b.runway + "' is not canonical");
      else if (!s.find_runway_by_end(*b.runway)) bad(bp + ".runway", "unknown runway end '" + *b.runway + "'");
    }
    if ((b.name == "holding_short" || b.name == "approach") && !b.runway) bad(bp + ".runway", "required for " + b.name);
    if ((b.name == "drive" || b.name == "walk") && b.waypoints.empty()) bad(bp + ".waypoints", "required for " + b.name);
    if (b.start_at_ms < 0) bad(bp + ".start_at_ms", "must be >= 0");
    if (b.speed_mps && *b.speed_mps < 0.0) bad(bp + ".speed_mps", "must be >= 0");
  }

  std::set<std::string> turn_ids;
  for (std::size_t i = 0; i < s.comm_timeline.size(); ++i) {
    const ScriptedTransmission& t = s.comm_timeline[i];
    const std::string p = idx("comm_timeline", i);
    if (t.turn_id.empty() || !turn_ids.insert(t.turn_id).second) bad(p + ".turn_id", "missing or duplicate turn_id");
    if (t.at_ms < 0) bad(p + ".at_ms", "must be >= 0");
    const ActorSpec* speaker = s.find_actor(t.speaker);
    if (!speaker) {
      bad(p + ".speaker", "unknown actor '" + t.speaker + "'");
    } else if (speaker->frequency != t.frequency &&
               std::find(speaker->overhear.begin(), speaker->overhear.end(), t.frequency) == speaker->overhear.end()) {
      bad(p + ".frequency", "speaker '" + t.speaker + "' is not on " + t.frequency);
    }
    if (!freqs.count(t.frequency)) bad(p + ".frequency", "unknown frequency '" + t.frequency + "'");
    if (t.addressed_to && !s.find_by_callsign(*t.addressed_to)) {
      bad(p + ".addressed_to", "no actor with callsign '" + *t.addressed_to + "'");
    }
    if (t.text.empty()) bad(p + ".text", "must not be empty");
    for (std::size_t k = 0; k < t.not_received_by.size(); ++k) {
      if (!s.find_actor(t.not_received_by[k])) bad(p + ".not_received_by[" + std::to_string(k) + "]", "unknown actor");
    }
  }

  std::set<std::string> cam_ids;
  for (std::size_t i = 0; i < s.cameras.size(); ++i) {
    const CameraSpec& c = s.cameras[i];
    const std::string p = idx("cameras", i);
    if (c.camera_id.empty() || !cam_ids.insert(c.camera_id).second) bad(p + ".camera_id", "missing or duplicate camera_id");
    const bool mounted = c.mount == CameraMount::nose || c.mount == CameraMount::tail;
    if (mounted && !c.mounted_on) bad(p + ".mounted_on", std::string(to_string(c.mount)) + " cameras need mounted_on");
    if (c.mounted_on && !s.find_actor(*c.mounted_on)) bad(p + ".mounted_on", "unknown actor '" + *c.mounted_on + "'");
    if (!(c.sample_hz >= 1.0 && c.sample_hz <= 30.0)) bad(p + ".sample_hz", "must be in [1, 30]");
    if (!(c.fov_deg > 0.0 && c.fov_deg < 180.0)) bad(p + ".fov_deg", "must be in (0, 180)");
    if (!(c.range_scale > 0.0)) bad(p + ".range_scale", "must be > 0");
  }

  if (s.perturbations.timing_ms < 0) bad("perturbations.timing_ms", "must be >= 0");
  if (s.perturbations.position_m < 0.0) bad("perturbations.position_m", "must be >= 0");
  if (s.environment.visibility_m <= 0.0) bad("environment.visibility_m", "must be > 0");
  if (!s.conflict.t_conflict_ms && !s.conflict.derivable && s.conflict.expected) {
    bad("conflict", "needs t_conflict_ms or derivable=true");
  }
  if (s.conflict.t_conflict_ms && *s.conflict.t_conflict_ms < 0) bad("conflict.t_conflict_ms", "must be >= 0");
  return out;
}

ScenarioSpec expand_variant(const ScenarioSpec& spec, std::uint64_t seed) {
  ScenarioSpec out = spec;
  out.seed = seed;
  RandomStream stream = derive_stream(seed, "geometry_jitter");
  const TimeMs dt = spec.perturbations.timing_ms;
  const double dp = spec.perturbations.position_m;
  // Draw order is fixed (timeline first, then roster) so outputs are a pure
  // function of (spec, seed). Zero bounds leave the spec untouched.
  if (dt > 0) {
    for (auto& t : out.comm_timeline) {
      t.at_ms = std::max<TimeMs>(0, t.at_ms + static_cast<TimeMs>(stream.uniform_int(-dt, dt)));
    }
  }
  if (dp > 0.0) {
    for (auto& a : out.actors) {
      if (a.cls == ActorClass::atc) continue;
      a.initial_pose.position.x += stream.uniform(-dp, dp);
      a.initial_pose.position.y += stream.uniform(-dp, dp);
    }
  }
  return out;
}

std::vector<SuiteEntry> load_suite(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(root)) throw ParseError(root.string(), "scenario directory not found");
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SuiteEntry> out;
  for (const auto& f : files) out.push_back({f, load_scenario(f)});
  return out;
}

std::optional<TimeMs> derive_conflict_open(const ScenarioSpec& spec, const ConflictTrace& trace) {
  if (spec.conflict.t_conflict_ms) return spec.conflict.t_conflict_ms;
  if (spec.scene == SceneType::enroute) return trace.first_predicted_loss_ms;

  // The earliest overlap instant is always some interval's opening time.
  std::vector<TimeMs> candidates;
  for (const auto& iv : trace.intervals) candidates.push_back(iv.open_ms);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (TimeMs t : candidates) {
    std::map<std::string, std::set<std::string>> holders;
    for (const auto& iv : trace.intervals) {
      if (iv.open_ms <= t && (!iv.close_ms || t < *iv.close_ms)) holders[iv.runway_id].insert(iv.actor_id);
    }
    for (const auto& [_, actors] : holders) {
      if (actors.size() >= 2) return t;
    }
  }
  return std::nullopt;
}

}  // namespace hilt
