#include "hilt/config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace hilt {

using nlohmann::json;

TimeMs LatencyProfile::sample(RandomStream& stream) const {
  switch (kind) {
    case Kind::constant: return value_ms;
    case Kind::uniform: return static_cast<TimeMs>(stream.uniform_int(min_ms, max_ms));
    case Kind::normal: {
      const double v = stream.normal(mean_ms, stddev_ms);
      return v <= 0.0 ? 0 : static_cast<TimeMs>(std::llround(v));
    }
  }
  return value_ms;
}

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

json to_json(const LatencyProfile& p) {
  switch (p.kind) {
    case LatencyProfile::Kind::constant: return {{"kind", "constant"}, {"value_ms", p.value_ms}};
    case LatencyProfile::Kind::uniform:
      return {{"kind", "uniform"}, {"min_ms", p.min_ms}, {"max_ms", p.max_ms}};
    case LatencyProfile::Kind::normal:
      return {{"kind", "normal"}, {"mean_ms", p.mean_ms}, {"stddev_ms", p.stddev_ms}};
  }
  return {};
}

namespace {

// One field table drives both serialization and override application.
template <class V>
void visit_config(V& v, RunConfig& c) {
  v.field("tick_ms", c.tick_ms);
  v.group("latency", [&] {
    v.field("asr", c.latency.asr);
    v.field("vision", c.latency.vision);
    v.field("tts", c.latency.tts);
    v.field("adsb", c.latency.adsb);
    v.field("decision", c.latency.decision);
  });
  v.group("asr", [&] {
    v.field("word_error", c.asr.word_error);
    v.field("confidence_k", c.asr.confidence_k);
  });
  v.group("channel", [&] {
    v.field("snr_clean_db", c.channel.snr_clean_db);
    v.field("snr_span_db", c.channel.snr_span_db);
    v.field("p_max", c.channel.p_max);
    v.field("snr_floor_db", c.channel.snr_floor_db);
    v.field("listener_gain_db", c.channel.listener_gain_db);
    v.field("speech_ms_per_word", c.channel.speech_ms_per_word);
  });
  v.group("thresholds", [&] {
    auto& t = c.thresholds;
    v.field("tau_asr", t.tau_asr);
    v.field("tau_actor", t.tau_actor);
    v.field("tau_vis", t.tau_vis);
    v.field("k_cameras", t.k_cameras);
    v.field("m_frames", t.m_frames);
    v.field("staleness_ms", t.staleness_ms);
    v.field("corroboration_window_ms", t.corroboration_window_ms);
    v.field("ttg_gate_s", t.ttg_gate_s);
    v.field("ttg_max_s", t.ttg_max_s);
    v.field("arrival_context_s", t.arrival_context_s);
    v.field("debounce_ms", t.debounce_ms);
    v.field("speak_min", t.speak_min);
    v.field("stationary_speed_mps", t.stationary_speed_mps);
  });
  v.group("vision", [&] {
    auto& s = c.vision;
    v.field("first_detect_range_m", s.first_detect_range_m);
    v.field("gamma", s.gamma);
    v.field("conf_near", s.conf_near);
    v.field("conf_far", s.conf_far);
    v.field("association_m", s.association_m);
    v.field("image_width_px", s.image_width_px);
    v.field("image_height_px", s.image_height_px);
  });
  v.group("adsb", [&] { v.field("hz", c.adsb.hz); });
  v.group("actors", [&] {
    auto& a = c.actors;
    v.field("reply_delay_ms", a.reply_delay_ms);
    v.field("reask_ms", a.reask_ms);
    v.field("accel_mps2", a.accel_mps2);
    v.field("decel_mps2", a.decel_mps2);
    v.field("rotation_speed_mps", a.rotation_speed_mps);
    v.field("climb_rate_mps", a.climb_rate_mps);
    v.field("approach_speed_mps", a.approach_speed_mps);
    v.field("glide_path_deg", a.glide_path_deg);
    v.field("cruise_speed_mps", a.cruise_speed_mps);
    v.field("taxi_speed_mps", a.taxi_speed_mps);
    v.field("vehicle_speed_mps", a.vehicle_speed_mps);
    v.field("wildlife_walk_mps", a.wildlife_walk_mps);
    v.field("wildlife_fly_mps", a.wildlife_fly_mps);
    v.field("rotate_ms", a.rotate_ms);
    v.field("flare_height_m", a.flare_height_m);
    v.field("flare_sink_mps", a.flare_sink_mps);
    v.field("vacate_speed_mps", a.vacate_speed_mps);
  });
  v.group("protected_area", [&] {
    v.field("lateral_m", c.protected_area.lateral_m);
    v.field("max_height_m", c.protected_area.max_height_m);
  });
  v.group("separation", [&] {
    v.field("horizontal_m", c.separation.horizontal_m);
    v.field("vertical_m", c.separation.vertical_m);
    v.field("lookahead_s", c.separation.lookahead_s);
    v.field("warning_s", c.separation.warning_s);
  });
}

struct ToJson {
  std::vector<json*> stack;

  template <class T>
  void field(const char* name, T& value) {
    if constexpr (std::is_same_v<T, LatencyProfile>) {
      (*stack.back())[name] = to_json(value);
    } else if constexpr (std::is_same_v<T, Severity>) {
      (*stack.back())[name] = std::string(to_string(value));
    } else {
      (*stack.back())[name] = value;
    }
  }
  void group(const char* name, const std::function<void()>& body) {
    json& child = (*stack.back())[name] = json::object();
    stack.push_back(&child);
    body();
    stack.pop_back();
  }
};

struct Apply {
  struct Frame {
    const json* node;
    std::string path;
    std::set<std::string> seen;
  };
  std::vector<Frame> stack;
  std::vector<std::string> problems;

  void close(Frame& f) {
    if (!f.node) return;
    for (const auto& [key, _] : f.node->items()) {
      if (!f.seen.count(key)) problems.push_back(f.path + key + ": unknown key");
    }
  }

  void parse_profile(const json& j, const std::string& path, LatencyProfile& out) {
    if (j.is_number_integer()) {
      out = LatencyProfile::fixed(j.get<TimeMs>());
      if (out.value_ms < 0) problems.push_back(path + ": latency must be >= 0");
      return;
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
      problems.push_back(path + ": expected integer ms or {kind, ...}");
      return;
    }
    const std::string kind = j["kind"];
    auto require_keys = [&](std::initializer_list<const char*> keys) {
      for (const auto& [key, _] : j.items()) {
        if (key == "kind") continue;
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
          problems.push_back(path + "." + key + ": unknown key");
        }
      }
      for (const char* k : keys) {
        if (!j.contains(k) || !j[k].is_number()) problems.push_back(path + "." + k + ": required number");
      }
    };
    LatencyProfile p;
    if (kind == "constant") {
      require_keys({"value_ms"});
      if (j.contains("value_ms") && j["value_ms"].is_number()) p = LatencyProfile::fixed(j["value_ms"].get<TimeMs>());
      if (p.value_ms < 0) problems.push_back(path + ".value_ms: must be >= 0");
    } else if (kind == "uniform") {
      require_keys({"min_ms", "max_ms"});
      p.kind = LatencyProfile::Kind::uniform;
      if (j.contains("min_ms") && j["min_ms"].is_number()) p.min_ms = j["min_ms"].get<TimeMs>();
      if (j.contains("max_ms") && j["max_ms"].is_number()) p.max_ms = j["max_ms"].get<TimeMs>();
      if (p.min_ms < 0 || p.max_ms < p.min_ms) problems.push_back(path + ": need 0 <= min_ms <= max_ms");
    } else if (kind == "normal") {
      require_keys({"mean_ms", "stddev_ms"});
      p.kind = LatencyProfile::Kind::normal;
      if (j.contains("mean_ms") && j["mean_ms"].is_number()) p.mean_ms = j["mean_ms"].get<double>();
      if (j.contains("stddev_ms") && j["stddev_ms"].is_number()) p.stddev_ms = j["stddev_ms"].get<double>();
      if (p.stddev_ms < 0.0) problems.push_back(path + ".stddev_ms: must be >= 0");
    } else {
      problems.push_back(path + ".kind: unknown latency kind '" + kind + "'");
      return;
    }
    out = p;
  }

  template <class T>
  void field(const char* name, T& value) {
    Frame& f = stack.back();
    if (!f.node || !f.node->contains(name)) return;
    f.seen.insert(name);
    const json& j = (*f.node)[name];
    const std::string path = f.path + name;
    if constexpr (std::is_same_v<T, LatencyProfile>) {
      parse_profile(j, path, value);
    } else if constexpr (std::is_same_v<T, Severity>) {
      auto s = j.is_string() ? severity_from_string(j.get<std::string>()) : std::nullopt;
      if (!s) problems.push_back(path + ": expected one of INFO, ADVISORY, CAUTION, WARNING");
      else value = *s;
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) problems.push_back(path + ": expected integer");
      else value = j.get<T>();
    } else {
      if (!j.is_number()) problems.push_back(path + ": expected number");
      else value = j.get<T>();
    }
  }

  void group(const char* name, const std::function<void()>& body) {
    Frame& f = stack.back();
    const json* child = nullptr;
    if (f.node && f.node->contains(name)) {
      f.seen.insert(name);
      child = &(*f.node)[name];
      if (!child->is_object()) {
        problems.push_back(f.path + name + ": expected object");
        child = nullptr;
      }
    }
    stack.push_back(Frame{child, f.path + name + ".", {}});
    body();
    close(stack.back());
    stack.pop_back();
  }
};

void check_ranges(const RunConfig& c, std::vector<std::string>& problems) {
  auto need = [&](bool ok, const char* what) {
    if (!ok) problems.push_back(what);
  };
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  need(c.tick_ms > 0, "tick_ms: must be > 0");
  need(unit(c.asr.word_error), "asr.word_error: must be in [0, 1]");
  need(c.asr.confidence_k >= 0.0, "asr.confidence_k: must be >= 0");
  need(c.channel.snr_span_db > 0.0, "channel.snr_span_db: must be > 0");
  need(unit(c.channel.p_max), "channel.p_max: must be in [0, 1]");
  need(c.channel.speech_ms_per_word >= 0, "channel.speech_ms_per_word: must be >= 0");
  need(unit(c.thresholds.tau_asr), "thresholds.tau_asr: must be in [0, 1]");
  need(unit(c.thresholds.tau_actor), "thresholds.tau_actor: must be in [0, 1]");
  need(unit(c.thresholds.tau_vis), "thresholds.tau_vis: must be in [0, 1]");
  need(c.thresholds.k_cameras >= 1, "thresholds.k_cameras: must be >= 1");
  need(c.thresholds.m_frames >= 1, "thresholds.m_frames: must be >= 1");
  need(c.thresholds.staleness_ms > 0, "thresholds.staleness_ms: must be > 0");
  need(c.thresholds.corroboration_window_ms > 0, "thresholds.corroboration_window_ms: must be > 0");
  need(c.thresholds.ttg_max_s > 0.0, "thresholds.ttg_max_s: must be > 0");
  need(c.thresholds.debounce_ms >= 0, "thresholds.debounce_ms: must be >= 0");
  need(c.vision.first_detect_range_m > 0.0, "vision.first_detect_range_m: must be > 0");
  need(c.vision.gamma > 0.0, "vision.gamma: must be > 0");
  need(unit(c.vision.conf_near) && unit(c.vision.conf_far) && c.vision.conf_far <= c.vision.conf_near,
       "vision.conf_near/conf_far: need 0 <= conf_far <= conf_near <= 1");
  need(c.vision.image_width_px > 0 && c.vision.image_height_px > 0, "vision.image_*_px: must be > 0");
  need(c.adsb.hz > 0.0 && c.adsb.hz <= 20.0, "adsb.hz: must be in (0, 20]");
  need(c.actors.accel_mps2 > 0.0 && c.actors.decel_mps2 > 0.0, "actors.accel/decel: must be > 0");
  need(c.actors.glide_path_deg > 0.0 && c.actors.glide_path_deg < 15.0, "actors.glide_path_deg: must be in (0, 15)");
  need(c.protected_area.lateral_m >= 0.0, "protected_area.lateral_m: must be >= 0");
  need(c.separation.horizontal_m > 0.0 && c.separation.vertical_m > 0.0, "separation: minima must be > 0");
  need(c.separation.lookahead_s > 0.0, "separation.lookahead_s: must be > 0");
}

}  // namespace

json to_json(const RunConfig& config) {
  json out = json::object();
  ToJson v{{&out}};
  RunConfig copy = config;
  visit_config(v, copy);
  return out;
}

RunConfig apply_overrides(RunConfig base, const json& overrides) {
  Apply v;
  if (overrides.is_null()) return base;
  if (!overrides.is_object()) throw ConfigError({"<root>: expected object"});
  v.stack.push_back(Apply::Frame{&overrides, "", {}});
  visit_config(v, base);
  v.close(v.stack.back());
  check_ranges(base, v.problems);
  if (!v.problems.empty()) throw ConfigError(std::move(v.problems));
  return base;
}

}  // namespace hilt
