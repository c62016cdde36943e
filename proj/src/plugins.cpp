#include "hilt/plugins.hpp"

#include <stdexcept>

namespace hilt {

std::string_view to_string(PluginRole role) {
  switch (role) {
    case PluginRole::asr: return "asr";
    case PluginRole::vision: return "vision";
    case PluginRole::decision: return "decision";
    case PluginRole::nlg: return "nlg";
  }
  return "decision";
}

std::optional<PluginRole> plugin_role_from_string(std::string_view text) {
  if (text == "asr") return PluginRole::asr;
  if (text == "vision") return PluginRole::vision;
  if (text == "decision") return PluginRole::decision;
  if (text == "nlg") return PluginRole::nlg;
  return std::nullopt;
}

nlohmann::json to_json(const PluginConfig& c) {
  return {{"role", to_string(c.role)}, {"base_url", c.base_url}, {"timeout_ms", c.timeout_ms}, {"enabled", c.enabled}};
}

PluginConfig plugin_config_from_json(PluginRole role, const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("$: expected object");
  for (const auto& [k, _] : doc.items()) {
    if (k != "base_url" && k != "timeout_ms" && k != "enabled" && k != "role") {
      throw std::invalid_argument("$." + k + ": unknown field");
    }
  }
  PluginConfig c;
  c.role = role;
  if (doc.contains("role") && doc["role"] != to_string(role)) throw std::invalid_argument("$.role: does not match path");
  if (!doc.contains("base_url") || !doc["base_url"].is_string()) {
    throw std::invalid_argument("$.base_url: required string");
  }
  c.base_url = doc["base_url"].get<std::string>();
  if (c.base_url.rfind("http://", 0) != 0) throw std::invalid_argument("$.base_url: must start with http://");
  if (doc.contains("timeout_ms")) {
    if (!doc["timeout_ms"].is_number_integer() || doc["timeout_ms"].get<TimeMs>() <= 0) {
      throw std::invalid_argument("$.timeout_ms: expected positive integer");
    }
    c.timeout_ms = doc["timeout_ms"].get<TimeMs>();
  }
  if (doc.contains("enabled")) {
    if (!doc["enabled"].is_boolean()) throw std::invalid_argument("$.enabled: expected boolean");
    c.enabled = doc["enabled"].get<bool>();
  }
  return c;
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) { throw std::invalid_argument(path + ": " + msg); }

}  // namespace

AsrPluginResult asr_result_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) bad("$", "expected object");
  AsrPluginResult r;
  if (!doc.contains("transcript") || !doc["transcript"].is_string()) bad("$.transcript", "required string");
  r.transcript = doc["transcript"].get<std::string>();
  if (!doc.contains("confidence") || !doc["confidence"].is_number()) bad("$.confidence", "required number");
  r.confidence = doc["confidence"].get<double>();
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) bad("$.confidence", "out of range [0, 1]");
  if (!doc.contains("latency_ms") || !doc["latency_ms"].is_number_integer()) bad("$.latency_ms", "required integer");
  r.latency_ms = doc["latency_ms"].get<TimeMs>();
  if (r.latency_ms < 0) bad("$.latency_ms", "must be >= 0");
  return r;
}

VisionPluginResult vision_result_from_json(const nlohmann::json& doc, const std::string& camera_id, TimeMs t_frame_ms) {
  if (!doc.is_object()) bad("$", "expected object");
  VisionPluginResult r;
  if (!doc.contains("latency_ms") || !doc["latency_ms"].is_number_integer()) bad("$.latency_ms", "required integer");
  r.latency_ms = doc["latency_ms"].get<TimeMs>();
  if (r.latency_ms < 0) bad("$.latency_ms", "must be >= 0");
  if (!doc.contains("detections") || !doc["detections"].is_array()) bad("$.detections", "required array");
  for (std::size_t i = 0; i < doc["detections"].size(); ++i) {
    const auto& d = doc["detections"][i];
    const std::string p = "$.detections[" + std::to_string(i) + "]";
    if (!d.is_object()) bad(p, "expected object");
    Detection det;
    det.camera_id = camera_id;
    det.ts_ms = t_frame_ms;
    det.t_vision_ms = t_frame_ms + r.latency_ms;
    const std::string label = d.value("class_label", "");
    if (label == "airplane") {
      det.class_label = ClassLabel::airplane;
    } else if (label == "truck") {
      det.class_label = ClassLabel::truck;
    } else if (label == "bird") {
      det.class_label = ClassLabel::bird;
    } else {
      bad(p + ".class_label", "not one of airplane, truck, bird");
    }
    if (!d.contains("confidence") || !d["confidence"].is_number()) bad(p + ".confidence", "required number");
    det.confidence = d["confidence"].get<double>();
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) bad(p + ".confidence", "out of range [0, 1]");
    if (!d.contains("bbox") || !d["bbox"].is_array() || d["bbox"].size() != 4) bad(p + ".bbox", "expected [x,y,w,h]");
    det.bbox = {d["bbox"][0].get<double>(), d["bbox"][1].get<double>(), d["bbox"][2].get<double>(),
                d["bbox"][3].get<double>()};
    if (d.contains("ground_point") && !d["ground_point"].is_null()) {
      const auto& g = d["ground_point"];
      if (!g.is_array() || g.size() < 2) bad(p + ".ground_point", "expected [x,y]");
      det.ground_point = Vec3{g[0].get<double>(), g[1].get<double>(), 0.0};
    }
    det.range_m = d.value("range_m", 0.0);
    det.actor_id_truth = d.value("actor_id_truth", "");
    r.detections.push_back(std::move(det));
  }
  return r;
}

std::optional<Advisory> decision_result_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("advisory")) bad("$.advisory", "required (object or null)");
  if (doc["advisory"].is_null()) return std::nullopt;
  return advisory_from_json(doc["advisory"]);
}

std::string nlg_result_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("message") || !doc["message"].is_string()) bad("$.message", "required string");
  std::string m = doc["message"].get<std::string>();
  if (m.empty()) bad("$.message", "must not be empty");
  return m;
}

}  // namespace hilt
