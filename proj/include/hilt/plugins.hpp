#pragma once

// Swappable module interfaces. The runner consults a plugin when one is
// installed and falls back to the built-in simulator on any failure.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "hilt/assistant.hpp"
#include "hilt/surveillance.hpp"

namespace hilt {

enum class PluginRole { asr, vision, decision, nlg };
std::string_view to_string(PluginRole role);
std::optional<PluginRole> plugin_role_from_string(std::string_view text);

struct PluginConfig {
  PluginRole role = PluginRole::decision;
  std::string base_url;
  TimeMs timeout_ms = 5000;
  bool enabled = true;
};
nlohmann::json to_json(const PluginConfig& config);
/// Throws std::invalid_argument with the offending field.
PluginConfig plugin_config_from_json(PluginRole role, const nlohmann::json& doc);

struct PluginFailure {
  std::string status;  // timeout | schema_violation | unreachable
  std::string diagnostic;
};

struct AsrPluginResult {
  std::string transcript;
  double confidence = 1.0;
  TimeMs latency_ms = 0;
};

class AsrPlugin {
 public:
  virtual ~AsrPlugin() = default;
  /// Request: {turn_id, t_tx_ms, frequency, text, snr_db}.
  virtual std::optional<AsrPluginResult> transcribe(const nlohmann::json& request, PluginFailure& failure) = 0;
};

struct VisionPluginResult {
  std::vector<Detection> detections;
  TimeMs latency_ms = 0;
};

class VisionPlugin {
 public:
  virtual ~VisionPlugin() = default;
  /// Request: {camera_id, frame_index, t_frame_ms, pose, fov_deg, actors[]}.
  virtual std::optional<VisionPluginResult> detect(const nlohmann::json& request, PluginFailure& failure) = 0;
};

class NlgPlugin {
 public:
  virtual ~NlgPlugin() = default;
  /// May change message text only.
  virtual std::optional<std::string> rewrite(const nlohmann::json& advisory, PluginFailure& failure) = 0;
};

/// Response parsers shared by HTTP clients and in-process stubs. Each
/// throws std::invalid_argument describing the schema violation.
AsrPluginResult asr_result_from_json(const nlohmann::json& doc);
VisionPluginResult vision_result_from_json(const nlohmann::json& doc, const std::string& camera_id, TimeMs t_frame_ms);
/// {"advisory": object | null}; nullopt means the plugin chose no advisory.
std::optional<Advisory> decision_result_from_json(const nlohmann::json& doc);
std::string nlg_result_from_json(const nlohmann::json& doc);

struct PluginSet {
  AsrPlugin* asr = nullptr;
  VisionPlugin* vision = nullptr;
  DecisionPlugin* decision = nullptr;
  NlgPlugin* nlg = nullptr;
};

}  // namespace hilt
