#pragma once

// Run configuration: latency profiles, channel model, thresholds and
// kinematic defaults. Every field can be overridden from JSON; unknown keys
// are rejected with their path.

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "hilt/severity.hpp"
#include "hilt/sim_kernel.hpp"

namespace hilt {

struct LatencyProfile {
  enum class Kind { constant, uniform, normal };
  Kind kind = Kind::constant;
  TimeMs value_ms = 0;     // constant
  TimeMs min_ms = 0;       // uniform, inclusive
  TimeMs max_ms = 0;
  double mean_ms = 0.0;    // normal, truncated at 0
  double stddev_ms = 0.0;

  static LatencyProfile fixed(TimeMs ms) {
    LatencyProfile p;
    p.value_ms = ms;
    return p;
  }
  TimeMs sample(RandomStream& stream) const;
  bool is_constant() const { return kind == Kind::constant; }
};

struct LatencyConfig {
  LatencyProfile asr = LatencyProfile::fixed(5880);
  LatencyProfile vision = LatencyProfile::fixed(415);
  LatencyProfile tts = LatencyProfile::fixed(900);
  LatencyProfile adsb = LatencyProfile::fixed(50);
  LatencyProfile decision = LatencyProfile::fixed(0);
};

struct AsrConfig {
  double word_error = 0.05;  // recognizer's own error rate on top of the channel
  double confidence_k = 1.5;
};

struct ChannelConfig {
  double snr_clean_db = 20.0;
  double snr_span_db = 25.0;
  double p_max = 0.45;
  double snr_floor_db = -10.0;
  double listener_gain_db = 20.0;  // human listeners decode this much better than the ASR path
  TimeMs speech_ms_per_word = 300;
};

struct ThresholdConfig {
  double tau_asr = 0.8;
  double tau_actor = 0.8;
  double tau_vis = 0.7;
  int k_cameras = 2;
  int m_frames = 5;
  TimeMs staleness_ms = 2000;
  TimeMs corroboration_window_ms = 1000;
  double ttg_gate_s = 8.0;
  double ttg_max_s = 60.0;
  double arrival_context_s = 60.0;
  TimeMs debounce_ms = 10000;
  Severity speak_min = Severity::CAUTION;
  double stationary_speed_mps = 0.5;
};

struct VisionConfig {
  double first_detect_range_m = 125.0;
  double gamma = 1.0;
  double conf_near = 0.95;
  double conf_far = 0.55;
  double association_m = 60.0;
  int image_width_px = 1280;
  int image_height_px = 720;
};

struct AdsbConfig {
  double hz = 1.0;
};

struct ActorDefaults {
  TimeMs reply_delay_ms = 1000;
  TimeMs reask_ms = 10000;
  double accel_mps2 = 2.0;
  double decel_mps2 = 2.5;
  double rotation_speed_mps = 65.0;
  double climb_rate_mps = 12.0;
  double approach_speed_mps = 70.0;
  double glide_path_deg = 3.0;
  double cruise_speed_mps = 120.0;
  double taxi_speed_mps = 8.0;
  double vehicle_speed_mps = 8.0;
  double wildlife_walk_mps = 1.0;
  double wildlife_fly_mps = 15.0;
  TimeMs rotate_ms = 2000;
  double flare_height_m = 15.0;
  double flare_sink_mps = 2.0;
  double vacate_speed_mps = 15.0;
};

struct ProtectedAreaConfig {
  double lateral_m = 60.0;
  double max_height_m = 30.0;
};

struct SeparationConfig {
  double horizontal_m = 9300.0;
  double vertical_m = 300.0;
  double lookahead_s = 120.0;
  double warning_s = 30.0;
};

struct RunConfig {
  TimeMs tick_ms = 50;
  LatencyConfig latency;
  AsrConfig asr;
  ChannelConfig channel;
  ThresholdConfig thresholds;
  VisionConfig vision;
  AdsbConfig adsb;
  ActorDefaults actors;
  ProtectedAreaConfig protected_area;
  SeparationConfig separation;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const LatencyProfile& profile);
/// Applies a (possibly partial) override document to `base`. Throws
/// ConfigError listing every unknown key or ill-typed value by JSON path.
RunConfig apply_overrides(RunConfig base, const nlohmann::json& overrides);

}  // namespace hilt
