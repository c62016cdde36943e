#pragma once

// ADS-B tracks, time-to-go and CPA, the geometric camera/detector model and
// the multi-camera / persistence corroboration policy.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hilt/actors.hpp"
#include "hilt/config.hpp"
#include "hilt/geometry.hpp"
#include "hilt/scenario.hpp"

namespace hilt {

struct Track {
  std::string actor_id;
  std::string callsign;
  TimeMs t_adsb_in_ms = 0;
  TimeMs t_adsb_out_ms = 0;
  Vec3 position;
  double ground_speed_mps = 0.0;
  double vertical_speed_mps = 0.0;
  double heading_deg = 0.0;
  bool equipped = true;

  Vec3 velocity() const {
    Vec3 v = heading_vector(heading_deg) * ground_speed_mps;
    v.z = vertical_speed_mps;
    return v;
  }
};

/// One track per equipped non-ATC actor, sampled at t_ms.
std::vector<Track> emit_tracks(const std::vector<ActorState>& actors, const std::vector<bool>& equipped, TimeMs t_ms,
                               TimeMs latency_ms);

/// nullopt when stationary (speed <= eps); +infinity when moving away.
std::optional<double> compute_ttg(const Track& track, const Vec3& target, double stationary_eps_mps = 0.5);

struct Cpa {
  double t_cpa_s = 0.0;
  double d_cpa_m = 0.0;
};
/// Closed-form closest approach of straight-line tracks for t >= 0.
Cpa compute_cpa(const Track& a, const Track& b);

/// Earliest t in [0, lookahead] at which both horizontal and vertical
/// separation are below the minima, or nullopt.
std::optional<double> predicted_loss_time(const Track& a, const Track& b, double horizontal_m, double vertical_m,
                                          double lookahead_s);

// ---------------------------------------------------------------------------
// Vision

enum class ClassLabel { airplane, truck, bird };
std::string_view to_string(ClassLabel label);
std::optional<ClassLabel> class_label_for(ActorClass cls);

struct BBox {
  double x = 0.0;  // normalized top-left
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct Detection {
  std::string camera_id;
  TimeMs ts_ms = 0;       // frame time
  TimeMs t_vision_ms = 0; // detector completion
  ClassLabel class_label = ClassLabel::airplane;
  double confidence = 0.0;
  BBox bbox;
  std::optional<Vec3> ground_point;  // bbox bottom-center back-projected to z = 0
  double range_m = 0.0;              // log-only
  std::string actor_id_truth;        // log-only
};

struct CameraPose {
  Vec3 position;
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
};

CameraPose camera_pose(const CameraSpec& camera, const ActorState* mount);

/// Approximate bounding-box dimensions (length, width, height) per class.
Vec3 actor_dimensions(ActorClass cls);

/// p_det = clamp(1 - range / min(R, visibility), 0, 1)^gamma.
double detection_probability(double range_m, double visibility_m, double first_detect_range_m, double gamma);
/// Linear fall-off from conf_near at 0 m to conf_far at the detection range.
double detection_confidence(double range_m, double effective_range_m, const VisionConfig& vision);

struct FrameContext {
  const CameraSpec* camera = nullptr;
  CameraPose pose;
  const std::vector<ActorState>* actors = nullptr;
  TimeMs t_frame_ms = 0;
  TimeMs latency_ms = 0;
  double visibility_m = 10000.0;
  double range_scale = 1.0;
};

/// Projects the oriented box of each visible actor through a pinhole camera.
std::vector<Detection> simulate_frame(const FrameContext& frame, const VisionConfig& vision, RandomStream& stream);

/// Normalized image coordinates (u right, v down) of a scene point, or
/// nullopt when it lies behind the camera.
std::optional<std::array<double, 2>> project_to_image(const CameraPose& pose, double fov_deg, const VisionConfig& vision,
                                                      const Vec3& p);

// ---------------------------------------------------------------------------
// Corroboration

enum class OccupancySource { vision, adsb, fused };
std::string_view to_string(OccupancySource source);

struct OccupancyFlag {
  std::string runway;  // runway id
  bool occupied = false;
  bool activity = false;
  TimeMs since_ms = 0;
  int corroboration = 0;
  OccupancySource source = OccupancySource::vision;
  double confidence = 0.0;  // mean confirming-detection confidence
  TimeMs last_confirm_ms = 0;
  std::vector<std::string> camera_ids;
  std::vector<Vec3> ground_points;  // latest confirming ground points
  bool operator==(const OccupancyFlag&) const = default;
};

struct CorroborationPolicy {
  int k_cameras = 2;
  double tau_vis = 0.7;
  int m_frames = 5;
  TimeMs window_ms = 1000;
  TimeMs staleness_ms = 2000;
  double activity_speed_mps = 0.5;
};

/// Per-runway latch fed with every processed camera frame for that runway.
/// Detections passed in must already be filtered to the runway's protected
/// area.
class Corroborator {
 public:
  explicit Corroborator(std::string runway_id, CorroborationPolicy policy)
      : runway_(std::move(runway_id)), policy_(policy) {
    flag_.runway = runway_;
  }

  /// Processes one frame (possibly with no detections) of `camera_id`,
  /// available at `now_ms`. Returns true if the flag changed.
  bool on_frame(const std::string& camera_id, std::uint64_t frame_index, TimeMs now_ms,
                const std::vector<Detection>& in_area);
  /// Clears a stale latch. Returns true if the flag changed.
  bool on_tick(TimeMs now_ms);

  const OccupancyFlag& flag() const { return flag_; }

 private:
  struct Hit {
    std::string camera_id;
    TimeMs at_ms;
    double confidence;
    Vec3 ground_point;
  };
  struct Streak {
    std::uint64_t last_frame = 0;
    int length = 0;
    bool any = false;
  };

  std::string runway_;
  CorroborationPolicy policy_;
  OccupancyFlag flag_;
  std::vector<Hit> hits_;  // within the window
  std::map<std::string, Streak> streaks_;
  std::map<std::string, Hit> last_hit_by_camera_;
  std::optional<TimeMs> last_motion_ms_;
};

}  // namespace hilt
