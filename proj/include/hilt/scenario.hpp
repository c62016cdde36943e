#pragma once

// Declarative scenario model: scene geometry, actor roster, scripted radio
// timeline, cameras, seed-driven perturbations and conflict annotation.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hilt/geometry.hpp"
#include "hilt/sim_kernel.hpp"

namespace hilt {

inline constexpr int kScenarioSchemaVersion = 1;

enum class SceneType { airport_surface, enroute };
enum class ActorClass { aircraft, atc, vehicle, wildlife };
enum class CameraMount { tower, nose, tail, runway_fixed };
/// Scripted fault applied to the recipient's readback of a transmission.
enum class ReadbackFault { none, bad_readback, misaddressed };

std::string_view to_string(SceneType v);
std::string_view to_string(ActorClass v);
std::string_view to_string(CameraMount v);
std::string_view to_string(ReadbackFault v);

struct Pose {
  Vec3 position;
  double heading_deg = 0.0;
};

/// Optional per-actor overrides of the configured kinematic defaults.
struct Performance {
  std::optional<double> accel_mps2;
  std::optional<double> decel_mps2;
  std::optional<double> rotation_speed_mps;
  std::optional<double> climb_rate_mps;
  std::optional<double> approach_speed_mps;
  std::optional<double> glide_path_deg;
  std::optional<double> cruise_speed_mps;
  std::optional<double> speed_mps;  // vehicles and wildlife
};

/// Initial behavior. Names by class:
///   aircraft: holding_short, approach, cruise, stop
///   vehicle:  drive, stop
///   wildlife: walk, stand, fly
///   atc:      tower
struct BehaviorSpec {
  std::string name;
  std::optional<std::string> runway;  // runway end used (holding_short/approach)
  std::vector<Vec3> waypoints;        // drive/walk/fly path
  std::optional<double> speed_mps;
  std::optional<double> vertical_speed_mps;
  TimeMs start_at_ms = 0;              // drive/walk start time
  bool noncompliant = false;           // vehicle ignores hold-short instructions
};

struct ActorSpec {
  std::string actor_id;
  ActorClass cls = ActorClass::aircraft;
  std::optional<std::string> callsign;
  std::optional<std::string> frequency;  // tuned frequency
  std::vector<std::string> overhear;     // additional monitored frequencies
  Pose initial_pose;
  BehaviorSpec initial_behavior;
  Performance performance;
  bool adsb_equipped = true;
};

struct ScriptedTransmission {
  std::string turn_id;
  TimeMs at_ms = 0;
  std::string speaker;
  std::string frequency;
  std::optional<std::string> addressed_to;  // intended recipient (may differ from spoken callsign)
  std::string text;
  std::optional<double> snr_db;
  ReadbackFault readback_fault = ReadbackFault::none;
  std::vector<std::string> not_received_by;  // actor ids that never hear this turn
};

struct CameraSpec {
  std::string camera_id;
  CameraMount mount = CameraMount::tower;
  std::optional<std::string> mounted_on;
  Vec3 position;  // scene frame, or body-frame offset (right, forward, up) when mounted
  double yaw_deg = 0.0;    // compass heading of the optical axis (relative to the body when mounted)
  double pitch_deg = 0.0;  // positive up
  double fov_deg = 60.0;
  double sample_hz = 20.0;
  double range_scale = 1.0;  // multiplies the detector's first-detection range
  bool ego_mask = true;
};

struct Perturbations {
  TimeMs timing_ms = 0;
  double position_m = 0.0;
};

struct Environment {
  double visibility_m = 10000.0;
  double snr_db = 30.0;
};

struct SeparationMinima {
  double horizontal_m = 9300.0;
  double vertical_m = 300.0;
};

struct ConflictSpec {
  std::optional<TimeMs> t_conflict_ms;
  bool derivable = false;
  bool expected = true;  // false for nominal scenarios
  std::optional<SeparationMinima> separation;
};

struct Geometry {
  std::vector<Runway> runways;
  std::vector<std::string> frequencies;
  std::string advisory_frequency;
};

struct ScenarioSpec {
  int schema_version = kScenarioSchemaVersion;
  std::string scenario_id;
  std::string family;
  std::string description;
  SceneType scene = SceneType::airport_surface;
  Geometry geometry;
  std::vector<ActorSpec> actors;
  std::vector<ScriptedTransmission> comm_timeline;
  std::vector<CameraSpec> cameras;
  std::uint64_t seed = 0;
  Perturbations perturbations;
  Environment environment;
  ConflictSpec conflict;
  TimeMs duration_ms = 120000;

  const ActorSpec* find_actor(std::string_view actor_id) const;
  const ActorSpec* find_by_callsign(std::string_view callsign) const;
  const Runway* find_runway_by_end(std::string_view end_token) const;
};

/// Ill-formed input (bad JSON, wrong types, missing required fields).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Violation {
  std::string path;
  std::string message;
  bool operator==(const Violation&) const = default;
};

ScenarioSpec scenario_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec load_scenario(const std::filesystem::path& file);

/// Empty iff every scenario invariant holds.
std::vector<Violation> validate(const ScenarioSpec& spec);

/// Seeded timing/position jitter drawn from stream "geometry_jitter".
ScenarioSpec expand_variant(const ScenarioSpec& spec, std::uint64_t seed);

struct SuiteEntry {
  std::filesystem::path file;
  ScenarioSpec spec;
};
/// Loads every scenarios/<family>/*.json under `root`, sorted by path.
std::vector<SuiteEntry> load_suite(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Conflict window derivation

enum class IntervalKind { authorization, occupancy };

/// Half-open [open_ms, close_ms) interval during which an actor holds an
/// authorization for, or physically occupies, a runway's protected area.
struct RunwayInterval {
  std::string actor_id;
  std::string runway_id;
  IntervalKind kind = IntervalKind::authorization;
  TimeMs open_ms = 0;
  std::optional<TimeMs> close_ms;
};

struct ConflictTrace {
  std::vector<RunwayInterval> intervals;
  std::optional<TimeMs> first_predicted_loss_ms;  // enroute scenes
};

/// Annotation wins; otherwise earliest instant two distinct actors overlap on
/// one runway (terminal) or the first predicted loss of separation (enroute).
/// nullopt is the no-conflict marker.
std::optional<TimeMs> derive_conflict_open(const ScenarioSpec& spec, const ConflictTrace& trace);

}  // namespace hilt
