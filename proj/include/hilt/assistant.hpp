#pragma once

// Decision engine: slot-confidence guard, the three-gate rule ladder, the
// weighted evidence fallback and a stateful per-runway evidence tracker
// with advisory debounce.

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hilt/comms.hpp"
#include "hilt/config.hpp"
#include "hilt/phraseology.hpp"
#include "hilt/scenario.hpp"
#include "hilt/severity.hpp"
#include "hilt/surveillance.hpp"

namespace hilt {

struct EvidenceState {
  double W_V = 0.0;
  double W_A = 0.0;
  double W_C = 0.0;
  bool readback_mismatch = false;
  bool activity = false;
  bool occupancy = false;
  std::optional<double> ttg_s;
  bool arrival_context = false;
  bool recipient_ambiguous = false;
  double slot_conf = 0.0;
  bool operator==(const EvidenceState&) const = default;
};

inline constexpr double kWeightVision = 0.50;
inline constexpr double kWeightAsr = 0.35;
inline constexpr double kWeightContext = 0.15;
inline constexpr double kFallbackCaution = 0.75;
inline constexpr double kFallbackAdvisory = 0.50;

struct GateDecision {
  std::string type;  // readback_mismatch | occupancy_conflict | recipient_ambiguity | evidence_fallback
  Severity severity = Severity::INFO;
  std::vector<std::string> rules_triggered;
  double S = 0.0;
  bool operator==(const GateDecision&) const = default;
};

/// Gates a) readback mismatch + activity, b) occupancy + (ttg <= gate or
/// arrival context), c) recipient ambiguity + activity. Highest severity
/// wins; ties go to the earlier gate. rules_triggered lists every gate
/// that fired.
std::optional<GateDecision> evaluate_ladder(const EvidenceState& e, double ttg_gate_s = 8.0);

double evidence_score(double w_v, double w_a, double w_c);
/// S >= 0.75 -> CAUTION, S >= 0.50 -> ADVISORY.
std::optional<GateDecision> evidence_fallback(const EvidenceState& e);

/// Ladder first; the fallback only when no gate fired.
std::optional<GateDecision> decide(const EvidenceState& e, double ttg_gate_s = 8.0);

struct AdvisoryEvidence {
  std::vector<std::string> turn_ids;
  std::vector<std::string> camera_ids;
  std::vector<std::string> track_ids;  // ADS-B actor ids behind the finding
  std::optional<double> ttg_s;
  std::vector<std::string> rules_triggered;
  double W_V = 0.0;
  double W_A = 0.0;
  double W_C = 0.0;
  double S = 0.0;
  std::optional<std::string> runway;
};

struct Advisory {
  std::string advisory_id;
  std::string type;
  Severity severity = Severity::INFO;
  std::string message;
  std::vector<std::string> recipients;
  AdvisoryEvidence evidence;
  TimeMs t_ready_ms = 0;
  TimeMs t_dec_ms = 0;
  std::string provenance = "builtin";
  std::vector<std::string> actors;  // actor pair (or single actor) the advisory concerns
};

nlohmann::json to_json(const Advisory& advisory);
/// Schema check of a plugin-supplied advisory object. Throws
/// std::invalid_argument describing the first violation.
Advisory advisory_from_json(const nlohmann::json& doc);

/// slot_conf < tau -> INFO clarification request addressed to the speaker.
std::optional<Advisory> guard(const ParsedSlots& slots, double slot_conf, double tau, const std::string& speaker_callsign,
                              const std::string& turn_id, TimeMs now_ms);

struct TemplateSlots {
  std::optional<std::string> runway;
  std::vector<std::string> callsigns;
  std::optional<double> ttg_s;
  std::optional<std::string> heard_runway;
};
/// Deterministic message text per advisory type.
std::string render_message(const std::string& type, Severity severity, const TemplateSlots& slots);

/// True when the advisory is at or above speak_min.
inline bool should_speak(Severity severity, Severity speak_min) { return level(severity) >= level(speak_min); }

// ---------------------------------------------------------------------------
// Plugin hook

struct DecisionOutcome {
  enum class Status { ok, no_advisory, timeout, schema_violation, unreachable };
  Status status = Status::unreachable;
  std::optional<Advisory> advisory;
  std::string diagnostic;
};
std::string_view to_string(DecisionOutcome::Status status);

class DecisionPlugin {
 public:
  virtual ~DecisionPlugin() = default;
  virtual DecisionOutcome decide(const nlohmann::json& bundle) = 0;
};

// ---------------------------------------------------------------------------
// Stateful engine

struct EngineEvent {
  enum class Kind { advisory, plugin_fallback };
  Kind kind = Kind::advisory;
  Advisory advisory;
  std::string diagnostic;
};

class AssistantEngine {
 public:
  AssistantEngine(const ScenarioSpec& spec, const RunConfig& config);

  std::vector<EngineEvent> on_transcript(const AsrResult& asr, const RadioTurn& turn, TimeMs now_ms);
  std::vector<EngineEvent> on_tracks(const std::vector<Track>& tracks, TimeMs now_ms);
  std::vector<EngineEvent> on_frame(const std::string& camera_id, std::uint64_t frame_index,
                                    const std::vector<Detection>& detections, TimeMs now_ms);
  std::vector<EngineEvent> on_tick(TimeMs now_ms);

  EvidenceState evidence_for(const std::string& runway_id, TimeMs now_ms) const;
  const OccupancyFlag* occupancy(const std::string& runway_id) const;
  void set_decision_plugin(DecisionPlugin* plugin) { plugin_ = plugin; }

 private:
  struct Clearance {
    Action action;
    std::string runway_end;
    std::string runway_id;
    std::string turn_id;
    TimeMs at_ms;
  };
  struct LastInstruction {
    ParsedSlots slots;
    std::string turn_id;
  };
  struct Mismatch {
    std::string callsign;
    std::string cleared_end;
    std::string heard_end;
    std::vector<std::string> turn_ids;
    double weight = 0.0;
  };
  struct Ambiguity {
    std::string turn_id;
    std::string runway_end;
    TimeMs at_ms;
  };
  struct VisionWindow {
    std::vector<std::pair<TimeMs, double>> w_v;  // (time, W_V) within the corroboration window
    std::optional<ClassLabel> label;
  };
  struct Arrival {
    std::string actor_id;
    std::string callsign;
    std::string runway_end;
    double ttg_s;
  };
  struct RunwayView {
    EvidenceState evidence;
    std::vector<Arrival> arrivals;
    std::vector<std::string> occupant_callsigns;
    std::vector<std::string> occupant_actors;
    std::vector<std::string> camera_ids;
    std::vector<std::string> track_ids;
    std::vector<std::string> turn_ids;
  };
  struct DebounceEntry {
    TimeMs at_ms;
    Severity severity;
  };

  RunwayView view(const Runway& runway, TimeMs now_ms) const;
  std::vector<Arrival> arrivals_for(const Runway& runway, TimeMs now_ms) const;
  std::vector<const Track*> fresh_tracks(TimeMs now_ms) const;
  std::optional<std::string> associate(const CameraPose& pose, double fov_deg, const Detection& d,
                                       TimeMs now_ms) const;
  std::vector<EngineEvent> finalize(Advisory advisory, const nlohmann::json& context, TimeMs now_ms);
  std::vector<EngineEvent> evaluate(TimeMs now_ms);
  std::vector<EngineEvent> evaluate_enroute(TimeMs now_ms);
  bool admit(const Advisory& advisory, TimeMs now_ms);
  Advisory make_advisory(const std::string& type, Severity severity, TimeMs now_ms);
  const ActorSpec* actor_by_callsign(const std::string& callsign) const;

  const ScenarioSpec& spec_;
  RunConfig config_;
  std::vector<std::string> roster_callsigns_;
  std::map<std::string, Clearance> takeoff_clearances_;  // by callsign
  std::map<std::string, Clearance> landing_clearances_;
  std::map<std::string, LastInstruction> last_instruction_;  // by addressed callsign
  std::map<std::string, Mismatch> mismatches_;    // by runway id
  std::map<std::string, Ambiguity> ambiguities_;  // by runway id
  std::map<std::string, Track> tracks_;           // latest by actor id
  std::map<std::string, Corroborator> corroborators_;
  std::map<std::string, VisionWindow> vision_;  // by runway id
  std::map<std::string, std::set<std::string>> arrival_memory_;  // runway id -> actor ids
  std::map<std::string, int> unidentified_streak_;                // camera id -> frames
  std::set<std::string> clarified_turns_;
  std::map<std::string, DebounceEntry> debounce_;
  double last_slot_conf_ = 1.0;
  std::uint64_t next_id_ = 1;
  DecisionPlugin* plugin_ = nullptr;
  std::vector<nlohmann::json> recent_transcripts_;  // plugin bundle inputs
  std::vector<nlohmann::json> recent_detections_;
};

}  // namespace hilt
