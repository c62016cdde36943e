#pragma once

// Run director: owns one kernel and wires actors, the radio bus, the ASR,
// ADS-B and camera pipelines, the assistant and telemetry together. Also
// hosts human role claims and replay.

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "hilt/actors.hpp"
#include "hilt/assistant.hpp"
#include "hilt/comms.hpp"
#include "hilt/config.hpp"
#include "hilt/plugins.hpp"
#include "hilt/scenario.hpp"
#include "hilt/sim_kernel.hpp"
#include "hilt/surveillance.hpp"
#include "hilt/telemetry.hpp"

namespace hilt {

struct RunOptions {
  std::uint64_t seed = 0;
  ClockMode mode = ClockMode::fast_time;
  double pace = 1.0;
  RunConfig config;
  PluginSet plugins;
  /// Mode written to run_start; replays of real-time runs keep the original.
  std::optional<ClockMode> logged_mode;
  /// Replay of a stopped run: stop after this many dispatched events.
  std::optional<std::uint64_t> stop_after_dispatches;
};

/// Seed expansion plus batch environment overrides.
ScenarioSpec prepare_scenario(const ScenarioSpec& raw, std::uint64_t seed, std::optional<double> visibility_m = {},
                              std::optional<double> snr_db = {});

class RoleError : public std::runtime_error {
 public:
  enum class Kind { not_found, unclaimable, conflict, mode, not_claimed, invalid };
  RoleError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct RunResult {
  std::string scenario_id;
  std::uint64_t seed = 0;
  bool finished = false;
  std::string error;
  RunMetrics metrics;
  LatencyLedger ledger;
  std::vector<Advisory> advisories;
  std::optional<TimeMs> t_conflict_ms;
  ConflictTrace trace;
};

class Director {
 public:
  /// `spec` must already be prepared (expanded); it is logged verbatim.
  Director(ScenarioSpec spec, RunOptions options);
  ~Director();

  Director(const Director&) = delete;
  Director& operator=(const Director&) = delete;

  /// Schedules the scenario and runs to its duration (or a stop request).
  RunResult run();

  // Human-in-the-loop requests. Call on the loop thread (the gateway goes
  // through post()). Requests are validated immediately and take effect at
  // the start of the next kinematic tick, which keeps logs replayable.
  void claim_role(const std::string& session_id, const std::string& actor_id);
  /// Returns the turn id the injected transmission will carry.
  std::string transmit(const std::string& session_id, const std::string& frequency,
                       const std::optional<std::string>& addressed_to, const std::string& text);
  std::optional<std::string> claimed_actor(const std::string& session_id) const;

  /// Thread-safe.
  void post(std::function<void(Kernel&)> command) { kernel_.post(std::move(command)); }
  void request_stop() { kernel_.request_stop(); }

  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }
  const ScenarioSpec& spec() const { return spec_; }
  const RunOptions& options() const { return options_; }
  const std::vector<ActorState>& actors() const { return actors_; }
  TimeMs now() const { return kernel_.now(); }

  // Replay injection (loop thread, at the recorded time).
  void schedule_claim(TimeMs at_ms, const std::string& session_id, const std::string& actor_id);
  void schedule_human_turn(TimeMs at_ms, const std::string& session_id, const std::string& frequency,
                           const std::optional<std::string>& addressed_to, const std::string& text);

 private:
  struct HumanAction {
    std::optional<TimeMs> apply_at_ms;  // replay: the recorded tick; live: next tick
    bool is_claim = false;
    std::string session_id;
    std::string actor_id;
    std::string turn_id;
    std::string frequency;
    std::optional<std::string> addressed_to;
    std::string text;
  };

  void start();
  void apply_human_actions(TimeMs now);
  void validate_claim(const std::string& session_id, const std::string& actor_id) const;
  void tick(TimeMs now);
  void sample_adsb(TimeMs now);
  void sample_camera(std::size_t camera_index, std::uint64_t frame_index, TimeMs now);
  void log_actor_states(TimeMs now);
  void scripted_transmission(const ScriptedTransmission& tx);
  void send_turn(RadioTurn turn, ReadbackFault fault, const std::optional<std::string>& script_callsign);
  void on_receive(const RadioTurn& turn, const std::string& receiver, bool overheard, ReadbackFault fault,
                  const std::optional<std::string>& script_callsign);
  void handle_engine_events(std::vector<EngineEvent> events, TimeMs now);
  void finalize_advisory(Advisory advisory);
  void actor_reply(std::size_t actor_index, const std::string& text, const std::string& in_reply_to);
  void update_truth_intervals(TimeMs now);
  void open_interval(const std::string& actor_id, const std::string& runway_id, IntervalKind kind, TimeMs at_ms,
                     const std::string& cause);
  void close_interval(const std::string& actor_id, const std::string& runway_id, IntervalKind kind, TimeMs at_ms,
                      const std::string& cause);
  void check_conflict(const std::string& runway_id, TimeMs now);
  void check_separation(TimeMs now);
  void end_run(TimeMs now);

  std::optional<std::size_t> actor_index(const std::string& actor_id) const;
  std::optional<std::size_t> actor_by_callsign(const std::string& callsign) const;
  double turn_snr(const std::optional<double>& scripted) const;
  std::string next_turn_id(const std::string& prefix);

  ScenarioSpec spec_;
  RunOptions options_;
  Kernel kernel_;
  EventLog log_;
  RadioBus bus_;
  AssistantEngine engine_;
  std::vector<ActorState> actors_;
  std::vector<ActorParams> params_;
  std::vector<bool> equipped_;
  std::vector<std::string> roster_;

  LatencyLedger ledger_;
  std::vector<Advisory> advisories_;
  ConflictTrace trace_;
  std::map<std::string, std::size_t> open_;  // "actor|runway|kind" -> interval index
  std::set<std::string> occupied_once_;      // "actor|runway" that entered the protected area
  std::optional<TimeMs> live_conflict_ms_;
  bool finished_ = false;

  std::map<std::string, std::string> claims_;          // actor id -> session id (in effect)
  std::map<std::string, std::string> session_claims_;  // session id -> actor id
  std::map<std::string, std::string> projected_claims_;    // including queued claims
  std::map<std::string, std::string> projected_sessions_;
  std::vector<HumanAction> pending_human_;
  std::set<std::string> reasked_;
  std::map<std::string, int> turn_counters_;
  std::map<std::string, std::string> last_atc_instruction_;  // callsign -> text
  std::set<std::string> atc_repeated_;
  std::map<std::string, TimeMs> last_instruction_rx_;  // actor id -> time addressed
  std::map<std::string, RadioTurn> turns_;             // by turn id, for ASR completion
};

/// Prepares and runs one scenario in fast time.
RunResult run_scenario(const ScenarioSpec& raw, std::uint64_t seed, const RunConfig& config,
                       PluginSet plugins = {}, std::optional<double> visibility_m = {},
                       std::optional<double> snr_db = {}, std::string* log_text = nullptr);

/// Re-simulates a logged run from its run_start record, re-injecting human
/// claims and turns. Returns the replayed log text.
std::string replay_log(const std::vector<LogRecord>& records, RunResult* result = nullptr, PluginSet plugins = {});

}  // namespace hilt
