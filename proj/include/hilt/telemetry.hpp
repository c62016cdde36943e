#pragma once

// Timestamp ledger, per-module latency statistics, time-to-first-warning,
// the JSONL event log and batch aggregation.

#include <nlohmann/json.hpp>

#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hilt/severity.hpp"
#include "hilt/sim_kernel.hpp"

namespace hilt {

inline constexpr int kEventLogSchemaVersion = 1;

struct LatencyLedger {
  struct Turn {
    std::string turn_id;
    TimeMs t_tx_ms = 0;
    std::optional<TimeMs> t_asr_out_ms;
  };
  struct Frame {
    std::string camera_id;
    TimeMs t_frame_ms = 0;
    TimeMs t_vision_ms = 0;
  };
  struct Adsb {
    TimeMs t_in_ms = 0;
    TimeMs t_out_ms = 0;
  };
  struct AdvisoryTimes {
    std::string advisory_id;
    Severity severity = Severity::INFO;
    TimeMs t_ready_ms = 0;
    TimeMs t_dec_ms = 0;
    std::optional<TimeMs> t_tts_ms;
  };

  std::vector<Turn> turns;
  std::vector<Frame> frames;
  std::vector<Adsb> adsb;
  std::vector<AdvisoryTimes> advisories;
  std::optional<TimeMs> t_conflict_ms;
  bool conflict_expected = true;
  std::optional<double> first_detection_range_m;
};

struct Stats {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double p95 = 0.0;  // nearest rank
  bool operator==(const Stats&) const = default;
};

Stats summarize(std::vector<double> values);

struct Telescoping {
  TimeMs ready_minus_conflict_ms = 0;
  TimeMs decision_ms = 0;
  TimeMs tts_ms = 0;
  bool operator==(const Telescoping&) const = default;
};

struct RunMetrics {
  Stats asr_latency_ms;
  Stats vision_latency_ms;
  Stats adsb_latency_ms;
  Stats decision_latency_ms;
  Stats tts_latency_ms;
  std::optional<TimeMs> ttfw_ms;
  bool early_warning = false;
  std::optional<double> first_detection_range_m;
  bool warned = false;  // a spoken advisory exists
  std::map<std::string, int> advisory_count;  // by severity name
  std::optional<TimeMs> t_conflict_ms;
  std::optional<std::string> first_spoken_advisory;
  std::optional<Telescoping> telescoping;
  bool conflict_expected = true;
  std::vector<std::string> diagnostics;
  bool operator==(const RunMetrics&) const = default;
};

/// Pure function of the ledger.
RunMetrics compute_latencies(const LatencyLedger& ledger);
nlohmann::json to_json(const Stats& stats);
nlohmann::json to_json(const RunMetrics& metrics);

// ---------------------------------------------------------------------------
// Event log

struct LogRecord {
  TimeMs ts_ms = 0;
  std::string kind;
  nlohmann::json payload;
};

/// Serialized form: {"kind", "payload", "ts_ms", "v"} with sorted keys.
std::string serialize_record(const LogRecord& record);

/// Append-only JSONL log. Appends come from the simulation loop; readers on
/// other threads take snapshots or subscribe for a live copy of each line.
class EventLog {
 public:
  using Listener = std::function<void(const LogRecord&)>;

  void append(TimeMs ts_ms, std::string kind, nlohmann::json payload);
  std::vector<std::string> snapshot() const;
  std::vector<LogRecord> records() const;
  std::size_t size() const;
  std::string text() const;
  void write(std::ostream& out) const;

  /// The listener runs synchronously inside append(). Returns a handle.
  int subscribe(Listener listener);
  void unsubscribe(int handle);

 private:
  mutable std::mutex mutex_;
  std::vector<LogRecord> records_;
  std::vector<std::string> lines_;
  std::map<int, Listener> listeners_;
  int next_handle_ = 1;
};

/// Throws std::runtime_error naming the offending line.
std::vector<LogRecord> parse_log(std::istream& in);
std::vector<LogRecord> parse_log_text(const std::string& text);

struct LogCheck {
  std::vector<std::string> missing;
  bool complete() const { return missing.empty(); }
};
/// Lists absent terminal events: run_start, run_end, tts for spoken advisories.
LogCheck check_log(const std::vector<LogRecord>& records);

/// Rebuilds the timestamp ledger from log records.
LatencyLedger ledger_from_log(const std::vector<LogRecord>& records);

// ---------------------------------------------------------------------------
// Batch aggregation

struct RunSummary {
  std::string scenario_id;
  std::string family;
  std::uint64_t seed = 0;
  bool finished = true;
  std::string error;
  double visibility_m = 0.0;
  double snr_db = 0.0;
  RunMetrics metrics;
};

struct MeanStd {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};
MeanStd mean_std(const std::vector<double>& values);

/// Per-family and per-scenario tables: run counts, warn rate over conflict
/// runs, TTFW and per-module latency mean/stddev.
nlohmann::json aggregate(const std::vector<RunSummary>& runs);

}  // namespace hilt
