#include "hilt/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hilt {

Stats summarize(std::vector<double> values) {
  Stats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(values.size())));
  s.p95 = values[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

RunMetrics compute_latencies(const LatencyLedger& ledger) {
  RunMetrics m;
  std::vector<double> asr, vision, adsb, decision, tts;
  for (const auto& t : ledger.turns) {
    if (t.t_asr_out_ms) asr.push_back(static_cast<double>(*t.t_asr_out_ms - t.t_tx_ms));
  }
  for (const auto& f : ledger.frames) vision.push_back(static_cast<double>(f.t_vision_ms - f.t_frame_ms));
  for (const auto& a : ledger.adsb) adsb.push_back(static_cast<double>(a.t_out_ms - a.t_in_ms));

  const LatencyLedger::AdvisoryTimes* first = nullptr;
  for (const auto& a : ledger.advisories) {
    decision.push_back(static_cast<double>(a.t_dec_ms - a.t_ready_ms));
    ++m.advisory_count[std::string(to_string(a.severity))];
    if (!a.t_tts_ms) continue;
    tts.push_back(static_cast<double>(*a.t_tts_ms - a.t_dec_ms));
    if (!first || *a.t_tts_ms < *first->t_tts_ms) first = &a;
  }
  m.asr_latency_ms = summarize(std::move(asr));
  m.vision_latency_ms = summarize(std::move(vision));
  m.adsb_latency_ms = summarize(std::move(adsb));
  m.decision_latency_ms = summarize(std::move(decision));
  m.tts_latency_ms = summarize(std::move(tts));
  m.first_detection_range_m = ledger.first_detection_range_m;
  m.t_conflict_ms = ledger.t_conflict_ms;
  m.conflict_expected = ledger.conflict_expected;
  m.warned = first != nullptr;
  if (first) {
    m.first_spoken_advisory = first->advisory_id;
    if (ledger.t_conflict_ms) {
      m.ttfw_ms = *first->t_tts_ms - *ledger.t_conflict_ms;
      m.early_warning = *m.ttfw_ms < 0;
      m.telescoping = Telescoping{first->t_ready_ms - *ledger.t_conflict_ms, first->t_dec_ms - first->t_ready_ms,
                                  *first->t_tts_ms - first->t_dec_ms};
    } else {
      m.diagnostics.push_back("spoken advisory " + first->advisory_id + " without t_conflict: TTFW undefined");
    }
  }
  return m;
}

nlohmann::json to_json(const Stats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"p95", s.p95}};
}

namespace {

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const RunMetrics& m) {
  nlohmann::json j{
      {"asr_latency_ms", to_json(m.asr_latency_ms)},
      {"vision_latency_ms", to_json(m.vision_latency_ms)},
      {"adsb_latency_ms", to_json(m.adsb_latency_ms)},
      {"decision_latency_ms", to_json(m.decision_latency_ms)},
      {"tts_latency_ms", to_json(m.tts_latency_ms)},
      {"ttfw_ms", opt(m.ttfw_ms)},
      {"early_warning", m.early_warning},
      {"first_detection_range_m", opt(m.first_detection_range_m)},
      {"warned", m.warned},
      {"advisory_count", m.advisory_count},
      {"t_conflict_ms", opt(m.t_conflict_ms)},
      {"first_spoken_advisory", opt(m.first_spoken_advisory)},
      {"conflict_expected", m.conflict_expected},
      {"diagnostics", m.diagnostics},
  };
  if (m.telescoping) {
    j["telescoping"] = {{"ready_minus_conflict_ms", m.telescoping->ready_minus_conflict_ms},
                        {"decision_ms", m.telescoping->decision_ms},
                        {"tts_ms", m.telescoping->tts_ms}};
  } else {
    j["telescoping"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------

std::string serialize_record(const LogRecord& r) {
  nlohmann::json j{{"ts_ms", r.ts_ms}, {"kind", r.kind}, {"payload", r.payload}, {"v", kEventLogSchemaVersion}};
  return j.dump();
}

void EventLog::append(TimeMs ts_ms, std::string kind, nlohmann::json payload) {
  LogRecord rec{ts_ms, std::move(kind), std::move(payload)};
  std::string line = serialize_record(rec);
  std::vector<Listener> listeners;
  {
    std::lock_guard lock(mutex_);
    lines_.push_back(std::move(line));
    records_.push_back(rec);
    for (const auto& [_, l] : listeners_) listeners.push_back(l);
  }
  for (const auto& l : listeners) l(rec);
}

std::vector<std::string> EventLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

std::vector<LogRecord> EventLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mutex_);
  return lines_.size();
}

std::string EventLog::text() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

void EventLog::write(std::ostream& out) const { out << text(); }

int EventLog::subscribe(Listener listener) {
  std::lock_guard lock(mutex_);
  const int h = next_handle_++;
  listeners_[h] = std::move(listener);
  return h;
}

void EventLog::unsubscribe(int handle) {
  std::lock_guard lock(mutex_);
  listeners_.erase(handle);
}

std::vector<LogRecord> parse_log(std::istream& in) {
  std::vector<LogRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(n) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("ts_ms") || !j["ts_ms"].is_number_integer() || !j.contains("kind") ||
        !j["kind"].is_string() || !j.contains("payload")) {
      throw std::runtime_error("line " + std::to_string(n) + ": not an event record");
    }
    if (j.value("v", 0) != kEventLogSchemaVersion) {
      throw std::runtime_error("line " + std::to_string(n) + ": unsupported schema version");
    }
    out.push_back(LogRecord{j["ts_ms"].get<TimeMs>(), j["kind"].get<std::string>(), j["payload"]});
  }
  return out;
}

std::vector<LogRecord> parse_log_text(const std::string& text) {
  std::istringstream in(text);
  return parse_log(in);
}

LogCheck check_log(const std::vector<LogRecord>& records) {
  LogCheck c;
  if (records.empty() || records.front().kind != "run_start") c.missing.push_back("run_start");
  const bool ended = !records.empty() && records.back().kind == "run_end";
  if (!ended) c.missing.push_back("run_end");
  std::set<std::string> spoken, voiced;
  for (const auto& r : records) {
    if (r.kind == "advisory" && r.payload.value("spoken", false)) spoken.insert(r.payload.value("advisory_id", ""));
    if (r.kind == "tts") voiced.insert(r.payload.value("advisory_id", ""));
  }
  // A spoken advisory may still be in synthesis when a complete run ends.
  if (!ended) {
    for (const auto& id : spoken) {
      if (!voiced.contains(id)) c.missing.push_back("tts:" + id);
    }
  }
  return c;
}

LatencyLedger ledger_from_log(const std::vector<LogRecord>& records) {
  LatencyLedger l;
  std::map<std::string, std::size_t> turn_index, adv_index;
  for (const auto& r : records) {
    const auto& p = r.payload;
    if (r.kind == "run_start") {
      if (p.contains("scenario") && p["scenario"].contains("conflict")) {
        l.conflict_expected = p["scenario"]["conflict"].value("expected", true);
      }
    } else if (r.kind == "radio_turn") {
      turn_index[p.at("turn_id").get<std::string>()] = l.turns.size();
      l.turns.push_back({p.at("turn_id").get<std::string>(), p.at("t_tx_ms").get<TimeMs>(), std::nullopt});
    } else if (r.kind == "asr_out") {
      auto it = turn_index.find(p.at("turn_id").get<std::string>());
      if (it != turn_index.end()) l.turns[it->second].t_asr_out_ms = p.at("t_asr_out_ms").get<TimeMs>();
    } else if (r.kind == "vision") {
      l.frames.push_back(
          {p.at("camera_id").get<std::string>(), p.at("t_frame_ms").get<TimeMs>(), p.at("t_vision_ms").get<TimeMs>()});
      if (!l.first_detection_range_m) {
        for (const auto& d : p.at("detections")) {
          const double rng = d.at("range_m").get<double>();
          if (!l.first_detection_range_m || rng < *l.first_detection_range_m) l.first_detection_range_m = rng;
        }
      }
    } else if (r.kind == "adsb") {
      const TimeMs in = p.at("t_adsb_in_ms").get<TimeMs>();
      const TimeMs out = p.at("t_adsb_out_ms").get<TimeMs>();
      for (std::size_t i = 0; i < p.at("tracks").size(); ++i) l.adsb.push_back({in, out});
    } else if (r.kind == "advisory") {
      LatencyLedger::AdvisoryTimes a;
      a.advisory_id = p.at("advisory_id").get<std::string>();
      a.severity = severity_from_string(p.at("severity").get<std::string>()).value_or(Severity::INFO);
      a.t_ready_ms = p.at("t_ready_ms").get<TimeMs>();
      a.t_dec_ms = p.at("t_dec_ms").get<TimeMs>();
      adv_index[a.advisory_id] = l.advisories.size();
      l.advisories.push_back(std::move(a));
    } else if (r.kind == "tts") {
      auto it = adv_index.find(p.at("advisory_id").get<std::string>());
      if (it != adv_index.end()) l.advisories[it->second].t_tts_ms = p.at("t_tts_ms").get<TimeMs>();
    } else if (r.kind == "run_end") {
      if (p.contains("t_conflict_ms") && !p["t_conflict_ms"].is_null()) l.t_conflict_ms = p["t_conflict_ms"].get<TimeMs>();
    }
  }
  return l;
}

// ---------------------------------------------------------------------------

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  m.count = values.size();
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return m;
}

namespace {

nlohmann::json ms_json(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const MeanStd m = mean_std(v);
  return {{"count", m.count}, {"mean", m.mean}, {"stddev", m.stddev}};
}

nlohmann::json table(const std::vector<const RunSummary*>& runs) {
  std::size_t finished = 0, conflict_runs = 0, warned = 0, nominal_runs = 0, nominal_warned = 0, early = 0;
  std::vector<double> ttfw, asr, vision, adsb, decision, tts, range;
  for (const RunSummary* r : runs) {
    if (!r->finished) continue;
    ++finished;
    const RunMetrics& m = r->metrics;
    if (m.conflict_expected) {
      ++conflict_runs;
      if (m.warned) ++warned;
    } else {
      ++nominal_runs;
      if (m.warned) ++nominal_warned;
    }
    if (m.ttfw_ms) {
      ttfw.push_back(static_cast<double>(*m.ttfw_ms));
      if (m.early_warning) ++early;
    }
    if (m.asr_latency_ms.count) asr.push_back(m.asr_latency_ms.mean);
    if (m.vision_latency_ms.count) vision.push_back(m.vision_latency_ms.mean);
    if (m.adsb_latency_ms.count) adsb.push_back(m.adsb_latency_ms.mean);
    if (m.decision_latency_ms.count) decision.push_back(m.decision_latency_ms.mean);
    if (m.tts_latency_ms.count) tts.push_back(m.tts_latency_ms.mean);
    if (m.first_detection_range_m) range.push_back(*m.first_detection_range_m);
  }
  nlohmann::json j{
      {"runs", runs.size()},
      {"finished", finished},
      {"conflict_runs", conflict_runs},
      {"warned", warned},
      {"early_warnings", early},
      {"ttfw_ms", ms_json(ttfw)},
      {"asr_latency_ms", ms_json(asr)},
      {"vision_latency_ms", ms_json(vision)},
      {"adsb_latency_ms", ms_json(adsb)},
      {"decision_latency_ms", ms_json(decision)},
      {"tts_latency_ms", ms_json(tts)},
      {"first_detection_range_m", ms_json(range)},
  };
  j["warn_rate"] = conflict_runs ? nlohmann::json(static_cast<double>(warned) / static_cast<double>(conflict_runs))
                                 : nlohmann::json(nullptr);
  j["nominal_runs"] = nominal_runs;
  j["false_alert_rate"] = nominal_runs ? nlohmann::json(static_cast<double>(nominal_warned) /
                                                        static_cast<double>(nominal_runs))
                                       : nlohmann::json(nullptr);
  return j;
}

}  // namespace

nlohmann::json aggregate(const std::vector<RunSummary>& runs) {
  std::map<std::string, std::vector<const RunSummary*>> by_family, by_scenario;
  std::vector<const RunSummary*> all;
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto& r : runs) {
    by_family[r.family].push_back(&r);
    by_scenario[r.scenario_id].push_back(&r);
    all.push_back(&r);
    per_run.push_back({{"scenario_id", r.scenario_id},
                       {"family", r.family},
                       {"seed", r.seed},
                       {"finished", r.finished},
                       {"error", r.error},
                       {"visibility_m", r.visibility_m},
                       {"snr_db", r.snr_db},
                       {"metrics", to_json(r.metrics)}});
  }
  nlohmann::json fam = nlohmann::json::object();
  for (const auto& [k, v] : by_family) fam[k] = table(v);
  nlohmann::json scen = nlohmann::json::object();
  for (const auto& [k, v] : by_scenario) scen[k] = table(v);
  return {{"schema_version", 1}, {"overall", table(all)}, {"families", fam}, {"scenarios", scen}, {"runs", per_run}};
}

}  // namespace hilt
