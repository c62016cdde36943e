#include "hilt/comms.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "hilt/phraseology.hpp"

namespace hilt {

double channel_p_err(double snr_db, const ChannelConfig& channel) {
  if (snr_db <= channel.snr_floor_db) return channel.p_max;
  const double p = (channel.snr_clean_db - snr_db) / channel.snr_span_db;
  return std::clamp(p, 0.0, channel.p_max);
}

namespace {

// Splits a whitespace word into (lowercase core, trailing punctuation).
std::pair<std::string, std::string> split_word(const std::string& word) {
  std::size_t end = word.size();
  while (end > 0 && !std::isalnum(static_cast<unsigned char>(word[end - 1]))) --end;
  std::string core = word.substr(0, end);
  for (auto& c : core) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return {core, word.substr(end)};
}

}  // namespace

DegradeResult degrade_text(std::string_view text, double p_err, RandomStream& stream) {
  DegradeResult out;
  out.p_err = p_err;
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  out.words = words.size();
  if (p_err <= 0.0) {
    out.text = std::string(text);
    return out;
  }
  std::vector<std::string> kept;
  for (const auto& w : words) {
    if (!stream.bernoulli(p_err)) {
      kept.push_back(w);
      continue;
    }
    ++out.errors;
    const auto [core, tail] = split_word(w);
    const auto alternatives = digit_confusions(core);
    if (!alternatives.empty()) {
      const auto pick = static_cast<std::size_t>(stream.uniform_int(0, static_cast<std::int64_t>(alternatives.size()) - 1));
      kept.push_back(std::string(alternatives[pick]) + tail);
    }
    // Non-confusable words are lost in the noise.
  }
  std::string joined;
  for (const auto& w : kept) {
    if (!joined.empty()) joined += ' ';
    joined += w;
  }
  out.text = std::move(joined);
  return out;
}

DegradeResult degrade(std::string_view text, double snr_db, const ChannelConfig& channel, RandomStream& stream) {
  return degrade_text(text, channel_p_err(snr_db, channel), stream);
}

double asr_confidence(double p_err_total, double k) { return std::max(0.0, 1.0 - k * p_err_total); }

AsrResult simulate_asr(const RadioTurn& turn, const RunConfig& config, RandomStream& noise, RandomStream& latency) {
  AsrResult r;
  r.turn_id = turn.turn_id;
  r.t_tx_ms = turn.t_tx_ms;
  const DegradeResult channel = degrade(turn.clean_text, turn.snr_db, config.channel, noise);
  const DegradeResult recog = degrade_text(channel.text, config.asr.word_error, noise);
  r.channel_text = channel.text;
  r.transcript = recog.text;
  r.p_err_total = 1.0 - (1.0 - channel.p_err) * (1.0 - config.asr.word_error);
  r.confidence = asr_confidence(r.p_err_total, config.asr.confidence_k);
  r.t_asr_out_ms = turn.t_tx_ms + config.latency.asr.sample(latency);
  return r;
}

std::optional<TimeMs> deliver_tts(Severity severity, TimeMs t_dec_ms, Severity speak_min, const LatencyProfile& profile,
                                  RandomStream& stream) {
  if (level(severity) < level(speak_min)) return std::nullopt;
  return t_dec_ms + profile.sample(stream);
}

TimeMs speech_duration_ms(std::string_view text, TimeMs ms_per_word) {
  std::istringstream in{std::string(text)};
  TimeMs words = 0;
  for (std::string w; in >> w;) ++words;
  return words * ms_per_word;
}

void RadioBus::subscribe(const std::string& receiver, std::optional<std::string> tuned,
                         std::vector<std::string> overhear) {
  subscribers_.push_back(Subscriber{receiver, std::move(tuned), std::move(overhear)});
}

void RadioBus::retune(const std::string& receiver, std::string frequency) {
  for (auto& s : subscribers_) {
    if (s.id == receiver) s.tuned = std::move(frequency);
  }
}

bool RadioBus::knows_frequency(const std::string& frequency) const {
  return std::find(frequencies_.begin(), frequencies_.end(), frequency) != frequencies_.end();
}

std::vector<RadioBus::Delivery> RadioBus::transmit(RadioTurn& turn, TimeMs airtime_ms) {
  if (!knows_frequency(turn.frequency)) throw std::logic_error("transmit on unknown frequency " + turn.frequency);
  auto last = last_tx_.find(turn.frequency);
  if (last != last_tx_.end() && turn.t_tx_ms < last->second) {
    throw std::logic_error("turn " + turn.turn_id + " goes back in time on " + turn.frequency);
  }
  last_tx_[turn.frequency] = turn.t_tx_ms;
  TimeMs receive_at = turn.t_tx_ms + airtime_ms;
  auto lr = last_receive_.find(turn.frequency);
  if (lr != last_receive_.end()) receive_at = std::max(receive_at, lr->second);
  last_receive_[turn.frequency] = receive_at;

  std::vector<Delivery> out;
  turn.overheard_by.clear();
  for (const auto& s : subscribers_) {
    if (s.id == turn.speaker) continue;
    if (std::find(turn.not_received_by.begin(), turn.not_received_by.end(), s.id) != turn.not_received_by.end()) {
      continue;
    }
    const bool tuned = s.tuned && *s.tuned == turn.frequency;
    const bool overhears = std::find(s.overhear.begin(), s.overhear.end(), turn.frequency) != s.overhear.end();
    if (!tuned && !overhears) continue;
    if (!tuned) turn.overheard_by.push_back(s.id);
    out.push_back(Delivery{s.id, !tuned, receive_at});
  }
  return out;
}

}  // namespace hilt
