#pragma once

// Radio loop: frequency-addressed bus with per-frequency FIFO delivery, a
// word-level channel degradation model indexed by SNR, and the simulated
// ASR/TTS timing.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hilt/config.hpp"
#include "hilt/severity.hpp"
#include "hilt/sim_kernel.hpp"

namespace hilt {

struct RadioTurn {
  std::string turn_id;
  TimeMs t_tx_ms = 0;
  std::string frequency;
  std::string speaker;  // actor id
  std::optional<std::string> addressed_to;
  std::string clean_text;
  std::string degraded_text;
  double snr_db = 0.0;
  std::vector<std::string> overheard_by;
  std::string provenance = "scripted";  // scripted | actor | human | assistant
  std::vector<std::string> not_received_by;
};

struct DegradeResult {
  std::string text;
  double p_err = 0.0;
  std::size_t words = 0;
  std::size_t errors = 0;
};

/// clamp((snr_clean - snr) / snr_span, 0, p_max). Values at or below the
/// floor saturate at p_max.
double channel_p_err(double snr_db, const ChannelConfig& channel);

/// Corrupts each word independently with probability p_err: digit words are
/// substituted within their confusion set, other words are dropped.
/// p_err == 0 returns the text unchanged.
DegradeResult degrade_text(std::string_view text, double p_err, RandomStream& stream);
DegradeResult degrade(std::string_view text, double snr_db, const ChannelConfig& channel, RandomStream& stream);

/// max(0, 1 - k * p_err_total).
double asr_confidence(double p_err_total, double k);

struct AsrResult {
  std::string turn_id;
  std::string transcript;
  std::string channel_text;  // after the channel pass, before recognition
  TimeMs t_tx_ms = 0;
  TimeMs t_asr_out_ms = 0;
  double confidence = 1.0;
  double p_err_total = 0.0;
};

/// Channel pass at the turn's SNR, then the recognizer's own error pass.
/// `noise` and `latency` are per-turn streams.
AsrResult simulate_asr(const RadioTurn& turn, const RunConfig& config, RandomStream& noise, RandomStream& latency);

/// t_dec + sampled TTS latency when the severity meets speak_min, else nullopt.
std::optional<TimeMs> deliver_tts(Severity severity, TimeMs t_dec_ms, Severity speak_min,
                                  const LatencyProfile& profile, RandomStream& stream);

/// Airtime of an utterance: words * ms_per_word.
TimeMs speech_duration_ms(std::string_view text, TimeMs ms_per_word);

class RadioBus {
 public:
  struct Delivery {
    std::string receiver;
    bool overheard = false;
    TimeMs receive_at_ms = 0;
  };

  void subscribe(const std::string& receiver, std::optional<std::string> tuned, std::vector<std::string> overhear);
  void retune(const std::string& receiver, std::string frequency);
  bool knows_frequency(const std::string& frequency) const;
  void add_frequency(const std::string& frequency) { frequencies_.push_back(frequency); }

  /// Computes receivers in subscription order (speaker and not_received_by
  /// excluded) and fills turn.overheard_by. Receive times are t_tx + airtime,
  /// pushed back so they never precede an earlier turn's on the same frequency.
  /// Throws std::logic_error if t_tx goes backwards on a frequency.
  std::vector<Delivery> transmit(RadioTurn& turn, TimeMs airtime_ms);

 private:
  struct Subscriber {
    std::string id;
    std::optional<std::string> tuned;
    std::vector<std::string> overhear;
  };
  std::vector<Subscriber> subscribers_;
  std::vector<std::string> frequencies_;
  std::map<std::string, TimeMs> last_tx_;
  std::map<std::string, TimeMs> last_receive_;
};

}  // namespace hilt
