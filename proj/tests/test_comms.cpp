#include <doctest.h>

#include <cmath>

#include <map>
#include <set>

#include "common.hpp"
#include "hilt/comms.hpp"
#include "hilt/phraseology.hpp"
#include "oracles.hpp"

using namespace hilt;

TEST_SUITE("comms") {

TEST_CASE("channel error follows the SNR ramp") {
  const ChannelConfig c;
  CHECK(channel_p_err(20.0, c) == 0.0);
  CHECK(channel_p_err(30.0, c) == 0.0);
  CHECK(channel_p_err(15.0, c) == doctest::Approx(0.2));
  CHECK(channel_p_err(10.0, c) == doctest::Approx(0.4));
  CHECK(channel_p_err(0.0, c) == doctest::Approx(0.45));
  CHECK(channel_p_err(-10.0, c) == doctest::Approx(0.45));
  CHECK(channel_p_err(-50.0, c) == doctest::Approx(0.45));
  double prev = 0.0;
  for (double snr = 30.0; snr >= -20.0; snr -= 0.5) {
    const double p = channel_p_err(snr, c);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("degrade at p_err 0 is the identity") {
  RandomStream s = derive_stream(1, "t");
  for (const auto& row : test::load_corpus()) {
    const std::string text = row["text"];
    const auto r = degrade_text(text, 0.0, s);
    CHECK(r.text == text);
    CHECK(r.errors == 0);
  }
}

TEST_CASE("degraded words are dropped or swapped within a confusion set") {
  RandomStream s = derive_stream(5, "t");
  const std::string text = "N123AB, cleared for takeoff runway one niner";
  std::set<std::string> allowed;
  for (const auto& w : tokenize(text)) {
    allowed.insert(w);
    for (auto alt : digit_confusions(w)) allowed.insert(std::string(alt));
  }
  for (int i = 0; i < 200; ++i) {
    const auto r = degrade_text(text, 0.5, s);
    CHECK(tokenize(r.text).size() <= tokenize(text).size());
    for (const auto& w : tokenize(r.text)) CHECK(allowed.count(w) == 1);
  }
}

TEST_CASE("measured word error tracks p_err") {
  const auto corpus = test::load_corpus();
  RandomStream s = derive_stream(2024, "wer");
  std::size_t words = 0, edits = 0;
  while (words < 20000) {
    for (const auto& row : corpus) {
      const std::string text = row["text"];
      const auto r = degrade_text(text, 0.18, s);
      const auto a = tokenize(text);
      words += a.size();
      edits += oracle::word_edit_distance(a, tokenize(r.text));
    }
  }
  const double wer = static_cast<double>(edits) / static_cast<double>(words);
  CHECK(std::abs(wer - 0.18) <= 0.02);
}

TEST_CASE("ASR confidence is monotone non-increasing in total error") {
  double prev = 1.0;
  for (double p = 0.0; p <= 1.0; p += 0.01) {
    const double c = asr_confidence(p, 1.5);
    CHECK(c <= prev);
    CHECK(c >= 0.0);
    prev = c;
  }
  CHECK(asr_confidence(0.0, 1.5) == 1.0);
  CHECK(asr_confidence(0.24, 1.5) == doctest::Approx(0.64));
}

TEST_CASE("simulate_asr stamps the injected latency exactly") {
  RunConfig cfg;
  RadioTurn t;
  t.turn_id = "x";
  t.t_tx_ms = 31234;
  t.clean_text = "N123AB, cleared for takeoff runway zero one";
  t.snr_db = 15.0;
  RandomStream noise = derive_stream(3, "asr_noise").substream("x");
  RandomStream lat = derive_stream(3, "asr_latency").substream("x");
  const auto r = simulate_asr(t, cfg, noise, lat);
  CHECK(r.t_asr_out_ms - r.t_tx_ms == 5880);
  CHECK(r.p_err_total == doctest::Approx(1.0 - 0.8 * 0.95));
  CHECK(r.confidence == doctest::Approx(1.0 - 1.5 * r.p_err_total));
}

TEST_CASE("latency profiles sample within their declared law") {
  RandomStream s = derive_stream(9, "lat");
  LatencyProfile u;
  u.kind = LatencyProfile::Kind::uniform;
  u.min_ms = 100;
  u.max_ms = 200;
  LatencyProfile n;
  n.kind = LatencyProfile::Kind::normal;
  n.mean_ms = 50;
  n.stddev_ms = 100;
  for (int i = 0; i < 1000; ++i) {
    const auto a = u.sample(s);
    CHECK(a >= 100);
    CHECK(a <= 200);
    CHECK(n.sample(s) >= 0);
    CHECK(LatencyProfile::fixed(900).sample(s) == 900);
  }
}

TEST_CASE("TTS is delivered only at or above the speak threshold") {
  RandomStream s = derive_stream(1, "tts");
  const auto p = LatencyProfile::fixed(900);
  CHECK(deliver_tts(Severity::CAUTION, 1000, Severity::CAUTION, p, s) == 1900);
  CHECK(deliver_tts(Severity::WARNING, 1000, Severity::CAUTION, p, s) == 1900);
  CHECK_FALSE(deliver_tts(Severity::ADVISORY, 1000, Severity::CAUTION, p, s));
  CHECK_FALSE(deliver_tts(Severity::INFO, 1000, Severity::ADVISORY, p, s));
}

TEST_CASE("airtime is words times the per-word duration") {
  CHECK(speech_duration_ms("N123AB, cleared for takeoff runway zero one", 300) == 7 * 300);
  CHECK(speech_duration_ms("", 300) == 0);
}

TEST_CASE("bus routes tuned and overheard receivers, skipping the speaker") {
  RadioBus bus;
  bus.add_frequency("118.300");
  bus.add_frequency("121.900");
  bus.subscribe("TWR", "118.300", {"121.900"});
  bus.subscribe("DEP", "118.300", {});
  bus.subscribe("TRUCK", "121.900", {});
  RadioTurn t;
  t.turn_id = "a";
  t.speaker = "TRUCK";
  t.frequency = "121.900";
  t.t_tx_ms = 1000;
  const auto d = bus.transmit(t, 600);
  REQUIRE(d.size() == 1);
  CHECK(d[0].receiver == "TWR");
  CHECK(d[0].overheard);
  CHECK(d[0].receive_at_ms == 1600);
  CHECK(t.overheard_by == std::vector<std::string>{"TWR"});

  RadioTurn u;
  u.turn_id = "b";
  u.speaker = "TWR";
  u.frequency = "118.300";
  u.t_tx_ms = 2000;
  u.not_received_by = {"DEP"};
  CHECK(bus.transmit(u, 300).empty());

  RadioTurn back;
  back.turn_id = "c";
  back.speaker = "TWR";
  back.frequency = "118.300";
  back.t_tx_ms = 1500;
  CHECK_THROWS_AS(bus.transmit(back, 300), std::logic_error);
  back.frequency = "999.000";
  CHECK_THROWS_AS(bus.transmit(back, 300), std::logic_error);
}

TEST_CASE("per-frequency FIFO holds for random turn sequences") {
  RandomStream s = derive_stream(77, "fifo");
  for (int trial = 0; trial < 50; ++trial) {
    RadioBus bus;
    bus.add_frequency("f1");
    bus.add_frequency("f2");
    bus.subscribe("A", "f1", {"f2"});
    bus.subscribe("B", "f1", {});
    bus.subscribe("C", "f2", {"f1"});
    std::map<std::string, std::map<std::string, std::vector<std::pair<TimeMs, TimeMs>>>> rx;  // freq -> receiver
    std::map<std::string, TimeMs> t_last{{"f1", 0}, {"f2", 0}};
    const char* speakers[] = {"A", "B", "C"};
    for (int i = 0; i < 40; ++i) {
      RadioTurn t;
      t.turn_id = std::to_string(i);
      t.frequency = s.bernoulli(0.5) ? "f1" : "f2";
      t.speaker = speakers[s.uniform_int(0, 2)];
      t.t_tx_ms = t_last[t.frequency] + s.uniform_int(0, 3000);
      t_last[t.frequency] = t.t_tx_ms;
      for (const auto& d : bus.transmit(t, s.uniform_int(300, 6000))) {
        rx[t.frequency][d.receiver].push_back({t.t_tx_ms, d.receive_at_ms});
      }
    }
    for (const auto& [f, by_receiver] : rx) {
      for (const auto& [r, seq] : by_receiver) {
        for (std::size_t i = 1; i < seq.size(); ++i) {
          CHECK(seq[i - 1].first <= seq[i].first);
          CHECK(seq[i - 1].second <= seq[i].second);
        }
      }
    }
  }
}

}
