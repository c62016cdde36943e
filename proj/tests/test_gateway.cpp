#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include "common.hpp"
#include "hilt/gateway.hpp"
#include "hilt/runner.hpp"

using namespace hilt;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Server {
  Gateway gw;
  int port;
  explicit Server(std::size_t cap = 256) : gw(options(cap)), port(gw.start("127.0.0.1", 0)) { REQUIRE(port > 0); }
  static GatewayOptions options(std::size_t cap) {
    GatewayOptions o;
    o.scenario_root = test::scenario_root();
    o.session_buffer_cap = cap;
    return o;
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    return c;
  }
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return r->body.empty() ? json() : json::parse(r->body);
}

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  CHECK_MESSAGE(r->status == expect, r->body);
  return body_of(r);
}

std::string wait_state(httplib::Client& c, const std::string& run_id, std::chrono::seconds limit = 20s) {
  const auto until = std::chrono::steady_clock::now() + limit;
  std::string state;
  while (std::chrono::steady_clock::now() < until) {
    state = body_of(c.Get("/v1/runs/" + run_id))["state"];
    if (state == "finished" || state == "failed") break;
    std::this_thread::sleep_for(20ms);
  }
  return state;
}

// Reads a session stream on a background thread.
class StreamReader {
 public:
  StreamReader(int port, std::string path) {
    thread_ = std::thread([this, port, path] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(20, 0);
      c.Get(path, [this](const char* data, std::size_t n) {
        std::lock_guard lock(m_);
        partial_.append(data, n);
        std::size_t nl;
        while ((nl = partial_.find('\n')) != std::string::npos) {
          messages_.push_back(json::parse(partial_.substr(0, nl)));
          partial_.erase(0, nl + 1);
        }
        return true;
      });
      done_ = true;
    });
  }
  ~StreamReader() {
    if (thread_.joinable()) thread_.join();
  }
  std::vector<json> messages() {
    std::lock_guard lock(m_);
    return messages_;
  }
  // Waits until `pred` holds for some message; returns it.
  std::optional<json> wait_for(const std::function<bool(const json&)>& pred, std::chrono::milliseconds limit) {
    const auto until = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < until) {
      for (const auto& m : messages()) {
        if (pred(m)) return std::optional<json>(std::in_place, m);
      }
      if (done_) break;
      std::this_thread::sleep_for(10ms);
    }
    return std::nullopt;
  }
  void join() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::thread thread_;
  std::mutex m_;
  std::string partial_;
  std::vector<json> messages_;
  std::atomic<bool> done_{false};
};

json snapshot_msg() { return {{"kind", "track_snapshot"}, {"payload", json::object()}}; }
json radio_msg() { return {{"kind", "radio_turn"}, {"payload", json::object()}}; }

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("session buffer drops only the oldest track snapshots") {
  SessionBuffer b(256);
  for (int i = 0; i < 100; ++i) b.push(radio_msg());
  for (int i = 0; i < 1000; ++i) b.push(snapshot_msg());
  CHECK(b.size() == 256);
  CHECK(b.dropped() == 844);
  auto first = b.wait_pop(0);
  REQUIRE(first.size() == 256);
  int radio = 0;
  std::uint64_t prev = 0;
  for (const auto& m : first) {
    radio += m["kind"] == "radio_turn";
    CHECK(m["seq"].get<std::uint64_t>() > prev);
    prev = m["seq"];
  }
  CHECK(radio == 100);
  // The snapshots that survived are the newest ones.
  CHECK(first[100]["seq"] == 1100 - 156 + 1);
  CHECK(first.back()["seq"] == 1100);

  SessionBuffer c(256);
  for (int i = 0; i < 256; ++i) c.push(snapshot_msg());
  for (int i = 0; i < 300; ++i) c.push(radio_msg());
  CHECK(c.size() == 300);  // nothing droppable left, so the cap yields
  CHECK(c.dropped() == 256);
  for (const auto& m : c.wait_pop(0)) CHECK(m["kind"] == "radio_turn");

  SessionBuffer d(4);
  d.close();
  d.push(radio_msg());
  CHECK(d.size() == 0);
  CHECK(d.closed());
}

TEST_CASE("session mapper filters radio by frequency and holds spoken advisories until TTS") {
  SessionMapper m;
  CHECK(m.map({0, "radio_turn", {{"frequency", "121.900"}}}).size() == 1);  // observer hears all
  m.listen_on({"118.300"});
  CHECK(m.map({0, "radio_turn", {{"frequency", "121.900"}}}).empty());
  CHECK(m.map({0, "radio_turn", {{"frequency", "118.300"}}}).size() == 1);

  const auto snap = m.map({50, "adsb", {{"t_adsb_out_ms", 100}, {"tracks", json::array()}}});
  REQUIRE(snap.size() == 1);
  CHECK(snap[0]["kind"] == "track_snapshot");
  CHECK(snap[0]["payload"]["t_adsb_out_ms"] == 100);

  CHECK(m.map({1000, "advisory", {{"advisory_id", "adv-1"}, {"spoken", true}, {"message", "Warning"}}}).empty());
  const auto spoken = m.map({1900, "tts", {{"advisory_id", "adv-1"}, {"t_tts_ms", 1900}, {"message", "Warning"}}});
  REQUIRE(spoken.size() == 1);
  CHECK(spoken[0]["kind"] == "advisory");
  CHECK(spoken[0]["payload"]["t_tts_ms"] == 1900);
  CHECK(spoken[0]["ts_ms"] == 1900);
  CHECK(m.map({2000, "advisory", {{"advisory_id", "adv-2"}, {"spoken", false}}}).size() == 1);

  const auto st = m.map({3000, "actor_state", {{"actors", json::array()}}});
  REQUIRE(st.size() == 2);
  CHECK(st[1]["kind"] == "clock");
  CHECK(m.map({3000, "interval", json::object()}).empty());
}

TEST_CASE("fast-time runs over HTTP match a direct run and refuse sessions") {
  Server s;
  auto c = s.client();
  const json h = post(c, "/v1/runs", {{"scenario_id", "S01A-bad-readback"}, {"seed", 42}}, 201);
  CHECK(h["run_id"] == "run-0001");
  CHECK(h["mode"] == "fast_time");
  const std::string id = h["run_id"];
  CHECK(wait_state(c, id) == "finished");

  const json m = body_of(c.Get("/v1/runs/" + id + "/metrics"));
  CHECK(m["finished"] == true);
  CHECK(m["warned"] == true);

  std::string direct;
  run_scenario(test::scenario("S01A", "bad-readback"), 42, RunConfig{}, {}, {}, {}, &direct);
  auto log = c.Get("/v1/runs/" + id + "/log");
  REQUIRE(log);
  CHECK(log->body == direct);

  post(c, "/v1/runs/" + id + "/session", json::object(), 409);
  CHECK(body_of(c.Get("/v1/runs/run-9999"))["error"] == "not_found");
  CHECK(post(c, "/v1/runs", {{"scenario_id", "S01A-bad-readback"}}, 201)["run_id"] == "run-0002");
}

TEST_CASE("run creation errors carry status and paths") {
  Server s;
  auto c = s.client();
  CHECK(post(c, "/v1/runs", {{"scenario_id", "S99-nothing"}}, 404)["error"] == "not_found");
  const json bad = post(c, "/v1/runs", {{"scenario_id", "S01A-bad-readback"}, {"overrides", {{"nonsense", 1}}}}, 400);
  CHECK(bad["error"] == "validation");
  CHECK(bad["problems"].dump().find("nonsense") != std::string::npos);
  post(c, "/v1/runs", {{"scenario_id", "S01A-bad-readback"}, {"pace", 0}}, 400);
  post(c, "/v1/runs", {{"scenario_id", "S01A-bad-readback"}, {"mode", "warp"}}, 400);

  json sc = to_json(test::scenario("S01A", "bad-readback"));
  sc["comm_timeline"][0]["speaker"] = "GHOST";
  const json inv = post(c, "/v1/runs", {{"scenario", sc}}, 422);
  CHECK(inv["error"] == "validation");
  CHECK(inv["problems"][0]["path"] == "comm_timeline[0].speaker");

  auto r = c.Post("/v1/runs", "{not json", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);
}

TEST_CASE("plugin registration validates its body") {
  Server s;
  auto c = s.client();
  auto put = [&](const std::string& role, const json& body) {
    auto r = c.Put("/v1/plugins/" + role, body.dump(), "application/json");
    REQUIRE(r);
    return r->status;
  };
  CHECK(put("telepathy", {{"base_url", "http://x"}}) == 404);
  CHECK(put("asr", {{"base_url", "ftp://x"}}) == 400);
  CHECK(put("asr", {{"base_url", "http://x"}, {"timeout_ms", -5}}) == 400);
  CHECK(put("asr", {{"base_url", "http://x"}, {"colour", "red"}}) == 400);
  CHECK(put("nlg", {{"base_url", "http://127.0.0.1:9"}, {"timeout_ms", 50}, {"enabled", false}}) == 200);
  const json all = body_of(c.Get("/v1/plugins"));
  CHECK(all["nlg"]["timeout_ms"] == 50);
  CHECK(all["nlg"]["enabled"] == false);
  CHECK_FALSE(all.contains("asr"));
}

TEST_CASE("a real-time session claims the tower, transmits and hears the readback") {
  Server s;
  auto c = s.client();
  const json h = post(c, "/v1/runs", {{"scenario_id", "S01A-cancel-not-received"}, {"seed", 3}, {"mode", "real_time"},
                                      {"pace", 5.0}}, 201);
  const std::string run = "/v1/runs/" + h["run_id"].get<std::string>();
  const std::string sid = post(c, run + "/session", json::object(), 201)["session_id"];
  const std::string other = post(c, run + "/session", json::object(), 201)["session_id"];
  CHECK(sid != other);
  StreamReader stream(s.port, run + "/session/" + sid);

  // Transmitting before holding a role is refused.
  post(c, run + "/session/" + sid,
       {{"kind", "transmit_request"}, {"payload", {{"frequency", "118.300"}, {"text", "N123AB, hold position"}}}}, 403);
  post(c, run + "/session/" + sid, {{"kind", "role_claim"}, {"payload", {{"actor_id", "TWR"}}}}, 200);
  CHECK(post(c, run + "/session/" + other, {{"kind", "role_claim"}, {"payload", {{"actor_id", "TWR"}}}}, 409)["error"] ==
        "conflict");
  CHECK(post(c, run + "/session/" + other, {{"kind", "role_claim"}, {"payload", {{"actor_id", "NOPE"}}}}, 404)["error"] ==
        "not_found");
  post(c, run + "/session/" + sid,
       {{"kind", "transmit_request"}, {"payload", {{"frequency", "118.300"}, {"text", "  "}}}}, 400);
  post(c, run + "/session/" + sid, {{"kind", "teleport"}, {"payload", json::object()}}, 400);
  post(c, run + "/session/nobody", {{"kind", "role_claim"}, {"payload", {{"actor_id", "ARR"}}}}, 404);

  const auto t0 = std::chrono::steady_clock::now();
  const json tx = post(c, run + "/session/" + sid,
                       {{"kind", "transmit_request"},
                        {"payload",
                         {{"frequency", "118.300"},
                          {"addressed_to", "N123AB"},
                          {"text", "N123AB, line up and wait runway zero one"}}}},
                       200);
  const std::string turn = tx["turn_id"];
  CHECK(turn == "human-001");

  auto echo = stream.wait_for(
      [&](const json& m) { return m["kind"] == "radio_turn" && m["payload"]["turn_id"] == turn; }, 5000ms);
  REQUIRE(echo);
  CHECK((*echo)["payload"]["provenance"] == "human");
  auto rb = stream.wait_for(
      [&](const json& m) {
        return m["kind"] == "radio_turn" && m["payload"]["speaker"] == "DEP" &&
               m["payload"]["clean_text"].get<std::string>().find("line up and wait") != std::string::npos;
      },
      5000ms);
  REQUIRE(rb);
  // One simulated second of reply delay plus airtime, at 5x.
  CHECK(std::chrono::steady_clock::now() - t0 < 4s);
  CHECK(stream.wait_for([](const json& m) { return m["kind"] == "role_claim"; }, 1000ms));
  CHECK(stream.wait_for([](const json& m) { return m["kind"] == "track_snapshot"; }, 1000ms));

  auto del = c.Delete(run);
  REQUIRE(del);
  CHECK(del->status == 202);
  const std::string state = wait_state(c, h["run_id"]);
  CHECK((state == "failed" || state == "finished"));
  CHECK(c.Get(run + "/metrics")->status == 200);
  stream.join();  // the stream closes with the run

  // Stream order follows simulation order.
  const auto msgs = stream.messages();
  std::uint64_t seq = 0;
  TimeMs ts = 0;
  for (const auto& m : msgs) {
    CHECK(m["seq"].get<std::uint64_t>() > seq);
    seq = m["seq"];
    CHECK(m["ts_ms"].get<TimeMs>() >= ts);
    ts = m["ts_ms"];
  }
  // The log served afterwards replays to itself.
  const auto log = c.Get(run + "/log");
  REQUIRE(log);
  const auto recs = parse_log_text(log->body);
  CHECK(replay_log(recs) == log->body);
  post(c, run + "/session", json::object(), 409);
}

TEST_CASE("wildlife cannot be claimed") {
  Server s;
  auto c = s.client();
  const json h = post(c, "/v1/runs", {{"scenario_id", "S01C-wildlife-crossing"}, {"mode", "real_time"}}, 201);
  const std::string run = "/v1/runs/" + h["run_id"].get<std::string>();
  const std::string sid = post(c, run + "/session", json::object(), 201)["session_id"];
  CHECK(post(c, run + "/session/" + sid, {{"kind", "role_claim"}, {"payload", {{"actor_id", "DEER"}}}}, 422)["error"] ==
        "unclaimable");
  c.Delete(run);
  wait_state(c, h["run_id"]);
}

}  // TEST_SUITE
