#include "hilt/gateway.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <future>
#include <thread>

#include "hilt/plugin_client.hpp"
#include "hilt/runner.hpp"

namespace hilt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// SessionBuffer

void SessionBuffer::push(json message) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    message["seq"] = next_seq_++;
    if (queue_.size() >= cap_) {
      for (auto it = queue_.begin(); it != queue_.end(); ++it) {
        if ((*it)["kind"] == "track_snapshot") {
          queue_.erase(it);
          ++dropped_;
          break;
        }
      }
    }
    if (queue_.size() >= cap_ && message["kind"] == "track_snapshot") {
      ++dropped_;
    } else {
      queue_.push_back(std::move(message));
    }
  }
  cv_.notify_all();
}

std::vector<json> SessionBuffer::wait_pop(int timeout_ms) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return !queue_.empty() || closed_; });
  std::vector<json> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

void SessionBuffer::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool SessionBuffer::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t SessionBuffer::size() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::uint64_t SessionBuffer::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

// ---------------------------------------------------------------------------
// SessionMapper

namespace {

json envelope(const std::string& kind, json payload, TimeMs ts) {
  return {{"direction", "server_to_client"}, {"kind", kind}, {"payload", std::move(payload)}, {"ts_ms", ts}};
}

}  // namespace

std::vector<json> SessionMapper::map(const LogRecord& r) {
  std::vector<json> out;
  const json& p = r.payload;
  if (r.kind == "radio_turn") {
    if (!frequencies_ || frequencies_->contains(p.value("frequency", ""))) out.push_back(envelope("radio_turn", p, r.ts_ms));
  } else if (r.kind == "adsb") {
    out.push_back(envelope("track_snapshot", {{"t_adsb_out_ms", p.value("t_adsb_out_ms", r.ts_ms)}, {"tracks", p.at("tracks")}},
                           r.ts_ms));
  } else if (r.kind == "advisory") {
    if (p.value("spoken", false)) {
      spoken_[p.value("advisory_id", "")] = p;
    } else {
      out.push_back(envelope("advisory", p, r.ts_ms));
    }
  } else if (r.kind == "tts") {
    auto it = spoken_.find(p.value("advisory_id", ""));
    if (it != spoken_.end()) {
      json a = it->second;
      a["t_tts_ms"] = p.value("t_tts_ms", r.ts_ms);
      a["message"] = p.value("message", a.value("message", ""));
      spoken_.erase(it);
      out.push_back(envelope("advisory", std::move(a), r.ts_ms));
    }
  } else if (r.kind == "actor_state") {
    out.push_back(envelope("actor_state", p, r.ts_ms));
    out.push_back(envelope("clock", {{"sim_ms", r.ts_ms}}, r.ts_ms));
  } else if (r.kind == "role_claim") {
    out.push_back(envelope("role_claim", p, r.ts_ms));
  } else if (r.kind == "run_end") {
    out.push_back(envelope("clock", {{"sim_ms", r.ts_ms}, {"final", true}}, r.ts_ms));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

namespace {

enum RunState { kPending, kRunning, kFinished, kFailed };

const char* state_name(int s) {
  switch (s) {
    case kPending: return "pending";
    case kRunning: return "running";
    case kFinished: return "finished";
    default: return "failed";
  }
}

struct Session {
  std::string id;
  SessionBuffer buffer;
  SessionMapper mapper;
  explicit Session(std::string sid, std::size_t cap) : id(std::move(sid)), buffer(cap) {}
};

struct Run {
  std::string id;
  std::string scenario_id;
  std::uint64_t seed = 0;
  ClockMode mode = ClockMode::fast_time;
  std::atomic<int> state{kPending};
  PluginClients plugins;
  std::unique_ptr<Director> director;
  std::thread thread;
  std::atomic<TimeMs> sim_ms{0};

  std::mutex m;  // guards the fields below
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::size_t seen = 0;  // log records already fanned out
  std::optional<RunResult> result;
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
           json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  reply(res, status, extra);
}

int role_status(RoleError::Kind k) {
  switch (k) {
    case RoleError::Kind::not_found: return 404;
    case RoleError::Kind::unclaimable: return 422;
    case RoleError::Kind::conflict: return 409;
    case RoleError::Kind::mode: return 409;
    case RoleError::Kind::not_claimed: return 403;
    case RoleError::Kind::invalid: return 400;
  }
  return 400;
}

const char* role_kind(RoleError::Kind k) {
  switch (k) {
    case RoleError::Kind::not_found: return "not_found";
    case RoleError::Kind::unclaimable: return "unclaimable";
    case RoleError::Kind::conflict: return "conflict";
    case RoleError::Kind::mode: return "mode";
    case RoleError::Kind::not_claimed: return "not_claimed";
    case RoleError::Kind::invalid: return "invalid";
  }
  return "invalid";
}

json handle_json(const Run& r) {
  return {{"run_id", r.id},
          {"scenario_id", r.scenario_id},
          {"seed", r.seed},
          {"mode", to_string(r.mode)},
          {"state", state_name(r.state.load())},
          {"sim_ms", r.sim_ms.load()}};
}

}  // namespace

struct Gateway::Impl {
  GatewayOptions opt;
  httplib::Server server;
  std::thread server_thread;
  std::mutex mutex;
  std::map<std::string, std::shared_ptr<Run>> runs;
  std::map<PluginRole, PluginConfig> plugins;
  std::uint64_t next_run = 1;
  std::uint64_t next_session = 1;

  explicit Impl(GatewayOptions o) : opt(std::move(o)) { routes(); }

  ~Impl() {
    std::map<std::string, std::shared_ptr<Run>> all;
    {
      std::lock_guard lock(mutex);
      all = runs;
    }
    for (auto& [_, r] : all) {
      if (r->director) r->director->request_stop();
    }
    for (auto& [_, r] : all) {
      if (r->thread.joinable()) r->thread.join();
    }
  }

  std::shared_ptr<Run> find_run(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = runs.find(id);
    return it == runs.end() ? nullptr : it->second;
  }

  std::optional<ScenarioSpec> find_scenario(const std::string& id) {
    if (!std::filesystem::is_directory(opt.scenario_root)) return std::nullopt;
    for (auto& e : load_suite(opt.scenario_root)) {
      if (e.spec.scenario_id == id) return std::move(e.spec);
    }
    return std::nullopt;
  }

  void start_run(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body.empty() ? "{}" : req.body);
    } catch (const std::exception& e) {
      return error(res, 400, "invalid", std::string("request body is not JSON: ") + e.what());
    }
    ScenarioSpec spec;
    try {
      if (body.contains("scenario")) {
        spec = scenario_from_json(body["scenario"]);
      } else {
        const std::string sid = body.value("scenario_id", "");
        auto found = find_scenario(sid);
        if (!found) return error(res, 404, "not_found", "unknown scenario '" + sid + "'");
        spec = std::move(*found);
      }
    } catch (const std::exception& e) {
      return error(res, 400, "invalid", e.what());
    }
    const auto violations = validate(spec);
    if (!violations.empty()) {
      json list = json::array();
      for (const auto& v : violations) list.push_back({{"path", v.path}, {"message", v.message}});
      return error(res, 422, "validation", "scenario does not validate", {{"problems", list}});
    }
    RunOptions ro;
    try {
      ro.seed = body.value("seed", std::uint64_t{1});
      ro.mode = clock_mode_from_string(body.value("mode", std::string("fast_time")));
      ro.pace = body.value("pace", 1.0);
      ro.config = apply_overrides(opt.base_config, body.value("overrides", json::object()));
    } catch (const ConfigError& e) {
      return error(res, 400, "validation", "invalid overrides", {{"problems", e.problems()}});
    } catch (const std::exception& e) {
      return error(res, 400, "invalid", e.what());
    }
    if (!(ro.pace > 0.0)) return error(res, 400, "invalid", "pace must be > 0");

    auto run = std::make_shared<Run>();
    {
      std::lock_guard lock(mutex);
      char buf[32];
      std::snprintf(buf, sizeof buf, "run-%04llu", static_cast<unsigned long long>(next_run++));
      run->id = buf;
      run->plugins = make_plugin_clients(plugins);
      runs[run->id] = run;
    }
    run->scenario_id = spec.scenario_id;
    run->seed = ro.seed;
    run->mode = ro.mode;
    ro.plugins = run->plugins.set();
    run->director = std::make_unique<Director>(prepare_scenario(spec, ro.seed), ro);
    Run* raw = run.get();
    run->director->log().subscribe([raw](const LogRecord& rec) {
      std::lock_guard lock(raw->m);
      ++raw->seen;
      raw->sim_ms = rec.ts_ms;
      for (auto& [_, s] : raw->sessions) {
        for (auto& msg : s->mapper.map(rec)) s->buffer.push(std::move(msg));
      }
    });
    run->thread = std::thread([raw] {
      raw->state = kRunning;
      RunResult r = raw->director->run();
      std::lock_guard lock(raw->m);
      raw->state = r.finished ? kFinished : kFailed;
      raw->result = std::move(r);
      for (auto& [_, s] : raw->sessions) s->buffer.close();
    });
    reply(res, 201, handle_json(*run));
  }

  // Runs `fn` on the run's loop thread and waits for its JSON answer.
  json on_loop(Run& run, std::function<json(Director&)> fn, int& status) {
    auto prom = std::make_shared<std::promise<std::pair<int, json>>>();
    auto fut = prom->get_future();
    Director* d = run.director.get();
    d->post([prom, fn, d](Kernel&) {
      try {
        prom->set_value({200, fn(*d)});
      } catch (const RoleError& e) {
        prom->set_value({role_status(e.kind()), json{{"error", role_kind(e.kind())}, {"message", e.what()}}});
      } catch (const std::exception& e) {
        prom->set_value({400, json{{"error", "invalid"}, {"message", e.what()}}});
      }
    });
    if (fut.wait_for(std::chrono::seconds(5)) != std::future_status::ready) {
      status = 409;
      return {{"error", "mode"}, {"message", "run is not accepting commands"}};
    }
    auto [st, body] = fut.get();
    status = st;
    return body;
  }

  void routes() {
    server.Post("/v1/runs", [this](const httplib::Request& req, httplib::Response& res) { start_run(req, res); });

    server.Get(R"(/v1/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      reply(res, 200, handle_json(*run));
    });

    server.Delete(R"(/v1/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      run->director->request_stop();
      reply(res, 202, handle_json(*run));
    });

    server.Get(R"(/v1/runs/([^/]+)/metrics)", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      std::lock_guard lock(run->m);
      if (!run->result) return error(res, 409, "not_ready", "run has not ended");
      json j = to_json(run->result->metrics);
      j["finished"] = run->result->finished;
      if (!run->result->error.empty()) j["error"] = run->result->error;
      reply(res, 200, j);
    });

    server.Get(R"(/v1/runs/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      res.set_content(run->director->log().text(), "application/x-ndjson");
    });

    server.Get("/v1/plugins", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      json out = json::object();
      for (const auto& [role, c] : plugins) out[std::string(to_string(role))] = to_json(c);
      reply(res, 200, out);
    });

    server.Put(R"(/v1/plugins/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto role = plugin_role_from_string(req.matches[1].str());
      if (!role) return error(res, 404, "not_found", "unknown plugin role '" + req.matches[1].str() + "'");
      try {
        const PluginConfig c = plugin_config_from_json(*role, json::parse(req.body));
        std::lock_guard lock(mutex);
        plugins[*role] = c;
        reply(res, 200, to_json(c));
      } catch (const std::exception& e) {
        error(res, 400, "validation", e.what());
      }
    });

    server.Post(R"(/v1/runs/([^/]+)/session)", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      if (run->mode != ClockMode::real_time) {
        return error(res, 409, "mode", "sessions need a real_time run; this run is fast_time");
      }
      if (run->state.load() >= kFinished) return error(res, 409, "mode", "run has ended");
      std::string sid;
      {
        std::lock_guard lock(mutex);
        sid = "s" + std::to_string(next_session++);
      }
      auto session = std::make_shared<Session>(sid, opt.session_buffer_cap);
      {
        // Backfill what the run has already logged, then join the fan-out.
        std::lock_guard lock(run->m);
        const auto records = run->director->log().records();
        for (std::size_t i = 0; i < run->seen && i < records.size(); ++i) {
          for (auto& msg : session->mapper.map(records[i])) session->buffer.push(std::move(msg));
        }
        run->sessions[sid] = session;
        if (run->result) session->buffer.close();
      }
      reply(res, 201, {{"session_id", sid}, {"run_id", run->id}});
    });

    server.Get(R"(/v1/runs/([^/]+)/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      std::shared_ptr<Session> session;
      {
        std::lock_guard lock(run->m);
        auto it = run->sessions.find(req.matches[2]);
        if (it != run->sessions.end()) session = it->second;
      }
      if (!session) return error(res, 404, "not_found", "unknown session");
      res.set_chunked_content_provider("application/x-ndjson", [run, session](std::size_t, httplib::DataSink& sink) {
        auto batch = session->buffer.wait_pop(500);
        if (batch.empty() && !session->buffer.closed()) {
          // Idle: keep the client's clock fresh.
          json c = envelope("clock", {{"sim_ms", run->sim_ms.load()}, {"dropped", session->buffer.dropped()}},
                            run->sim_ms.load());
          session->buffer.push(std::move(c));
          return true;
        }
        for (const auto& m : batch) {
          const std::string line = m.dump() + "\n";
          if (!sink.write(line.data(), line.size())) return false;
        }
        if (session->buffer.closed() && session->buffer.size() == 0) sink.done();
        return true;
      });
    });

    server.Post(R"(/v1/runs/([^/]+)/session/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.matches[1]);
      if (!run) return error(res, 404, "not_found", "unknown run");
      const std::string sid = req.matches[2];
      std::shared_ptr<Session> session;
      {
        std::lock_guard lock(run->m);
        auto it = run->sessions.find(sid);
        if (it != run->sessions.end()) session = it->second;
      }
      if (!session) return error(res, 404, "not_found", "unknown session");
      if (run->state.load() >= kFinished) return error(res, 409, "mode", "run has ended");
      json frame;
      try {
        frame = json::parse(req.body);
      } catch (const std::exception& e) {
        return error(res, 400, "invalid", std::string("frame is not JSON: ") + e.what());
      }
      const std::string kind = frame.value("kind", "");
      const json payload = frame.value("payload", json::object());
      int status = 200;
      json out;
      if (kind == "role_claim") {
        const std::string actor = payload.value("actor_id", "");
        Run* raw = run.get();
        out = on_loop(*run, [sid, actor, raw, session](Director& d) {
          d.claim_role(sid, actor);
          const ActorSpec* a = d.spec().find_actor(actor);
          std::set<std::string> freqs(a->overhear.begin(), a->overhear.end());
          if (a->frequency) freqs.insert(*a->frequency);
          std::lock_guard lock(raw->m);
          session->mapper.listen_on(std::move(freqs));
          return json{{"ok", true}, {"actor_id", actor}};
        }, status);
      } else if (kind == "transmit_request") {
        std::optional<std::string> to;
        if (payload.contains("addressed_to") && payload["addressed_to"].is_string()) {
          to = payload["addressed_to"].get<std::string>();
        }
        const std::string freq = payload.value("frequency", "");
        const std::string text = payload.value("text", "");
        out = on_loop(*run, [sid, freq, to, text](Director& d) {
          return json{{"ok", true}, {"turn_id", d.transmit(sid, freq, to, text)}};
        }, status);
      } else {
        return error(res, 400, "invalid", "unsupported frame kind '" + kind + "'");
      }
      reply(res, status, out);
    });
  }
};

Gateway::Gateway(GatewayOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Gateway::~Gateway() { stop(); }

bool Gateway::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Gateway::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    return -1;
  }
  if (bound < 0) return -1;
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Gateway::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

}  // namespace hilt
