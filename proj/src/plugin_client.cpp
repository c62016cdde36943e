#include "hilt/plugin_client.hpp"

#include <httplib.h>

#include <chrono>

namespace hilt {

namespace {

// POSTs `body` to base_url + path. Returns the parsed JSON response or fills
// `failure`.
std::optional<nlohmann::json> call(const PluginConfig& c, const std::string& path, const nlohmann::json& body,
                                   PluginFailure& failure) {
  httplib::Client cli(c.base_url);
  const auto sec = c.timeout_ms / 1000;
  const auto usec = (c.timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = cli.Post(path, body.dump(), "application/json");
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout ||
                           elapsed >= c.timeout_ms;
    failure.status = timed_out ? "timeout" : "unreachable";
    failure.diagnostic = std::string(to_string(c.role)) + " plugin " + c.base_url + path + ": " + httplib::to_string(err);
    return std::nullopt;
  }
  if (res->status != 200) {
    failure.status = "schema_violation";
    failure.diagnostic = std::string(to_string(c.role)) + " plugin returned HTTP " + std::to_string(res->status);
    return std::nullopt;
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const std::exception& e) {
    failure.status = "schema_violation";
    failure.diagnostic = std::string(to_string(c.role)) + " plugin returned invalid JSON: " + e.what();
    return std::nullopt;
  }
}

template <class T, class Parse>
std::optional<T> parse_or_fail(const nlohmann::json& doc, PluginFailure& failure, Parse&& parse) {
  try {
    return parse(doc);
  } catch (const std::exception& e) {
    failure.status = "schema_violation";
    failure.diagnostic = e.what();
    return std::nullopt;
  }
}

class HttpAsr : public AsrPlugin {
 public:
  explicit HttpAsr(PluginConfig c) : c_(std::move(c)) {}
  std::optional<AsrPluginResult> transcribe(const nlohmann::json& req, PluginFailure& failure) override {
    auto doc = call(c_, "/transcribe", req, failure);
    if (!doc) return std::nullopt;
    return parse_or_fail<AsrPluginResult>(*doc, failure, asr_result_from_json);
  }

 private:
  PluginConfig c_;
};

class HttpVision : public VisionPlugin {
 public:
  explicit HttpVision(PluginConfig c) : c_(std::move(c)) {}
  std::optional<VisionPluginResult> detect(const nlohmann::json& req, PluginFailure& failure) override {
    auto doc = call(c_, "/detect", req, failure);
    if (!doc) return std::nullopt;
    return parse_or_fail<VisionPluginResult>(*doc, failure, [&](const nlohmann::json& d) {
      return vision_result_from_json(d, req.at("camera_id").get<std::string>(), req.at("t_frame_ms").get<TimeMs>());
    });
  }

 private:
  PluginConfig c_;
};

class HttpDecision : public DecisionPlugin {
 public:
  explicit HttpDecision(PluginConfig c) : c_(std::move(c)) {}
  DecisionOutcome decide(const nlohmann::json& bundle) override {
    DecisionOutcome out;
    PluginFailure failure;
    auto doc = call(c_, "/decide", bundle, failure);
    if (!doc) {
      out.status = failure.status == "timeout" ? DecisionOutcome::Status::timeout : DecisionOutcome::Status::unreachable;
      if (failure.status == "schema_violation") out.status = DecisionOutcome::Status::schema_violation;
      out.diagnostic = failure.diagnostic;
      return out;
    }
    try {
      out.advisory = decision_result_from_json(*doc);
      out.status = out.advisory ? DecisionOutcome::Status::ok : DecisionOutcome::Status::no_advisory;
    } catch (const std::exception& e) {
      out.status = DecisionOutcome::Status::schema_violation;
      out.diagnostic = e.what();
    }
    return out;
  }

 private:
  PluginConfig c_;
};

class HttpNlg : public NlgPlugin {
 public:
  explicit HttpNlg(PluginConfig c) : c_(std::move(c)) {}
  std::optional<std::string> rewrite(const nlohmann::json& advisory, PluginFailure& failure) override {
    auto doc = call(c_, "/rewrite", advisory, failure);
    if (!doc) return std::nullopt;
    return parse_or_fail<std::string>(*doc, failure, nlg_result_from_json);
  }

 private:
  PluginConfig c_;
};

}  // namespace

std::unique_ptr<AsrPlugin> make_http_asr(const PluginConfig& c) { return std::make_unique<HttpAsr>(c); }
std::unique_ptr<VisionPlugin> make_http_vision(const PluginConfig& c) { return std::make_unique<HttpVision>(c); }
std::unique_ptr<DecisionPlugin> make_http_decision(const PluginConfig& c) { return std::make_unique<HttpDecision>(c); }
std::unique_ptr<NlgPlugin> make_http_nlg(const PluginConfig& c) { return std::make_unique<HttpNlg>(c); }

PluginClients make_plugin_clients(const std::map<PluginRole, PluginConfig>& configs) {
  PluginClients p;
  for (const auto& [role, c] : configs) {
    if (!c.enabled) continue;
    switch (role) {
      case PluginRole::asr: p.asr = make_http_asr(c); break;
      case PluginRole::vision: p.vision = make_http_vision(c); break;
      case PluginRole::decision: p.decision = make_http_decision(c); break;
      case PluginRole::nlg: p.nlg = make_http_nlg(c); break;
    }
  }
  return p;
}

}  // namespace hilt
