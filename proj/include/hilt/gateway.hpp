#pragma once

// HTTP/JSON gateway: run management, plugin registration and the HILT
// session stream. Simulation-affecting requests are serialized through each
// run's kernel command queue; sessions are fan-out readers of its event log.

#include <nlohmann/json.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hilt/config.hpp"
#include "hilt/telemetry.hpp"

namespace hilt {

/// Bounded per-session outbox. When full, the oldest track_snapshot is
/// dropped to make room; other kinds are never dropped, so the buffer may
/// exceed its cap when it holds nothing droppable.
class SessionBuffer {
 public:
  explicit SessionBuffer(std::size_t cap = 256) : cap_(cap) {}

  /// Assigns the message's "seq".
  void push(nlohmann::json message);
  /// Waits up to timeout_ms for messages; returns everything queued.
  std::vector<nlohmann::json> wait_pop(int timeout_ms);
  void close();
  bool closed() const;
  std::size_t size() const;
  std::uint64_t dropped() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<nlohmann::json> queue_;
  std::size_t cap_;
  std::uint64_t dropped_ = 0;
  std::uint64_t next_seq_ = 1;
  bool closed_ = false;
};

/// Turns event-log records into server-to-client session messages. A
/// session with a claimed actor hears radio on that actor's frequencies
/// only; an observer session hears every frequency.
class SessionMapper {
 public:
  void listen_on(std::set<std::string> frequencies) { frequencies_ = std::move(frequencies); }
  std::vector<nlohmann::json> map(const LogRecord& record);

 private:
  std::optional<std::set<std::string>> frequencies_;
  std::map<std::string, nlohmann::json> spoken_;  // advisory payloads awaiting TTS
};

struct GatewayOptions {
  std::filesystem::path scenario_root = "scenarios";
  RunConfig base_config;
  std::size_t session_buffer_cap = 256;
};

class Gateway {
 public:
  explicit Gateway(GatewayOptions options);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Blocks serving until stop().
  bool listen(const std::string& host, int port);
  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port, or -1.
  int start(const std::string& host, int port = 0);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hilt
