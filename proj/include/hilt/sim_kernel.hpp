#pragma once

// Deterministic discrete-event core: integer-millisecond clock, (time, seq)
// ordered event queue, counter-based random streams and a thread-safe
// command queue that is drained between dispatches.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hilt {

using TimeMs = std::int64_t;

enum class ClockMode { fast_time, real_time };

std::string_view to_string(ClockMode mode);
ClockMode clock_mode_from_string(std::string_view text);

struct SimClock {
  TimeMs now_ms = 0;
  ClockMode mode = ClockMode::fast_time;
  double pace = 1.0;
};

class Kernel;
using EventId = std::uint64_t;
using EventHandler = std::function<void(Kernel&)>;

struct SimEvent {
  TimeMs fire_at_ms = 0;
  std::uint64_t seq = 0;
  std::string kind;
  EventHandler handler;
};

/// Raised when an event handler throws; carries the failing event for the
/// run diagnostic.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, TimeMs at_ms, std::string kind)
      : std::runtime_error(what), at_ms_(at_ms), kind_(std::move(kind)) {}
  TimeMs at_ms() const { return at_ms_; }
  const std::string& kind() const { return kind_; }

 private:
  TimeMs at_ms_;
  std::string kind_;
};

class Kernel {
 public:
  explicit Kernel(ClockMode mode = ClockMode::fast_time, double pace = 1.0);

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  /// Enqueues a handler. Throws std::logic_error when fire_at_ms is in the past.
  EventId schedule(TimeMs fire_at_ms, std::string kind, EventHandler handler);
  EventId schedule_in(TimeMs delay_ms, std::string kind, EventHandler handler) {
    return schedule(clock_.now_ms + delay_ms, std::move(kind), std::move(handler));
  }

  /// Dispatches every event with fire_at_ms <= t_end_ms in (fire_at_ms, seq)
  /// order and leaves the clock at t_end_ms. Returns the number dispatched.
  std::size_t run_until(TimeMs t_end_ms);

  /// Thread-safe. The command runs on the loop thread before the next dispatch.
  void post(std::function<void(Kernel&)> command);

  /// Thread-safe. Makes a running run_until return at the next opportunity.
  void request_stop();
  bool stop_requested() const;

  const SimClock& clock() const { return clock_; }
  TimeMs now() const { return clock_.now_ms; }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t dispatched_total() const { return dispatched_total_; }

  /// Observer invoked after each dispatch with (fire_at_ms, seq, kind).
  using DispatchObserver = std::function<void(TimeMs, std::uint64_t, const std::string&)>;
  void set_dispatch_observer(DispatchObserver observer) { observer_ = std::move(observer); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.fire_at_ms != b.fire_at_ms) return a.fire_at_ms > b.fire_at_ms;
      return a.seq > b.seq;
    }
  };

  void drain_commands();
  // Real-time pacing: blocks until the wall clock allows dispatching an event
  // at sim time `target`. Returns false if interrupted by a posted command or
  // a stop request (in which case the caller re-examines the queue).
  bool wait_for_wall(TimeMs target);

  SimClock clock_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_total_ = 0;
  DispatchObserver observer_;

  mutable std::mutex command_mutex_;
  std::condition_variable command_cv_;
  std::deque<std::function<void(Kernel&)>> commands_;
  bool stop_ = false;

  using WallClock = std::chrono::steady_clock;
  bool have_wall_anchor_ = false;
  WallClock::time_point last_dispatch_wall_{};
  TimeMs last_dispatch_sim_ = 0;
};

// ---------------------------------------------------------------------------
// Random streams

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// Counter-based stream: draw i is a pure function of (key, i), so streams
/// replay identically and never interfere with each other.
class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::string stream_id, std::uint64_t key) : id_(std::move(stream_id)), key_(key) {}

  const std::string& stream_id() const { return id_; }
  std::uint64_t key() const { return key_; }
  std::uint64_t draw_count() const { return draws_; }

  /// Stateless access to draw `index`.
  std::uint64_t at(std::uint64_t index) const;

  std::uint64_t next_u64() { return at(draws_++); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean, double stddev);

  /// Independent child stream keyed by this stream's key and `suffix`.
  RandomStream substream(std::string_view suffix) const;

 private:
  std::string id_;
  std::uint64_t key_ = 0;
  std::uint64_t draws_ = 0;
};

RandomStream derive_stream(std::uint64_t root_seed, std::string_view stream_id);

}  // namespace hilt
