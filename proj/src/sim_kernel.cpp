#include "hilt/sim_kernel.hpp"

#include <cmath>
#include <numbers>

namespace hilt {

std::string_view to_string(ClockMode mode) {
  return mode == ClockMode::fast_time ? "fast_time" : "real_time";
}

ClockMode clock_mode_from_string(std::string_view text) {
  if (text == "fast_time") return ClockMode::fast_time;
  if (text == "real_time") return ClockMode::real_time;
  throw std::invalid_argument("unknown clock mode '" + std::string(text) + "'");
}

Kernel::Kernel(ClockMode mode, double pace) {
  if (!(pace > 0.0)) throw std::invalid_argument("pace must be > 0");
  clock_.mode = mode;
  clock_.pace = pace;
}

EventId Kernel::schedule(TimeMs fire_at_ms, std::string kind, EventHandler handler) {
  if (fire_at_ms < clock_.now_ms) {
    throw std::logic_error("event '" + kind + "' scheduled in the past (" +
                           std::to_string(fire_at_ms) + " < " + std::to_string(clock_.now_ms) + ")");
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(SimEvent{fire_at_ms, seq, std::move(kind), std::move(handler)});
  return seq;
}

void Kernel::post(std::function<void(Kernel&)> command) {
  {
    std::lock_guard lock(command_mutex_);
    commands_.push_back(std::move(command));
  }
  command_cv_.notify_all();
}

void Kernel::request_stop() {
  {
    std::lock_guard lock(command_mutex_);
    stop_ = true;
  }
  command_cv_.notify_all();
}

bool Kernel::stop_requested() const {
  std::lock_guard lock(command_mutex_);
  return stop_;
}

void Kernel::drain_commands() {
  std::deque<std::function<void(Kernel&)>> batch;
  {
    std::lock_guard lock(command_mutex_);
    batch.swap(commands_);
  }
  for (auto& command : batch) command(*this);
}

bool Kernel::wait_for_wall(TimeMs target) {
  const auto delta_ms = static_cast<double>(target - last_dispatch_sim_) / clock_.pace;
  const auto deadline =
      last_dispatch_wall_ + std::chrono::microseconds(static_cast<std::int64_t>(std::ceil(delta_ms * 1000.0)));
  std::unique_lock lock(command_mutex_);
  const bool interrupted =
      command_cv_.wait_until(lock, deadline, [this] { return stop_ || !commands_.empty(); });
  return !interrupted;
}

std::size_t Kernel::run_until(TimeMs t_end_ms) {
  if (t_end_ms < clock_.now_ms) {
    throw std::invalid_argument("run_until(" + std::to_string(t_end_ms) + ") is before now (" +
                                std::to_string(clock_.now_ms) + ")");
  }
  const bool paced = clock_.mode == ClockMode::real_time;
  if (paced && !have_wall_anchor_) {
    last_dispatch_wall_ = WallClock::now();
    last_dispatch_sim_ = clock_.now_ms;
    have_wall_anchor_ = true;
  }

  std::size_t dispatched = 0;
  for (;;) {
    drain_commands();
    if (stop_requested()) return dispatched;
    if (queue_.empty() || queue_.top().fire_at_ms > t_end_ms) break;

    const TimeMs fire_at = queue_.top().fire_at_ms;
    if (paced && !wait_for_wall(fire_at)) continue;

    // Priority queue top is const; move out through a copy of the node.
    SimEvent event = queue_.top();
    queue_.pop();
    clock_.now_ms = event.fire_at_ms;
    try {
      if (event.handler) event.handler(*this);
    } catch (const SimulationError&) {
      throw;
    } catch (const std::exception& e) {
      throw SimulationError("event '" + event.kind + "' at " + std::to_string(event.fire_at_ms) +
                                " ms failed: " + e.what(),
                            event.fire_at_ms, event.kind);
    }
    ++dispatched;
    ++dispatched_total_;
    if (paced) {
      last_dispatch_wall_ = WallClock::now();
      last_dispatch_sim_ = event.fire_at_ms;
    }
    if (observer_) observer_(event.fire_at_ms, event.seq, event.kind);
  }

  if (paced) {
    while (!wait_for_wall(t_end_ms)) {
      drain_commands();
      if (stop_requested()) return dispatched;
      if (!queue_.empty() && queue_.top().fire_at_ms <= t_end_ms) {
        // A command scheduled new work inside the horizon.
        return dispatched + run_until(t_end_ms);
      }
    }
  }
  clock_.now_ms = t_end_ms;
  return dispatched;
}

// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t RandomStream::at(std::uint64_t index) const {
  return splitmix64(key_ + index * 0xD1B54A32D192ED03ULL);
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1ULL;
  if (span == 0) return static_cast<std::int64_t>(next_u64());
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~0ULL - (~0ULL % span);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return lo + static_cast<std::int64_t>(v % span);
}

double RandomStream::normal(double mean, double stddev) {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

RandomStream RandomStream::substream(std::string_view suffix) const {
  std::string id = id_;
  id += '/';
  id += suffix;
  return RandomStream(std::move(id), splitmix64(key_ ^ fnv1a64(suffix)));
}

RandomStream derive_stream(std::uint64_t root_seed, std::string_view stream_id) {
  return RandomStream(std::string(stream_id), splitmix64(splitmix64(root_seed) ^ fnv1a64(stream_id)));
}

}  // namespace hilt
