#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qoe/core.hpp"
#include "qoe/error.hpp"

namespace qoe::stream {

/// Splits text into display tokens. Latin-script runs become word segments
/// that carry their leading whitespace ("hello world" -> "hello", " world");
/// for zh, each CJK code point is its own token. Concatenating the tokens
/// reproduces the input byte-for-byte. Trailing whitespace becomes a final
/// whitespace-only token.
std::vector<std::string> tokenize(std::string_view text, Language language);

struct ScheduledToken {
  std::string token;
  double emit_at_s = 0.0;
  bool operator==(const ScheduledToken&) const = default;
};

struct EmissionSchedule {
  std::vector<ScheduledToken> items;
  double total_duration_s = 0.0;
  bool operator==(const EmissionSchedule&) const = default;
};

/// Index of the first token emitted after the pause: floor(pause_pos * n).
std::size_t pause_index(std::size_t n_tokens, double pause_pos);

/// Token i is emitted at i*v, plus the pause length for i >= pause_index.
/// A pause position of 0 therefore delays the first token (time to first token).
EmissionSchedule schedule_emission(const std::vector<std::string>& tokens, const QosConfig& qos);

enum class ClockKind { kVirtual, kWall };
std::string_view to_string(ClockKind k);

/// Time source for playback. Implementations hold no per-stream state, so one
/// instance can be shared across concurrent playbacks.
class Clock {
 public:
  using Instant = std::chrono::steady_clock::time_point;

  virtual ~Clock() = default;
  virtual ClockKind kind() const = 0;
  virtual Instant start() const = 0;
  /// Blocks until `offset_s` after `origin` and returns the observed offset.
  virtual double wait_until(Instant origin, double offset_s) const = 0;
};

/// Returns the scheduled offset immediately.
class VirtualClock final : public Clock {
 public:
  ClockKind kind() const override { return ClockKind::kVirtual; }
  Instant start() const override { return {}; }
  double wait_until(Instant, double offset_s) const override { return offset_s; }
};

class WallClock final : public Clock {
 public:
  ClockKind kind() const override { return ClockKind::kWall; }
  Instant start() const override;
  double wait_until(Instant origin, double offset_s) const override;
};

struct TraceItem {
  std::string token;
  double scheduled_at_s = 0.0;
  double actual_at_s = 0.0;
};

struct StreamTrace {
  std::vector<TraceItem> items;
  ClockKind clock_kind = ClockKind::kVirtual;

  /// Lateness (actual - scheduled) at quantile q in [0,1], nearest rank.
  double lateness_quantile(double q) const;
};

/// Receives tokens in order. Returning false signals the consumer went away.
using TokenSink = std::function<bool(std::size_t index, std::string_view token)>;

/// Error raised mid-stream; keeps the trace of tokens delivered before the
/// failure. Codes: "sink-closed", "upstream-failed".
class StreamError : public Error {
 public:
  StreamError(std::string code, const std::string& detail, StreamTrace partial)
      : Error(std::move(code), detail), partial_(std::move(partial)) {}
  const StreamTrace& partial_trace() const noexcept { return partial_; }

 private:
  StreamTrace partial_;
};

StreamTrace play(const EmissionSchedule& schedule, const Clock& clock, const TokenSink& sink);

/// Pulls the next upstream token; nullopt marks the end. Throwing signals an
/// upstream failure.
using TokenSource = std::function<std::optional<std::string>()>;

/// Buffers the whole upstream, then re-times it with schedule_emission + play.
StreamTrace shape_upstream(const TokenSource& upstream, const QosConfig& qos, const Clock& clock,
                           const TokenSink& sink);

/// Line-delimited wire events: {"index": i, "token": "..."} per token and a
/// terminal {"done": true, "count": N}.
std::string token_event(std::size_t index, std::string_view token);
std::string done_event(std::size_t count);

struct WireEvent {
  bool done = false;
  std::size_t index = 0;
  std::string token;
  std::size_t count = 0;
};
WireEvent parse_event(std::string_view line);

}  // namespace qoe::stream
