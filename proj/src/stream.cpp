#include "qoe/stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>

#include "json.hpp"

namespace qoe::stream {

namespace {

// Byte length of the UTF-8 sequence starting at `lead`; invalid lead bytes
// count as a single byte so arbitrary input still round-trips.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

std::uint32_t decode(std::string_view s, std::size_t len) {
  const auto b = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  switch (len) {
    case 2:
      return ((b(0) & 0x1Fu) << 6) | (b(1) & 0x3Fu);
    case 3:
      return ((b(0) & 0x0Fu) << 12) | ((b(1) & 0x3Fu) << 6) | (b(2) & 0x3Fu);
    case 4:
      return ((b(0) & 0x07u) << 18) | ((b(1) & 0x3Fu) << 12) | ((b(2) & 0x3Fu) << 6) |
             (b(3) & 0x3Fu);
    default:
      return b(0);
  }
}

bool is_cjk(std::uint32_t cp) {
  return (cp >= 0x2E80 && cp <= 0x2FDF) ||    // radicals
         (cp >= 0x3000 && cp <= 0x303F) ||    // CJK punctuation
         (cp >= 0x3040 && cp <= 0x30FF) ||    // kana
         (cp >= 0x3400 && cp <= 0x4DBF) ||    // ext A
         (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
         (cp >= 0xAC00 && cp <= 0xD7AF) ||    // hangul
         (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
         (cp >= 0xFF00 && cp <= 0xFFEF) ||    // fullwidth forms
         (cp >= 0x20000 && cp <= 0x3134F);    // ext B..G
}

bool is_space(std::uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, Language language) {
  std::vector<std::string> tokens;
  std::string current;
  bool current_has_word = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t len =
        std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
    const std::string_view unit = text.substr(i, len);
    const std::uint32_t cp = decode(unit, len);
    i += len;

    if (is_space(cp)) {
      // whitespace closes a word and attaches to whatever follows
      if (current_has_word) {
        tokens.push_back(std::move(current));
        current.clear();
        current_has_word = false;
      }
      current.append(unit);
    } else if (language == Language::kZh && is_cjk(cp)) {
      if (current_has_word) {
        tokens.push_back(std::move(current));
        current.clear();
      }
      current.append(unit);
      tokens.push_back(std::move(current));
      current.clear();
      current_has_word = false;
    } else {
      current.append(unit);
      current_has_word = true;
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t pause_index(std::size_t n_tokens, double pause_pos) {
  const double k = std::floor(pause_pos * static_cast<double>(n_tokens));
  return std::min(static_cast<std::size_t>(std::max(k, 0.0)), n_tokens);
}

EmissionSchedule schedule_emission(const std::vector<std::string>& tokens, const QosConfig& qos) {
  EmissionSchedule schedule;
  const std::size_t n = tokens.size();
  const std::size_t k = pause_index(n, qos.pause_pos);
  schedule.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * qos.speed_s_per_token;
    if (i >= k) t += qos.pause_dur_s;
    schedule.items.push_back({tokens[i], t});
  }
  schedule.total_duration_s = n == 0 ? 0.0 : schedule.items.back().emit_at_s;
  return schedule;
}

std::string_view to_string(ClockKind k) { return k == ClockKind::kVirtual ? "virtual" : "wall"; }

Clock::Instant WallClock::start() const { return std::chrono::steady_clock::now(); }

double WallClock::wait_until(Instant origin, double offset_s) const {
  const auto target =
      origin + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(offset_s));
  std::this_thread::sleep_until(target);
  const auto now = std::chrono::steady_clock::now();
  // sleep_until never returns early, but guard the invariant against clock granularity
  return std::max(std::chrono::duration<double>(now - origin).count(), offset_s);
}

double StreamTrace::lateness_quantile(double q) const {
  if (items.empty()) return 0.0;
  std::vector<double> late;
  late.reserve(items.size());
  for (const auto& it : items) late.push_back(it.actual_at_s - it.scheduled_at_s);
  std::sort(late.begin(), late.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(late.size())));
  return late[std::clamp<std::size_t>(rank, 1, late.size()) - 1];
}

StreamTrace play(const EmissionSchedule& schedule, const Clock& clock, const TokenSink& sink) {
  StreamTrace trace;
  trace.clock_kind = clock.kind();
  trace.items.reserve(schedule.items.size());
  const auto origin = clock.start();
  for (std::size_t i = 0; i < schedule.items.size(); ++i) {
    const auto& item = schedule.items[i];
    const double actual = clock.wait_until(origin, item.emit_at_s);
    if (!sink(i, item.token)) {
      throw StreamError("sink-closed", "consumer disconnected at token " + std::to_string(i),
                        std::move(trace));
    }
    trace.items.push_back({item.token, item.emit_at_s, actual});
  }
  return trace;
}

StreamTrace shape_upstream(const TokenSource& upstream, const QosConfig& qos, const Clock& clock,
                           const TokenSink& sink) {
  std::vector<std::string> tokens;
  try {
    while (auto tok = upstream()) tokens.push_back(std::move(*tok));
  } catch (const std::exception& e) {
    StreamTrace partial;
    partial.clock_kind = clock.kind();
    throw StreamError("upstream-failed", e.what(), std::move(partial));
  }
  return play(schedule_emission(tokens, qos), clock, sink);
}

std::string token_event(std::size_t index, std::string_view token) {
  nlohmann::ordered_json j;
  j["index"] = index;
  j["token"] = std::string(token);
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string done_event(std::size_t count) {
  nlohmann::ordered_json j;
  j["done"] = true;
  j["count"] = count;
  return j.dump();
}

WireEvent parse_event(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("bad-event", e.what());
  }
  WireEvent ev;
  if (j.contains("done")) {
    ev.done = j.at("done").get<bool>();
    ev.count = j.at("count").get<std::size_t>();
    return ev;
  }
  if (!j.contains("index") || !j.contains("token")) throw Error("bad-event", std::string(line));
  ev.index = j.at("index").get<std::size_t>();
  ev.token = j.at("token").get<std::string>();
  return ev;
}

}  // namespace qoe::stream
