#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "qoe/core.hpp"
#include "qoe/io.hpp"
#include "qoe/stream.hpp"

namespace qoe::session {

struct PlanItem {
  std::string question_id;
  ContentConfig content;
  QosConfig qos;
  bool operator==(const PlanItem&) const = default;
};

struct SessionPlan {
  std::string session_id;
  std::string rater_id;
  std::vector<PlanItem> items;
  Timestamp created_at{};
  std::uint64_t seed = 0;
  bool operator==(const SessionPlan&) const = default;
};

/// Global per-question assignment counts, by QoS point and by content config.
struct AssignmentCounter {
  std::map<std::pair<std::string, QosConfig>, std::size_t> qos_counts;
  std::map<std::pair<std::string, ContentConfig>, std::size_t> content_counts;

  void add(const std::string& question_id, const ContentConfig& content, const QosConfig& qos);
  std::size_t qos_count(const std::string& question_id, const QosConfig& qos) const;
  std::size_t content_count(const std::string& question_id, const ContentConfig& content) const;
  bool operator==(const AssignmentCounter&) const = default;
};

/// (question, content, qos) tuples already assigned to one rater.
using RaterHistory = std::set<ConditionId>;

/// Among grid combinations this rater has not seen for the question, picks one
/// minimizing (qos count, content count) lexicographically; ties are broken
/// uniformly with `rng`. Increments the counter. Throws "exhausted" when the
/// rater has seen every combination.
std::pair<ContentConfig, QosConfig> assign_condition(const std::string& question_id,
                                                     AssignmentCounter& counter,
                                                     const RaterHistory& history,
                                                     const ExperimentGrid& grid,
                                                     std::mt19937_64& rng);

ordered_json to_json(const SessionPlan& plan, const ContentFixture* fixture = nullptr);
SessionPlan plan_from_json(const ordered_json& j);

/// Append-only JSON Lines store: raters.jsonl, plans.jsonl, ratings.jsonl and
/// streams.jsonl under one directory. Each append writes one complete line and
/// flushes before returning.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path dir);

  void append_rater(const RaterProfile& profile);
  void append_plan(const SessionPlan& plan);
  void append_rating(const RatingRecord& record);
  void append_streamed(const std::string& session_id, std::size_t index);

  std::vector<RaterProfile> raters() const;
  std::vector<SessionPlan> plans() const;
  std::vector<RatingRecord> ratings() const;
  std::vector<std::pair<std::string, std::size_t>> streamed() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void append_line(const char* file, const std::string& line);
  std::vector<std::string> lines(const char* file) const;

  std::filesystem::path dir_;
};

struct ServiceConfig {
  ContentFixture content;
  ExperimentGrid grid;
  std::optional<std::filesystem::path> store_dir;
  std::uint64_t seed = 0;
  std::shared_ptr<const stream::Clock> clock = std::make_shared<stream::VirtualClock>();
};

/// Rater registration, balanced session planning, item streaming and rating
/// intake. State changes are serialized through one writer lock and persisted
/// before they become visible; reads take a shared lock.
class SessionService {
 public:
  explicit SessionService(ServiceConfig config);

  std::string register_rater(RaterProfile profile);
  SessionPlan create_session(const std::string& rater_id);

  /// Throws unknown-session, bad-index or already-rated; otherwise returns the
  /// text and QoS the item will be streamed with.
  std::pair<std::string, QosConfig> check_streamable(const std::string& session_id,
                                                     std::size_t index) const;
  /// Streams the item through the shaper. The item counts as streamed once
  /// every token has been delivered.
  stream::StreamTrace stream_item(const std::string& session_id, std::size_t index,
                                  const stream::TokenSink& sink);

  RatingRecord submit_rating(const std::string& session_id, std::size_t index,
                             const std::map<Dimension, int>& scores);

  std::string export_ratings() const;

  std::optional<SessionPlan> plan(const std::string& session_id) const;
  std::optional<RaterProfile> profile(const std::string& rater_id) const;
  AssignmentCounter counter() const;
  std::vector<RatingRecord> ratings() const;
  const ContentFixture& content() const { return config_.content; }
  const ExperimentGrid& grid() const { return config_.grid; }

 private:
  struct SessionState {
    SessionPlan plan;
    std::set<std::size_t> streamed;
    std::set<std::size_t> rated;
  };

  void apply_plan(const SessionPlan& plan);
  const SessionState& session_or_throw(const std::string& session_id) const;

  ServiceConfig config_;
  std::unique_ptr<RecordStore> store_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, RaterProfile> raters_;
  std::map<std::string, SessionState> sessions_;
  std::map<std::string, RaterHistory> history_;
  AssignmentCounter counter_;
  std::vector<RatingRecord> ratings_;
  std::uint64_t next_rater_ = 1;
  std::uint64_t next_session_ = 1;
};

}  // namespace qoe::session
