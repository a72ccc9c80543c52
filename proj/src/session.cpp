#include "qoe/session.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>

#include "qoe/error.hpp"

namespace qoe::session {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string make_id(const char* prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

// Numeric suffix of ids produced by make_id; 0 for foreign ids.
std::uint64_t id_number(const std::string& id, std::string_view prefix) {
  if (id.rfind(prefix, 0) != 0) return 0;
  try {
    return std::stoull(id.substr(prefix.size()));
  } catch (const std::exception&) {
    return 0;
  }
}

constexpr const char* kRatersFile = "raters.jsonl";
constexpr const char* kPlansFile = "plans.jsonl";
constexpr const char* kRatingsFile = "ratings.jsonl";
constexpr const char* kStreamsFile = "streams.jsonl";

}  // namespace

void AssignmentCounter::add(const std::string& question_id, const ContentConfig& content,
                            const QosConfig& qos) {
  ++qos_counts[{question_id, qos}];
  ++content_counts[{question_id, content}];
}

std::size_t AssignmentCounter::qos_count(const std::string& question_id, const QosConfig& qos) const {
  auto it = qos_counts.find({question_id, qos});
  return it == qos_counts.end() ? 0 : it->second;
}

std::size_t AssignmentCounter::content_count(const std::string& question_id,
                                             const ContentConfig& content) const {
  auto it = content_counts.find({question_id, content});
  return it == content_counts.end() ? 0 : it->second;
}

std::pair<ContentConfig, QosConfig> assign_condition(const std::string& question_id,
                                                     AssignmentCounter& counter,
                                                     const RaterHistory& history,
                                                     const ExperimentGrid& grid,
                                                     std::mt19937_64& rng) {
  using Key = std::pair<std::size_t, std::size_t>;
  std::vector<std::pair<ContentConfig, QosConfig>> best;
  Key best_key{SIZE_MAX, SIZE_MAX};
  for (const auto& [content, qos] : grid.combinations()) {
    if (history.count(ConditionId{question_id, content, qos})) continue;
    const Key key{counter.qos_count(question_id, qos), counter.content_count(question_id, content)};
    if (key < best_key) {
      best_key = key;
      best.clear();
    }
    if (key == best_key) best.emplace_back(content, qos);
  }
  if (best.empty()) throw Error("exhausted", "rater has seen every combination for " + question_id);
  const auto pick = best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)];
  counter.add(question_id, pick.first, pick.second);
  return pick;
}

ordered_json to_json(const SessionPlan& plan, const ContentFixture* fixture) {
  ordered_json j;
  j["session_id"] = plan.session_id;
  j["rater_id"] = plan.rater_id;
  j["created_at"] = format_timestamp(plan.created_at);
  j["seed"] = plan.seed;
  j["items"] = ordered_json::array();
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    const auto& item = plan.items[i];
    ordered_json it;
    it["index"] = i;
    it["question_id"] = item.question_id;
    if (fixture != nullptr) {
      if (const auto* q = fixture->find(item.question_id)) {
        it["category"] = std::string(to_string(q->category));
        it["language"] = std::string(to_string(q->language));
        it["question_text"] = q->question_text;
      }
    }
    it["content"] = to_json(item.content);
    it["qos"] = to_json(item.qos);
    j["items"].push_back(std::move(it));
  }
  return j;
}

SessionPlan plan_from_json(const ordered_json& j) {
  try {
    SessionPlan p;
    p.session_id = j.at("session_id").get<std::string>();
    p.rater_id = j.at("rater_id").get<std::string>();
    p.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    p.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& it : j.at("items")) {
      p.items.push_back({it.at("question_id").get<std::string>(), content_from_json(it.at("content")),
                         qos_from_json(it.at("qos"))});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-plan", e.what());
  }
}

RecordStore::RecordStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error("io-error", "cannot create " + dir_.string() + ": " + ec.message());
}

void RecordStore::append_line(const char* file, const std::string& line) {
  // One write call per line; a crash leaves at most a truncated last line,
  // which replay drops.
  std::ofstream out(dir_ / file, std::ios::app | std::ios::binary);
  const std::string data = line + "\n";
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error("io-error", "append to " + (dir_ / file).string() + " failed");
}

std::vector<std::string> RecordStore::lines(const char* file) const {
  std::vector<std::string> out;
  std::ifstream in(dir_ / file, std::ios::binary);
  if (!in) return out;
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (pos < all.size()) {
    const auto nl = all.find('\n', pos);
    if (nl == std::string::npos) break;  // incomplete trailing line
    if (nl > pos) out.push_back(all.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

void RecordStore::append_rater(const RaterProfile& profile) { append_line(kRatersFile, to_json(profile).dump()); }
void RecordStore::append_plan(const SessionPlan& plan) { append_line(kPlansFile, to_json(plan).dump()); }
void RecordStore::append_rating(const RatingRecord& record) { append_line(kRatingsFile, to_json(record).dump()); }
void RecordStore::append_streamed(const std::string& session_id, std::size_t index) {
  ordered_json j;
  j["session_id"] = session_id;
  j["index"] = index;
  append_line(kStreamsFile, j.dump());
}

std::vector<RaterProfile> RecordStore::raters() const {
  std::vector<RaterProfile> out;
  for (const auto& l : lines(kRatersFile)) out.push_back(profile_from_json(ordered_json::parse(l)));
  return out;
}

std::vector<SessionPlan> RecordStore::plans() const {
  std::vector<SessionPlan> out;
  for (const auto& l : lines(kPlansFile)) out.push_back(plan_from_json(ordered_json::parse(l)));
  return out;
}

std::vector<RatingRecord> RecordStore::ratings() const {
  std::vector<RatingRecord> out;
  for (const auto& l : lines(kRatingsFile)) out.push_back(record_from_json(ordered_json::parse(l)));
  return out;
}

std::vector<std::pair<std::string, std::size_t>> RecordStore::streamed() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& l : lines(kStreamsFile)) {
    const auto j = ordered_json::parse(l);
    out.emplace_back(j.at("session_id").get<std::string>(), j.at("index").get<std::size_t>());
  }
  return out;
}

SessionService::SessionService(ServiceConfig config) : config_(std::move(config)) {
  if (config_.content.questions.empty()) throw Error("bad-content", "content fixture is empty");
  if (config_.grid.combinations().empty()) throw Error("bad-grid", "grid is empty");
  if (!config_.clock) config_.clock = std::make_shared<stream::VirtualClock>();
  if (!config_.store_dir) return;
  store_ = std::make_unique<RecordStore>(*config_.store_dir);
  try {
    for (auto& p : store_->raters()) {
      next_rater_ = std::max(next_rater_, id_number(p.rater_id, "r") + 1);
      raters_[p.rater_id] = std::move(p);
    }
    for (const auto& plan : store_->plans()) apply_plan(plan);
    for (const auto& [sid, idx] : store_->streamed()) {
      auto it = sessions_.find(sid);
      if (it != sessions_.end()) it->second.streamed.insert(idx);
    }
    for (auto& r : store_->ratings()) {
      auto it = sessions_.find(r.session_id);
      if (it == sessions_.end()) continue;
      const auto& items = it->second.plan.items;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].question_id == r.question_id) it->second.rated.insert(i);
      }
      ratings_.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-store", std::string("cannot replay store: ") + e.what());
  }
}

void SessionService::apply_plan(const SessionPlan& plan) {
  auto& history = history_[plan.rater_id];
  for (const auto& item : plan.items) {
    counter_.add(item.question_id, item.content, item.qos);
    history.insert({item.question_id, item.content, item.qos});
  }
  auto r = raters_.find(plan.rater_id);
  if (r != raters_.end()) ++r->second.sessions_completed;
  next_session_ = std::max(next_session_, id_number(plan.session_id, "s") + 1);
  sessions_[plan.session_id] = SessionState{plan, {}, {}};
}

std::string SessionService::register_rater(RaterProfile profile) {
  profile.sessions_completed = 0;
  profile.rater_id = "pending";
  if (auto err = validate_profile(profile)) throw Error(err->code, err->field);
  std::unique_lock lock(mutex_);
  profile.rater_id = make_id("r", next_rater_);
  if (store_) store_->append_rater(profile);
  ++next_rater_;
  raters_[profile.rater_id] = profile;
  return profile.rater_id;
}

SessionPlan SessionService::create_session(const std::string& rater_id) {
  std::unique_lock lock(mutex_);
  auto rater = raters_.find(rater_id);
  if (rater == raters_.end()) throw Error("unknown-rater", rater_id);
  if (rater->second.sessions_completed >= kMaxSessionsPerRater) {
    throw Error("session-limit-exceeded", rater_id + " already has " +
                                              std::to_string(kMaxSessionsPerRater) + " sessions");
  }

  SessionPlan plan;
  plan.session_id = make_id("s", next_session_);
  plan.rater_id = rater_id;
  plan.created_at = now_utc();
  plan.seed = mix(config_.seed ^ mix(next_session_));
  std::mt19937_64 rng(plan.seed);

  // Work on copies so a failure leaves the counters untouched.
  AssignmentCounter counter = counter_;
  const RaterHistory& history = history_[rater_id];
  for (const auto& q : config_.content.questions) {
    auto [content, qos] = assign_condition(q.question_id, counter, history, config_.grid, rng);
    plan.items.push_back({q.question_id, content, qos});
  }
  std::shuffle(plan.items.begin(), plan.items.end(), rng);

  if (store_) store_->append_plan(plan);
  apply_plan(plan);
  return plan;
}

const SessionService::SessionState& SessionService::session_or_throw(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error("unknown-session", session_id);
  return it->second;
}

std::pair<std::string, QosConfig> SessionService::check_streamable(const std::string& session_id,
                                                                   std::size_t index) const {
  std::shared_lock lock(mutex_);
  const auto& s = session_or_throw(session_id);
  if (index >= s.plan.items.size()) {
    throw Error("bad-index", std::to_string(index) + " >= " + std::to_string(s.plan.items.size()));
  }
  if (s.rated.count(index)) throw Error("already-rated", session_id + "/" + std::to_string(index));
  const auto& item = s.plan.items[index];
  const auto* q = config_.content.find(item.question_id);
  if (q == nullptr) throw Error("unknown-question", item.question_id);
  return {q->variants.at(item.content), item.qos};
}

stream::StreamTrace SessionService::stream_item(const std::string& session_id, std::size_t index,
                                                const stream::TokenSink& sink) {
  const auto [text, qos] = check_streamable(session_id, index);
  Language language = Language::kEn;
  {
    std::shared_lock lock(mutex_);
    const auto& item = sessions_.at(session_id).plan.items[index];
    language = config_.content.find(item.question_id)->language;
  }
  const auto schedule = stream::schedule_emission(stream::tokenize(text, language), qos);
  auto trace = stream::play(schedule, *config_.clock, sink);

  std::unique_lock lock(mutex_);
  auto& s = sessions_.at(session_id);
  if (!s.streamed.count(index)) {
    if (store_) store_->append_streamed(session_id, index);
    s.streamed.insert(index);
  }
  return trace;
}

RatingRecord SessionService::submit_rating(const std::string& session_id, std::size_t index,
                                           const std::map<Dimension, int>& scores) {
  std::unique_lock lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error("unknown-session", session_id);
  auto& s = it->second;
  if (index >= s.plan.items.size()) {
    throw Error("bad-index", std::to_string(index) + " >= " + std::to_string(s.plan.items.size()));
  }
  if (auto err = validate_scores(scores)) throw Error(err->code, err->field);
  if (scores.size() != kDimensions.size()) throw Error("missing-dimension", "scores");
  if (s.rated.count(index)) throw Error("duplicate-submission", session_id + "/" + std::to_string(index));
  if (!s.streamed.count(index)) throw Error("not-streamed", session_id + "/" + std::to_string(index));

  const auto& item = s.plan.items[index];
  RatingRecord r;
  r.session_id = session_id;
  r.rater_id = s.plan.rater_id;
  r.question_id = item.question_id;
  r.category = config_.content.find(item.question_id)->category;
  r.content = item.content;
  r.qos = item.qos;
  r.scores = scores;
  r.timestamp = now_utc();
  if (auto err = validate_record(r, &config_.content)) throw Error(err->code, err->field);

  if (store_) store_->append_rating(r);
  s.rated.insert(index);
  ratings_.push_back(r);
  return r;
}

std::string SessionService::export_ratings() const {
  std::shared_lock lock(mutex_);
  return records_to_jsonl(ratings_);
}

std::optional<SessionPlan> SessionService::plan(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.plan;
}

std::optional<RaterProfile> SessionService::profile(const std::string& rater_id) const {
  std::shared_lock lock(mutex_);
  auto it = raters_.find(rater_id);
  if (it == raters_.end()) return std::nullopt;
  return it->second;
}

AssignmentCounter SessionService::counter() const {
  std::shared_lock lock(mutex_);
  return counter_;
}

std::vector<RatingRecord> SessionService::ratings() const {
  std::shared_lock lock(mutex_);
  return ratings_;
}

}  // namespace qoe::session
