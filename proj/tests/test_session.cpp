#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "qoe/error.hpp"
#include "qoe/session.hpp"
#include "test_util.hpp"

using namespace qoe;
using namespace qoe::session;

namespace {

ContentFixture small_fixture(std::size_t n) {
  ContentFixture f;
  for (std::size_t i = 0; i < n; ++i) {
    Question q;
    q.question_id = "q" + std::to_string(i);
    q.category = static_cast<Category>(i % 5);
    q.language = i % 2 ? Language::kZh : Language::kEn;
    q.question_text = "question " + std::to_string(i);
    for (const auto& c : std::vector<ContentConfig>{{false, false}, {false, true}, {true, false}, {true, true}}) {
      q.variants[c] = i % 2 ? "回答内容" : "an answer of a few words";
    }
    f.questions.push_back(q);
  }
  return f;
}

ExperimentGrid two_point_grid() { return {{0.01, 0.1}, {0.5}, {3.0}, {{true, true}}}; }

RaterProfile profile(Language lang = Language::kEn) { return {"", lang, "INTJ", 3, 0}; }

std::map<Dimension, int> scores(int s) {
  return {{Dimension::kOverall, s}, {Dimension::kContent, s}, {Dimension::kResponse, s}};
}

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

stream::TokenSink discard() {
  return [](std::size_t, std::string_view) { return true; };
}

}  // namespace

TEST(Assign, PicksLeastUsedQos) {
  AssignmentCounter counter;
  const auto grid = two_point_grid();
  const auto qos = grid.qos_points();
  counter.add("q0", {true, true}, qos[0]);
  counter.add("q0", {true, true}, qos[0]);
  counter.add("q0", {true, true}, qos[1]);
  std::mt19937_64 rng(1);
  const auto [content, picked] = assign_condition("q0", counter, {}, grid, rng);
  EXPECT_EQ(picked, qos[1]);
  EXPECT_EQ(counter.qos_count("q0", qos[1]), 2u);
}

TEST(Assign, SkipsSeenAndExhausts) {
  AssignmentCounter counter;
  const auto grid = two_point_grid();
  const auto qos = grid.qos_points();
  RaterHistory seen{{"q0", {true, true}, qos[0]}};
  std::mt19937_64 rng(1);
  EXPECT_EQ(assign_condition("q0", counter, seen, grid, rng).second, qos[1]);
  seen.insert({"q0", {true, true}, qos[1]});
  EXPECT_EQ(code_of([&] { assign_condition("q0", counter, seen, grid, rng); }), "exhausted");
}

TEST(Service, BalancedSmallExample) {
  SessionService svc({small_fixture(2), two_point_grid(), std::nullopt, 5});
  const auto a = svc.register_rater(profile());
  const auto b = svc.register_rater(profile());
  svc.create_session(a);
  svc.create_session(b);
  svc.create_session(a);
  svc.create_session(b);
  const auto counter = svc.counter();
  for (const auto* q : {"q0", "q1"})
    for (const auto& p : two_point_grid().qos_points()) EXPECT_EQ(counter.qos_count(q, p), 2u);
}

TEST(Service, SessionLimit) {
  SessionService svc({small_fixture(3), standard_grid(), std::nullopt, 1});
  const auto r = svc.register_rater(profile());
  for (int i = 0; i < 4; ++i) svc.create_session(r);
  EXPECT_EQ(svc.profile(r)->sessions_completed, 4);
  EXPECT_EQ(code_of([&] { svc.create_session(r); }), "session-limit-exceeded");
  EXPECT_EQ(code_of([&] { svc.create_session("nobody"); }), "unknown-rater");
}

TEST(Service, PlanCoversEveryQuestionWithoutRepeats) {
  const auto fixture = small_fixture(12);
  SessionService svc({fixture, standard_grid(), std::nullopt, 3});
  const auto r = svc.register_rater(profile());
  std::set<ConditionId> seen;
  for (int s = 0; s < 4; ++s) {
    const auto plan = svc.create_session(r);
    std::set<std::string> questions;
    for (const auto& it : plan.items) {
      questions.insert(it.question_id);
      EXPECT_TRUE(seen.insert({it.question_id, it.content, it.qos}).second);
      EXPECT_TRUE(standard_grid().contains(it.qos));
    }
    EXPECT_EQ(questions.size(), fixture.questions.size());
  }
}

TEST(Service, RandomSequencesStayBalanced) {
  const auto fixture = small_fixture(6);
  SessionService svc({fixture, standard_grid(), std::nullopt, 17});
  std::vector<std::string> raters;
  for (int i = 0; i < 30; ++i) raters.push_back(svc.register_rater(profile()));
  std::mt19937_64 rng(2);
  for (int s = 0; s < 100; ++s) {
    const auto& r = raters[rng() % raters.size()];
    if (svc.profile(r)->sessions_completed < 4) svc.create_session(r);
  }
  const auto counter = svc.counter();
  for (const auto& q : fixture.questions) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& p : standard_grid().qos_points()) {
      lo = std::min(lo, counter.qos_count(q.question_id, p));
      hi = std::max(hi, counter.qos_count(q.question_id, p));
    }
    EXPECT_LE(hi - lo, 1u) << q.question_id;
  }
}

TEST(Service, RatingFlowAndErrors) {
  SessionService svc({small_fixture(2), standard_grid(), std::nullopt, 1});
  const auto r = svc.register_rater(profile());
  const auto plan = svc.create_session(r);
  const auto& sid = plan.session_id;
  EXPECT_EQ(code_of([&] { svc.submit_rating("nope", 0, scores(3)); }), "unknown-session");
  EXPECT_EQ(code_of([&] { svc.submit_rating(sid, 9, scores(3)); }), "bad-index");
  EXPECT_EQ(code_of([&] { svc.submit_rating(sid, 0, scores(3)); }), "not-streamed");
  EXPECT_EQ(code_of([&] { svc.submit_rating(sid, 0, scores(6)); }), "score-out-of-range");
  auto partial = scores(3);
  partial.erase(Dimension::kContent);
  EXPECT_EQ(code_of([&] { svc.submit_rating(sid, 0, partial); }), "missing-dimension");

  svc.stream_item(sid, 0, discard());
  const auto rec = svc.submit_rating(sid, 0, scores(4));
  EXPECT_EQ(rec.rater_id, r);
  EXPECT_EQ(rec.question_id, plan.items[0].question_id);
  EXPECT_EQ(rec.qos, plan.items[0].qos);
  EXPECT_EQ(code_of([&] { svc.submit_rating(sid, 0, scores(4)); }), "duplicate-submission");
  EXPECT_EQ(code_of([&] { svc.stream_item(sid, 0, discard()); }), "already-rated");
  EXPECT_EQ(svc.ratings().size(), 1u);
}

TEST(Service, InterruptedStreamDoesNotCount) {
  SessionService svc({small_fixture(1), standard_grid(), std::nullopt, 1});
  const auto plan = svc.create_session(svc.register_rater(profile()));
  EXPECT_EQ(code_of([&] { svc.stream_item(plan.session_id, 0, [](std::size_t, std::string_view) { return false; }); }),
            "sink-closed");
  EXPECT_EQ(code_of([&] { svc.submit_rating(plan.session_id, 0, scores(2)); }), "not-streamed");
}

TEST(Service, StreamTraceMatchesSchedule) {
  const auto fixture = small_fixture(2);
  SessionService svc({fixture, standard_grid(), std::nullopt, 1});
  const auto plan = svc.create_session(svc.register_rater(profile()));
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    const auto& item = plan.items[i];
    const auto* q = fixture.find(item.question_id);
    const auto expected =
        stream::schedule_emission(stream::tokenize(q->variants.at(item.content), q->language), item.qos);
    const auto trace = svc.stream_item(plan.session_id, i, discard());
    ASSERT_EQ(trace.items.size(), expected.items.size());
    for (std::size_t k = 0; k < expected.items.size(); ++k) {
      EXPECT_EQ(trace.items[k].scheduled_at_s, expected.items[k].emit_at_s);
      EXPECT_EQ(trace.items[k].token, expected.items[k].token);
    }
  }
}

TEST(Service, RejectsBadProfile) {
  SessionService svc({small_fixture(1), standard_grid(), std::nullopt, 1});
  auto p = profile();
  p.mbti = "ABCD";
  EXPECT_EQ(code_of([&] { svc.register_rater(p); }), "bad-mbti");
}

TEST(Store, ReplayRestoresState) {
  const auto dir = qoe::testing::temp_dir("store");
  const auto fixture = small_fixture(4);
  AssignmentCounter before;
  std::string sid;
  {
    SessionService svc({fixture, standard_grid(), dir, 8});
    const auto r1 = svc.register_rater(profile());
    const auto r2 = svc.register_rater(profile(Language::kZh));
    svc.create_session(r1);
    sid = svc.create_session(r2).session_id;
    svc.create_session(r1);
    svc.stream_item(sid, 1, discard());
    svc.submit_rating(sid, 1, scores(5));
    svc.stream_item(sid, 2, discard());
    before = svc.counter();
  }
  // A torn trailing line is dropped on replay.
  std::ofstream(dir / "ratings.jsonl", std::ios::app) << "{\"session_id\":\"s0";

  SessionService replayed({fixture, standard_grid(), dir, 8});
  EXPECT_EQ(replayed.counter(), before);
  EXPECT_EQ(replayed.ratings().size(), 1u);
  EXPECT_EQ(replayed.profile("r000001")->sessions_completed, 2);
  EXPECT_EQ(code_of([&] { replayed.submit_rating(sid, 1, scores(5)); }), "duplicate-submission");
  EXPECT_NO_THROW(replayed.submit_rating(sid, 2, scores(2)));
  const auto next = replayed.create_session(replayed.register_rater(profile()));
  EXPECT_NE(next.session_id, sid);
  std::filesystem::remove_all(dir);
}

TEST(Store, ConcurrentSessionsKeepCountersConsistent) {
  const auto fixture = small_fixture(5);
  SessionService svc({fixture, standard_grid(), std::nullopt, 4});
  std::vector<std::string> raters;
  for (int i = 0; i < 16; ++i) raters.push_back(svc.register_rater(profile()));
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int s = 0; s < 4; ++s) {
        try {
          svc.create_session(raters[2 * t]);
          svc.create_session(raters[2 * t + 1]);
        } catch (...) {
          ++failures;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(failures.load(), 0);
  std::size_t total = 0;
  for (const auto& [k, n] : svc.counter().qos_counts) total += n;
  EXPECT_EQ(total, 16u * 4u * fixture.questions.size());
  const auto counter = svc.counter();
  for (const auto& q : fixture.questions) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& p : standard_grid().qos_points()) {
      lo = std::min(lo, counter.qos_count(q.question_id, p));
      hi = std::max(hi, counter.qos_count(q.question_id, p));
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(Export, JsonLinesOfAcceptedRatings) {
  SessionService svc({small_fixture(2), standard_grid(), std::nullopt, 1});
  const auto plan = svc.create_session(svc.register_rater(profile()));
  svc.stream_item(plan.session_id, 0, discard());
  svc.submit_rating(plan.session_id, 0, scores(3));
  std::istringstream in(svc.export_ratings());
  EXPECT_EQ(read_records(in), svc.ratings());
}
