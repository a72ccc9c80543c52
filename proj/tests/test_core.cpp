#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "qoe/core.hpp"
#include "qoe/error.hpp"
#include "qoe/io.hpp"
#include "test_util.hpp"

using namespace qoe;
using qoe::testing::make_record;

namespace {

RatingRecord sample_record() {
  return make_record("r1", "q01", {true, false}, {0.05, 0.25, 3.0}, 3, 5, 1);
}

}  // namespace

TEST(ValidateRecord, AcceptsInRangeScores) {
  EXPECT_FALSE(validate_record(sample_record()).has_value());
}

TEST(ValidateRecord, ScoreBelowScaleIsOutOfRange) {
  auto r = sample_record();
  r.scores[Dimension::kOverall] = 0;
  auto err = validate_record(r);
  ASSERT_TRUE(err);
  EXPECT_EQ(err->code, "score-out-of-range");
  EXPECT_EQ(err->field, "overall");
}

TEST(ValidateRecord, ScoreAboveScaleIsOutOfRange) {
  auto r = sample_record();
  r.scores[Dimension::kResponse] = 6;
  EXPECT_EQ(validate_record(r)->code, "score-out-of-range");
}

TEST(ValidateRecord, MissingResponseIsMissingDimension) {
  auto r = sample_record();
  r.scores.erase(Dimension::kResponse);
  auto err = validate_record(r);
  ASSERT_TRUE(err);
  EXPECT_EQ(err->code, "missing-dimension");
  EXPECT_EQ(err->field, "response");
}

TEST(ValidateRecord, UnknownQuestionNeedsFixture) {
  auto r = sample_record();
  r.question_id = "nope";
  EXPECT_FALSE(validate_record(r).has_value());
  const auto fixture = standard_question_set();
  EXPECT_EQ(validate_record(r, &fixture)->code, "unknown-question");
}

TEST(ValidateRecord, RejectsBadQos) {
  auto r = sample_record();
  r.qos.pause_pos = 1.0;
  EXPECT_EQ(validate_record(r)->code, "bad-qos");
  r.qos = {0.0, 0.0, 3.0};
  EXPECT_EQ(validate_record(r)->code, "bad-qos");
  r.qos = {0.05, 0.0, -1.0};
  EXPECT_EQ(validate_record(r)->code, "bad-qos");
}

TEST(ValidateStore, DuplicateTupleRejected) {
  std::vector<RatingRecord> records{sample_record(), sample_record()};
  records[1].session_id = "other";
  try {
    validate_store(records);
    FAIL() << "expected duplicate-rating";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "duplicate-rating");
  }
  records[1].rater_id = "r2";
  EXPECT_NO_THROW(validate_store(records));
}

TEST(Profile, MbtiPattern) {
  EXPECT_TRUE(is_valid_mbti("INTJ"));
  EXPECT_TRUE(is_valid_mbti("ESFP"));
  EXPECT_FALSE(is_valid_mbti("XXXX"));
  EXPECT_FALSE(is_valid_mbti("INT"));
  EXPECT_FALSE(is_valid_mbti("intj"));
  int valid = 0;
  const std::string letters = "EISNTFJP";
  for (char a : letters)
    for (char b : letters)
      for (char c : letters)
        for (char d : letters) valid += is_valid_mbti(std::string{a, b, c, d});
  EXPECT_EQ(valid, 16);
  EXPECT_EQ(mbti_letter("INTJ", 0), 'I');
  EXPECT_EQ(mbti_letter("INTJ", 3), 'J');
}

TEST(Profile, Validation) {
  RaterProfile p{"r1", Language::kEn, "INTJ", 3, 0};
  EXPECT_FALSE(validate_profile(p));
  p.mbti = "XXXX";
  EXPECT_EQ(validate_profile(p)->code, "bad-mbti");
  p.mbti = "INTJ";
  p.patience = 6;
  EXPECT_EQ(validate_profile(p)->code, "bad-patience");
  p.patience = 1;
  p.sessions_completed = 5;
  EXPECT_EQ(validate_profile(p)->code, "bad-sessions");
}

TEST(FeatureVector, DirectFieldMapping) {
  EXPECT_EQ(to_feature_vector({true, false}, {0.05, 0.25, 3.0}), (FeatureVector{1, 0, 0.05, 0.25, 3}));
  EXPECT_EQ(to_feature_vector({false, false}, {0.01, 0.0, 3.0}), (FeatureVector{0, 0, 0.01, 0, 3}));
}

TEST(FeatureVector, RoundTripAndInjectiveOnGrid) {
  std::set<FeatureVector> seen;
  for (const auto& [content, qos] : standard_grid().combinations()) {
    const auto x = to_feature_vector(content, qos);
    const auto [c2, q2] = from_feature_vector(x);
    EXPECT_EQ(c2, content);
    EXPECT_EQ(q2, qos);
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 144u);
}

TEST(FeatureVector, NonBinaryFlagRejected) {
  EXPECT_THROW(from_feature_vector({0.5, 1, 0.05, 0.25, 3}), Error);
}

TEST(Grid, StandardGridShape) {
  const auto g = standard_grid();
  EXPECT_EQ(g.qos_points().size(), 36u);
  EXPECT_EQ(g.content_configs.size(), 4u);
  const auto combos = g.combinations();
  EXPECT_EQ(combos.size(), 144u);
  EXPECT_EQ(std::set(combos.begin(), combos.end()).size(), 144u);
  EXPECT_TRUE(g.contains({0.05, 0.25, 3.0}));
  EXPECT_FALSE(g.contains({0.03, 0.3, 1.0}));
  for (const auto& q : held_out_grid().qos_points()) EXPECT_FALSE(g.contains(q));
}

TEST(QuestionSet, StandardCategorySizes) {
  const auto qs = standard_question_set();
  ASSERT_EQ(qs.questions.size(), 54u);
  std::map<Category, int> sizes;
  for (const auto& q : qs.questions) ++sizes[q.category];
  EXPECT_EQ(sizes[Category::kKnowledgeReasoning], 14);
  EXPECT_EQ(sizes[Category::kCreativeTasks], 5);
  EXPECT_EQ(sizes[Category::kLifestyleEntertainment], 10);
  EXPECT_EQ(sizes[Category::kEmpathyPersonalGrowth], 10);
  EXPECT_EQ(sizes[Category::kSocietyProfessional], 15);
}

TEST(Timestamp, MillisecondIsoRoundTrip) {
  const auto t = parse_timestamp("2025-03-04T05:06:07.089Z");
  EXPECT_EQ(format_timestamp(t), "2025-03-04T05:06:07.089Z");
  EXPECT_THROW(parse_timestamp("2025-03-04 05:06:07"), Error);
}

TEST(Params, Validation) {
  EXPECT_NO_THROW(validate(PipelineParams{}));
  EXPECT_THROW(validate(PipelineParams{0.0, 0.5}), Error);
  EXPECT_THROW(validate(PipelineParams{2.0, 1.5}), Error);
}

TEST(Serialization, RecordRoundTrip) {
  const auto r = sample_record();
  const auto j = to_json(r);
  EXPECT_EQ(record_from_json(j), r);
  // Canonical key order.
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"session_id", "rater_id", "question_id", "category", "content",
                                            "qos", "scores", "timestamp"}));
}

TEST(Serialization, JsonLinesRoundTrip) {
  std::vector<RatingRecord> records{sample_record(), sample_record()};
  records[1].rater_id = "r2";
  records[1].qos = {0.1, 0.75, 7.0};
  std::istringstream in(records_to_jsonl(records) + "\n\n");
  EXPECT_EQ(read_records(in), records);
}

TEST(Serialization, MalformedLineNamesLineNumber) {
  std::istringstream in(to_json(sample_record()).dump() + "\n{not json}\n");
  try {
    read_records(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "bad-record");
    EXPECT_NE(e.detail().find("line 2"), std::string::npos);
  }
}

TEST(Serialization, ProfileGridContentRoundTrip) {
  RaterProfile p{"r9", Language::kZh, "ENFP", 4, 2};
  EXPECT_EQ(profile_from_json(to_json(p)), p);

  const auto g = standard_grid();
  const auto g2 = grid_from_json(to_json(g));
  EXPECT_EQ(g2.qos_points(), g.qos_points());
  EXPECT_EQ(g2.content_configs, g.content_configs);

  const auto fixture = standard_question_set();
  const auto f2 = content_fixture_from_json(to_json(fixture));
  ASSERT_EQ(f2.questions.size(), fixture.questions.size());
  for (std::size_t i = 0; i < f2.questions.size(); ++i) {
    EXPECT_EQ(f2.questions[i].question_id, fixture.questions[i].question_id);
    EXPECT_EQ(f2.questions[i].variants, fixture.questions[i].variants);
  }
}

TEST(Serialization, ContentNeedsAllFourVariants) {
  auto j = to_json(standard_question_set());
  j[0]["variants"].erase(0);
  EXPECT_THROW(content_fixture_from_json(j), Error);
}

TEST(Serialization, MosCsvRoundTripSkipsComments) {
  MosTable t;
  const ConditionId c{"q01", {true, true}, {0.05, 0.25, 3.0}};
  t.entries[{c, Dimension::kOverall}] = {0.125, 5.0, 7};
  t.entries[{c, Dimension::kContent}] = {-1.5, 0.0, 7};
  const auto csv = "# header comment\n" + mos_to_csv(t);
  const auto back = mos_from_csv(csv);
  ASSERT_EQ(back.entries.size(), 2u);
  const auto& e = back.entries.at({c, Dimension::kOverall});
  EXPECT_EQ(e.mos_z, 0.125);
  EXPECT_EQ(e.mos_scaled, 5.0);
  EXPECT_EQ(e.n_valid, 7u);
}

TEST(Serialization, ShortestRoundTripDoubles) {
  for (double v : {0.1, 0.05, 1.0 / 3.0, 3.0, -2.5e-9}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.05), "0.05");
}
