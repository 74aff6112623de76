#include <gtest/gtest.h>

#include "oracles.hpp"
#include "reward_cases.hpp"
#include "vgent/reward.hpp"

namespace {

namespace rw = vgent::reward;

TEST(Reward, HandScoredCases) {
  const auto cases = reward_cases::all();
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c.name);
    const auto r = rw::total_reward(c.text, c.gt, c.space);
    EXPECT_EQ(r.r_tags, c.r_tags);
    EXPECT_EQ(r.r_counts_valid, c.r_counts_valid);
    EXPECT_EQ(r.r_json, c.r_json);
    EXPECT_EQ(r.r_count_match, c.r_count_match);
    EXPECT_EQ(r.r_det, c.r_det);
    EXPECT_EQ(r.r_total, c.r_tags + c.r_counts_valid + c.r_json + c.r_count_match + c.r_det);
  }
}

TEST(Reward, ParserIsTotal) {
  for (const char* text : {"", "<", "<answer>", "</answer><answer>", "<count_q1>99999999999</count_q1>",
                           "<answer>[{\"bbox_2d\":[1,2,3,\"x\"],\"point_2d\":[1,1]}]</answer>",
                           "<answer>[{\"bbox_2d\":[1,2,3,1e999],\"point_2d\":[1,1]}]</answer>"}) {
    const auto p = rw::parse_prediction(text);
    EXPECT_FALSE(p.has_all_tags);
    EXPECT_FALSE(p.answer_items.has_value());
  }
}

TEST(Reward, PerPairEvidenceNamesMatchedIndices) {
  const auto gt = reward_cases::image(100, 100, {reward_cases::centered({10, 10, 30, 30}),
                                                 reward_cases::centered({70, 70, 90, 90})});
  const auto text = reward_cases::response(
      "1", "0", "0", "1", "2",
      R"([{"bbox_2d":[70,70,90,90],"point_2d":[80,80]},{"bbox_2d":[11,10,30,30],"point_2d":[20,20]}])");
  const auto r = rw::total_reward(text, gt);
  ASSERT_EQ(r.per_pair.size(), 2u);
  EXPECT_EQ(r.per_pair[0].gt, 0);
  EXPECT_EQ(r.per_pair[0].pred, 1);
  EXPECT_EQ(r.per_pair[1].gt, 1);
  EXPECT_EQ(r.per_pair[1].pred, 0);
  EXPECT_EQ(r.r_det, 3.0);
}

TEST(Reward, DetectionTermMatchesInjectionOracle) {
  vgent::Rng rng(77);
  for (int t = 0; t < 500; ++t) {
    const auto gt = reward_cases::random_gt(rng, rng.uniform_int(0, 5));
    const auto preds = reward_cases::random_preds(rng, gt, rng.uniform_int(0, 5));
    rw::ParsedPrediction p;
    p.answer_items = preds;
    const auto r = rw::detection_reward(p, {gt, 220, 220});
    EXPECT_NEAR(r.r_det, oracle::brute_force_rdet(gt, preds), 1e-12);
    EXPECT_GE(r.r_det, 0.0);
    EXPECT_LE(r.r_det, 3.0);
  }
}

TEST(Reward, QuadrantCounts) {
  const auto g = reward_cases::image(100, 100, {reward_cases::centered({0, 0, 10, 10}),
                                                reward_cases::centered({90, 0, 100, 10}),
                                                reward_cases::centered({0, 90, 10, 100}),
                                                reward_cases::centered({45, 45, 55, 55})});
  EXPECT_EQ(rw::quadrant_counts(g), (std::array<int, 4>{2, 1, 1, 0}));
}

TEST(Reward, DenormalizeClampsToImage) {
  const auto items = rw::denormalize_boxes({{{-10, 0, 1200, 500}, {1500, -3}}}, 200, 100);
  EXPECT_EQ(items[0].bbox, (vgent::BBox{0, 0, 200, 50}));
  EXPECT_EQ(items[0].point.x, 200);
  EXPECT_EQ(items[0].point.y, 0);
}

}  // namespace
