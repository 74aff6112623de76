#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vgent/corpus.hpp"
#include "vgent/labeling.hpp"

namespace {

namespace lb = vgent::labeling;
using vgent::BBox;
using vgent::Instance;
using vgent::Proposal;

lb::GroundTruth truth(const vgent::corpus::Scene& s) { return {s.gt_instances, s.image_width, s.image_height}; }

TEST(Labeling, DecorationStringSplitsTheLabels) {
  const auto fx = vgent::corpus::decoration_fixture();
  const auto props = fx.proposals.flatten();
  const auto labels = lb::assign_labels(props, truth(fx.scene));
  ASSERT_EQ(labels.size(), 3u);
  // Blob: box-positive and mask-positive.
  EXPECT_TRUE(labels[0].box_positive);
  EXPECT_TRUE(labels[0].mask_positive);
  // String: the thin sliver is inside the annotated mask but its box is tiny.
  EXPECT_FALSE(labels[1].box_positive);
  EXPECT_TRUE(labels[1].mask_positive);
  EXPECT_DOUBLE_EQ(labels[1].ioa, 1.0);
  EXPECT_DOUBLE_EQ(labels[1].weight, 2.0);
  // Distractor: neither.
  EXPECT_FALSE(labels[2].box_positive);
  EXPECT_FALSE(labels[2].mask_positive);
}

TEST(Labeling, ThresholdsAreStrict) {
  const std::vector<Instance> gt{{{0, 0, 10, 10}, std::nullopt}};
  // IoU exactly 0.6: 60 / 100.
  const std::vector<Proposal> props{{{0, 0, 6, 10}, std::nullopt, "d", std::nullopt},
                                    {{0, 0, 7, 10}, std::nullopt, "d", std::nullopt}};
  const auto box = lb::assign_box_labels(props, std::vector<BBox>{gt[0].bbox});
  EXPECT_FALSE(box[0].positive);
  EXPECT_TRUE(box[1].positive);
  // IoA exactly 0.6: proposal [4,0,14,10] has 60 of 100 pixels inside.
  const std::vector<Proposal> p2{{{4, 0, 14, 10}, std::nullopt, "d", std::nullopt}};
  const auto m = lb::assign_mask_labels(p2, {gt, 20, 20});
  EXPECT_DOUBLE_EQ(m[0].ioa, 0.6);
  EXPECT_FALSE(m[0].positive);
}

TEST(Labeling, ThresholdAboveOneRejectsEverything) {
  const auto fx = vgent::corpus::decoration_fixture();
  const auto labels = lb::assign_labels(fx.proposals.flatten(), truth(fx.scene), 1.01, 1.01);
  for (const auto& l : labels) {
    EXPECT_FALSE(l.box_positive);
    EXPECT_FALSE(l.mask_positive);
  }
}

TEST(Labeling, MaskIoaAgreesWithPixelOracle) {
  vgent::corpus::SyntheticSpec spec;
  spec.num_scenes = 20;
  spec.seed = 4;
  for (const auto& s : vgent::corpus::generate_synthetic_corpus(spec)) {
    const auto props = s.proposals.flatten();
    const auto labels = lb::assign_mask_labels(props, truth(s.scene));
    const int w = s.scene.image_width, h = s.scene.image_height;
    oracle::Dense u(static_cast<std::size_t>(w) * h, 0);
    for (const auto& g : s.scene.gt_instances) u = oracle::dense_or(u, oracle::pixel_region(g, w, h));
    for (std::size_t i = 0; i < props.size(); ++i) {
      const auto d = props[i].mask->to_dense();
      const auto n = oracle::count(d);
      const double expect = n ? double(oracle::and_count(d, u)) / double(n) : 0.0;
      EXPECT_DOUBLE_EQ(labels[i].ioa, expect);
      EXPECT_EQ(labels[i].degenerate, n == 0);
    }
  }
}

TEST(Labeling, BoxIoaWhenNoMasksExist) {
  const std::vector<Instance> gt{{{0, 0, 10, 10}, std::nullopt}, {{5, 0, 15, 10}, std::nullopt}};
  const std::vector<Proposal> props{{{0, 0, 20, 10}, std::nullopt, "d", std::nullopt}};
  const auto m = lb::assign_mask_labels(props, {gt, 30, 30});
  EXPECT_DOUBLE_EQ(m[0].ioa, 150.0 / 200.0);
  EXPECT_TRUE(m[0].positive);
}

TEST(Labeling, MaskDimensionMismatchIsAnError) {
  const std::vector<Instance> gt{{{0, 0, 4, 4}, vgent::BitMask(8, 8)}};
  const std::vector<Proposal> props{{{0, 0, 4, 4}, vgent::BitMask(9, 8), "d", std::nullopt}};
  EXPECT_THROW(lb::assign_mask_labels(props, {gt, 8, 8}), vgent::InputError);
}

TEST(OracleSelect, F1ModeKeepsOneProposalPerTarget) {
  const std::vector<Instance> gt{{{0, 0, 10, 10}, std::nullopt}, {{20, 20, 30, 30}, std::nullopt}};
  const std::vector<Proposal> props{{{0, 0, 10, 10}, std::nullopt, "a", std::nullopt},
                                    {{0, 0, 10, 11}, std::nullopt, "b", std::nullopt},
                                    {{40, 40, 50, 50}, std::nullopt, "a", std::nullopt},
                                    {{21, 20, 30, 30}, std::nullopt, "b", std::nullopt}};
  EXPECT_EQ(lb::oracle_select(props, {gt, 60, 60}, lb::OracleMode::kF1), (std::vector<int>{0, 3}));
  // Mask mode keeps every proposal that lies inside the targets.
  EXPECT_EQ(lb::oracle_select(props, {gt, 60, 60}, lb::OracleMode::kMask), (std::vector<int>{0, 1, 3}));
}

TEST(OracleSelect, DecorationStringOnlyInMaskMode) {
  const auto fx = vgent::corpus::decoration_fixture();
  const auto props = fx.proposals.flatten();
  EXPECT_EQ(lb::oracle_select(props, truth(fx.scene), lb::OracleMode::kF1), (std::vector<int>{0}));
  EXPECT_EQ(lb::oracle_select(props, truth(fx.scene), lb::OracleMode::kMask), (std::vector<int>{0, 1}));
}

}  // namespace
