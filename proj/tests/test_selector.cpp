#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vgent/corpus.hpp"
#include "vgent/selector/checkpoint.hpp"
#include "vgent/selector/latency.hpp"
#include "vgent/selector/train.hpp"

namespace {

namespace sel = vgent::selector;
namespace cp = vgent::corpus;

struct Fixture {
  sel::SelectorConfig cfg;
  sel::SimulatedEncoder encoder{cfg};
  std::vector<sel::TrainingExample> examples;

  explicit Fixture(int n = 6, std::uint64_t seed = 3) {
    cp::SyntheticSpec spec;
    spec.num_scenes = n;
    spec.seed = seed;
    examples = sel::prepare_examples(encoder, cp::generate_synthetic_corpus(spec), cfg);
  }
};

TEST(Encoder, DeterministicShapes) {
  Fixture f(1);
  const auto scene = cp::generate_synthetic_corpus({.num_scenes = 1, .seed = 3})[0].scene;
  const auto a = f.encoder.encode(scene), b = sel::SimulatedEncoder(f.cfg).encode(scene);
  ASSERT_EQ(a.size(), static_cast<std::size_t>(f.cfg.num_layers + 1));
  for (std::size_t l = 0; l < a.size(); ++l) {
    EXPECT_EQ(a[l].rows(), f.cfg.sequence_length());
    EXPECT_EQ(a[l].cols(), f.cfg.hidden_dim);
    EXPECT_EQ(a[l], b[l]);
  }
  auto other = f.cfg;
  other.encoder_seed = 8;
  EXPECT_NE(sel::SimulatedEncoder(other).checksum(), f.encoder.checksum());
}

TEST(Decoder, OutputShapes) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& ex = f.examples[0];
  const auto out = sel::forward(model, ex.encoder_states, ex.proposals);
  EXPECT_EQ(out.box_logits.size(), ex.proposals.rows());
  EXPECT_EQ(out.mask_logits.size(), ex.proposals.rows());
  EXPECT_EQ(out.count_preds.size(), f.cfg.num_learnable_queries);
  EXPECT_TRUE(out.box_logits.allFinite());
}

TEST(Decoder, ProposalPermutationPermutesLogits) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& ex = f.examples[0];
  const auto n = ex.proposals.rows();
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
  perm.setIdentity();
  vgent::Rng rng(2);
  for (Eigen::Index i = n - 1; i > 0; --i) std::swap(perm.indices()[i], perm.indices()[rng.uniform_int(0, int(i))]);
  const sel::Mat<double> shuffled = perm * ex.proposals;
  const auto a = sel::forward(model, ex.encoder_states, ex.proposals);
  const auto b = sel::forward(model, ex.encoder_states, shuffled);
  EXPECT_LT((sel::ColVec<double>(perm * a.box_logits) - b.box_logits).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((sel::ColVec<double>(perm * a.mask_logits) - b.mask_logits).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.count_preds - b.count_preds).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Decoder, DuplicateProposalsGetEqualLogits) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  auto props = f.examples[0].proposals;
  props.row(5) = props.row(2);
  const auto out = sel::forward(model, f.examples[0].encoder_states, props);
  EXPECT_NEAR(out.box_logits(2), out.box_logits(5), 1e-12);
  EXPECT_NEAR(out.mask_logits(2), out.mask_logits(5), 1e-12);
}

TEST(Decoder, RejectsMalformedInputs) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& ex = f.examples[0];
  auto short_states = ex.encoder_states;
  short_states.pop_back();
  EXPECT_THROW(sel::forward(model, short_states, ex.proposals), vgent::InputError);
  EXPECT_THROW(sel::forward(model, ex.encoder_states, sel::Mat<double>(0, 4)), vgent::InputError);
  EXPECT_THROW(sel::forward(model, ex.encoder_states, sel::Mat<double>(sel::Mat<double>::Zero(3, 5))), vgent::InputError);
}

TEST(Init, DecoderCopiesEncoderBlocks) {
  Fixture f(1);
  auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& enc0 = f.encoder.layers()[0];
  EXPECT_EQ(model.layers[0].cross.q.weight, enc0.attn.q.weight);
  EXPECT_EQ(model.layers[0].self.v.weight, enc0.attn.v.weight);
  EXPECT_EQ(model.layers[0].ffn.in.weight, enc0.ffn.in.weight);
  auto other = f.cfg;
  other.seed = 99;
  const auto fresh = sel::initial_model(f.encoder, other);
  EXPECT_NE(model.box_head.weight, fresh.box_head.weight);
  EXPECT_EQ(model.layers[2].cross.k.weight, fresh.layers[2].cross.k.weight);
  other.init_from_encoder = false;
  EXPECT_NE(sel::initial_model(f.encoder, other).layers[0].cross.q.weight, enc0.attn.q.weight);
}

TEST(Loss, ZeroAtPerfectOutputs) {
  sel::SelectorConfig cfg;
  sel::SelectorOutputs<double> out;
  out.box_logits = sel::ColVec<double>::Constant(3, 40);
  out.box_logits(1) = -40;
  out.mask_logits = out.box_logits;
  out.count_preds = sel::ColVec<double>::Constant(10, 0.007);
  out.count_preds.tail(5).setConstant(0.002);
  sel::SelectorTargets<double> t;
  t.box_labels = sel::ColVec<double>::Zero(3);
  t.box_labels << 1, 0, 1;
  t.mask_labels = t.box_labels;
  t.gt_count = 7;
  t.positive_count = 2;
  const auto r = sel::compute_loss(out, t, cfg);
  EXPECT_LT(r.total, 1e-15);
  EXPECT_EQ(r.l1_counts, 0.0);
}

TEST(Loss, DecomposesIntoWeightedTerms) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& ex = f.examples[0];
  const auto out = sel::forward(model, ex.encoder_states, ex.proposals);
  const auto r = sel::compute_loss(out, ex.targets, f.cfg);
  EXPECT_NEAR(r.total, 1.0 * (r.bce_box + r.bce_mask) + 10.0 * r.l1_counts, 1e-12);
  EXPECT_GT(r.bce_box, 0.0);
  // Count targets are normalized: a 7-target scene regresses 0.007.
  sel::SelectorOutputs<double> zero = out;
  zero.count_preds.setZero();
  auto t = ex.targets;
  t.gt_count = 7;
  t.positive_count = 0;
  EXPECT_NEAR(sel::compute_loss(zero, t, f.cfg).l1_counts, 0.007 * 5 / 10, 1e-15);
}

TEST(Loss, MismatchedLabelsThrow) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& ex = f.examples[0];
  auto t = ex.targets;
  t.box_labels.conservativeResize(t.box_labels.size() - 1);
  const auto out = sel::forward(model, ex.encoder_states, ex.proposals);
  EXPECT_THROW(sel::compute_loss(out, t, f.cfg), vgent::InputError);
}

TEST(Targets, PositiveCountUsesMaskLabels) {
  Fixture f(4);
  for (const auto& ex : f.examples) {
    EXPECT_EQ(ex.targets.positive_count, ex.targets.mask_labels.sum());
    EXPECT_EQ(ex.targets.box_labels.size(), ex.proposals.rows());
    EXPECT_GE(ex.proposals.minCoeff(), 0.0);
    EXPECT_LE(ex.proposals.maxCoeff(), 1.0);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  Fixture f(2);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  for (const auto& ex : f.examples) {
    const auto r = sel::grad_check(model, ex, {.coordinates = 200, .seed = 4});
    EXPECT_EQ(r.coordinates, 200);
    EXPECT_LE(r.max_relative_error, 1e-3) << r.worst_parameter;
  }
}

TEST(Gradients, CorruptedGradientIsCaught) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  sel::GradCheckOptions opt;
  opt.coordinates = 200;
  opt.corrupt = [](sel::SelectorModel<double>& g) { g.for_each([](const std::string&, auto& m) { m *= 1.5; }); };
  EXPECT_GT(sel::grad_check(model, f.examples[0], opt).max_relative_error, 0.1);
}

TEST(Select, ThresholdExtremes) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto& ex = f.examples[0];
  EXPECT_EQ(sel::select_proposals(model, ex, sel::PresenceHead::kBox, 0.0).size(),
            static_cast<std::size_t>(ex.proposals.rows()));
  EXPECT_TRUE(sel::select_proposals(model, ex, sel::PresenceHead::kMask, 1.0).empty());
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  Fixture f(1);
  const auto model = sel::initial_model(f.encoder, f.cfg);
  const auto bytes = sel::serialize_checkpoint(model);
  const auto back = sel::deserialize_checkpoint(bytes);
  EXPECT_EQ(sel::serialize_checkpoint(back), bytes);
  EXPECT_EQ(sel::checkpoint_checksum(back), sel::checkpoint_checksum(model));
  const auto path = std::filesystem::temp_directory_path() / "vgent_test.ckpt";
  sel::save_checkpoint(path, model);
  EXPECT_EQ(sel::serialize_checkpoint(sel::load_checkpoint(path)), bytes);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsDamage) {
  Fixture f(1);
  const auto bytes = sel::serialize_checkpoint(sel::initial_model(f.encoder, f.cfg));
  auto bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(sel::deserialize_checkpoint(bad_version), vgent::InputError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(sel::deserialize_checkpoint(flipped), vgent::InputError);
  EXPECT_THROW(sel::deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), vgent::InputError);
  EXPECT_THROW(sel::deserialize_checkpoint("NOTACKPT"), vgent::InputError);
}

TEST(Training, FrozenDecoderKeepsLoss) {
  Fixture f(8);
  auto cfg = f.cfg;
  cfg.epochs = 2;
  sel::TrainOptions opt;
  opt.freeze_decoder = true;
  opt.single_precision = false;
  const auto r = sel::train(f.encoder, f.examples, f.examples, cfg, opt);
  for (const auto& e : r.log.epochs) EXPECT_NEAR(e.loss, r.log.initial_loss, 1e-12 * r.log.initial_loss);
}

TEST(Training, ShortRunReducesLossAndLeavesEncoderAlone) {
  Fixture f(32);
  auto cfg = f.cfg;
  cfg.epochs = 3;
  cfg.warmup_steps = 2;
  const auto before = f.encoder.checksum();
  const auto r = sel::train(f.encoder, f.examples, f.examples, cfg);
  EXPECT_EQ(f.encoder.checksum(), before);
  EXPECT_LT(r.log.epochs.back().loss, r.log.initial_loss);
  const auto again = sel::train(f.encoder, f.examples, f.examples, cfg);
  EXPECT_EQ(again.log.checksum(), r.log.checksum());
  EXPECT_EQ(sel::checkpoint_checksum(again.model), sel::checkpoint_checksum(r.model));
}

TEST(Training, HugeLearningRateDiverges) {
  Fixture f(8);
  auto cfg = f.cfg;
  cfg.epochs = 3;
  cfg.warmup_steps = 0;
  cfg.learning_rate = 1e30;
  EXPECT_THROW(sel::train(f.encoder, f.examples, f.examples, cfg), sel::TrainingDiverged);
}

TEST(Training, EmptySetIsAnError) {
  Fixture f(1);
  EXPECT_THROW(sel::train(f.encoder, {}, f.examples, f.cfg), vgent::InputError);
}

TEST(Latency, RegressionSlope) {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  EXPECT_DOUBLE_EQ(sel::regression_slope(x, y), 2.0);
  sel::AutoregressiveCostModel ar;
  EXPECT_DOUBLE_EQ(ar.cost_ms(20) - ar.cost_ms(19), 10.0);
}

}  // namespace
