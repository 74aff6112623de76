#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vgent/corpus.hpp"
#include "vgent/labeling.hpp"
#include "vgent/selector/model.hpp"

namespace vgent::selector {

// One scene prepared for the selector: frozen encoder states, normalized
// proposals, and the supervision derived from the ground truth.
struct TrainingExample {
  std::string scene_id;
  EncoderStates<double> encoder_states;
  Mat<double> proposals;  // N x 4 in [0, 1]
  SelectorTargets<double> targets;
  labeling::LabelAssignment labels;
};

TrainingExample prepare_example(const SimulatedEncoder& encoder, const corpus::SyntheticSample& sample,
                                const SelectorConfig& cfg);

std::vector<TrainingExample> prepare_examples(const SimulatedEncoder& encoder,
                                              std::span<const corpus::SyntheticSample> samples,
                                              const SelectorConfig& cfg);

// Held-out quality of a selector. Selection scores are per proposal: the
// box head's decision against the box-aware label.
struct SelectorEval {
  int scenes = 0;
  int proposals = 0;
  double selection_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double label_agreement = 0.0;  // fraction of proposals whose decision equals the label
  double count_accuracy = 0.0;   // |mean(count group) * scale - gt_count| <= 0.5
  double positive_count_accuracy = 0.0;
};

SelectorEval evaluate_selector(const SelectorModel<double>& model, std::span<const TrainingExample> examples,
                               double threshold);

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;  // at the last step of the epoch
  double loss = 0.0;
  double bce_box = 0.0;
  double bce_mask = 0.0;
  double l1_counts = 0.0;
  double heldout_f1 = 0.0;
  double heldout_count_accuracy = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  double initial_loss = 0.0;  // mean training loss before any update

  // One line per epoch, values printed with round-trip precision.
  std::string to_text() const;
  std::uint64_t checksum() const;
};

struct TrainOptions {
  // Skip every parameter update; the loss must then stay where it started.
  bool freeze_decoder = false;
  // Train in single precision; evaluation and the returned model are double.
  bool single_precision = true;
  // Called after each epoch.
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  SelectorModel<double> model;
  TrainingLog log;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adam with linear warmup then linear decay, global-norm clipping and
// seeded shuffling. The encoder is never touched.
TrainResult train(const SimulatedEncoder& encoder, std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> heldout, const SelectorConfig& cfg,
                  const TrainOptions& options = {});

// Fresh model per the config's init flag.
SelectorModel<double> initial_model(const SimulatedEncoder& encoder, const SelectorConfig& cfg);

// Loss and parameter gradients at one example.
double loss_and_gradient(const SelectorModel<double>& model, const TrainingExample& example,
                         SelectorModel<double>* grad);

struct GradCheckResult {
  double max_relative_error = 0.0;
  int coordinates = 0;
  std::string worst_parameter;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckOptions {
  int coordinates = 256;
  double step = 1e-5;
  double floor = 1e-6;  // relative error denominator never drops below this
  std::uint64_t seed = 0;
  // Applied to the analytic gradient before comparison; tests use it as a
  // negative control.
  std::function<void(SelectorModel<double>&)> corrupt;
};

// Central differences on a random parameter subset against back-propagation.
GradCheckResult grad_check(const SelectorModel<double>& model, const TrainingExample& example,
                           const GradCheckOptions& options = {});

// Box-head (or mask-head) selection on one scene.
std::vector<int> select_proposals(const SelectorModel<double>& model, const TrainingExample& example,
                                  PresenceHead head, double threshold);

}  // namespace vgent::selector
