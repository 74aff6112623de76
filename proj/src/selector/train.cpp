#include "vgent/selector/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <type_traits>

namespace vgent::selector {

namespace {

template <typename Scalar>
struct PreparedCast {
  EncoderStates<Scalar> states;
  Mat<Scalar> proposals;
  SelectorTargets<Scalar> targets;
};

template <typename Scalar>
PreparedCast<Scalar> cast_example(const TrainingExample& e) {
  PreparedCast<Scalar> p;
  p.states = cast_states<Scalar>(e.encoder_states);
  p.proposals = e.proposals.cast<Scalar>();
  p.targets.box_labels = e.targets.box_labels.cast<Scalar>();
  p.targets.mask_labels = e.targets.mask_labels.cast<Scalar>();
  p.targets.mask_weights = e.targets.mask_weights.cast<Scalar>();
  p.targets.gt_count = e.targets.gt_count;
  p.targets.positive_count = e.targets.positive_count;
  return p;
}

template <typename Scalar>
Scalar loss_and_grad(const SelectorModel<Scalar>& model, const PreparedCast<Scalar>& ex,
                     std::type_identity_t<SelectorModel<Scalar>>* grad,
                     std::type_identity_t<LossResult<Scalar>>* parts) {
  ForwardCache<Scalar> cache;
  const auto out = forward(model, ex.states, ex.proposals, cache);
  auto loss = compute_loss(out, ex.targets, model.config);
  if (grad) backward(model, cache, loss.grad, *grad);
  if (parts) *parts = loss;
  return loss.total;
}

double scheduled_rate(const SelectorConfig& cfg, long step, long total_steps) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.learning_rate * static_cast<double>(step + 1) / cfg.warmup_steps;
  const long decay_steps = std::max<long>(1, total_steps - cfg.warmup_steps);
  const double t = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / decay_steps);
  return cfg.learning_rate + (cfg.final_learning_rate - cfg.learning_rate) * t;
}

template <typename Scalar>
class Adam {
 public:
  explicit Adam(const SelectorModel<Scalar>& model) : m_(model.zeros_like()), v_(model.zeros_like()) {}

  void step(SelectorModel<Scalar>& model, SelectorModel<Scalar>& grad, double rate) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    std::vector<Eigen::Index> sizes;
    auto p = model.parameter_pointers(&sizes);
    auto g = grad.parameter_pointers();
    auto m = m_.parameter_pointers();
    auto v = v_.parameter_pointers();
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (Eigen::Index k = 0; k < sizes[i]; ++k) {
        const double gk = g[i][k];
        const double mk = kBeta1 * m[i][k] + (1 - kBeta1) * gk;
        const double vk = kBeta2 * v[i][k] + (1 - kBeta2) * gk * gk;
        m[i][k] = static_cast<Scalar>(mk);
        v[i][k] = static_cast<Scalar>(vk);
        p[i][k] -= static_cast<Scalar>(rate * (mk / c1) / (std::sqrt(vk / c2) + kEps));
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  SelectorModel<Scalar> m_, v_;
  int t_ = 0;
};

template <typename Scalar>
double global_norm(SelectorModel<Scalar>& grad) {
  double sq = 0;
  grad.for_each([&](const std::string&, auto& m) { sq += static_cast<double>(m.squaredNorm()); });
  return std::sqrt(sq);
}

template <typename Scalar>
void scale(SelectorModel<Scalar>& grad, double factor) {
  grad.for_each([&](const std::string&, auto& m) { m *= static_cast<Scalar>(factor); });
}

template <typename Scalar>
TrainResult train_impl(const SimulatedEncoder& encoder, std::span<const TrainingExample> train_set,
                       std::span<const TrainingExample> heldout, const SelectorConfig& cfg,
                       const TrainOptions& options) {
  SelectorModel<Scalar> model = initial_model(encoder, cfg).template cast<Scalar>();
  std::vector<PreparedCast<Scalar>> data;
  data.reserve(train_set.size());
  for (const auto& e : train_set) data.push_back(cast_example<Scalar>(e));

  TrainResult result;
  {
    double sum = 0;
    for (const auto& ex : data) sum += static_cast<double>(loss_and_grad(model, ex, nullptr, nullptr));
    result.log.initial_loss = sum / static_cast<double>(data.size());
  }

  Adam<Scalar> adam(model);
  SelectorModel<Scalar> grad = model.zeros_like();
  Rng rng(cfg.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const long steps_per_epoch = static_cast<long>((data.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = steps_per_epoch * cfg.epochs;
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      grad.set_zero();
      for (std::size_t i = begin; i < end; ++i) {
        LossResult<Scalar> parts;
        const double loss = loss_and_grad(model, data[order[i]], &grad, &parts);
        if (!std::isfinite(loss)) {
          throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(step) + ", scene " + train_set[order[i]].scene_id);
        }
        log.loss += loss;
        log.bce_box += static_cast<double>(parts.bce_box);
        log.bce_mask += static_cast<double>(parts.bce_mask);
        log.l1_counts += static_cast<double>(parts.l1_counts);
      }
      scale(grad, 1.0 / static_cast<double>(end - begin));
      const double norm = global_norm(grad);
      if (!std::isfinite(norm))
        throw TrainingDiverged("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step));
      if (cfg.grad_clip > 0 && norm > cfg.grad_clip) scale(grad, cfg.grad_clip / norm);
      log.learning_rate = scheduled_rate(cfg, step, total_steps);
      if (!options.freeze_decoder) adam.step(model, grad, log.learning_rate);
      ++step;
      if (!model.all_finite())
        throw TrainingDiverged("non-finite parameters after step " + std::to_string(step));
    }
    const double n = static_cast<double>(data.size());
    log.loss /= n;
    log.bce_box /= n;
    log.bce_mask /= n;
    log.l1_counts /= n;
    if (!heldout.empty()) {
      const auto eval = evaluate_selector(model.template cast<double>(), heldout, cfg.presence_threshold);
      log.heldout_f1 = eval.selection_f1;
      log.heldout_count_accuracy = eval.count_accuracy;
    }
    result.log.epochs.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  }
  result.model = model.template cast<double>();
  return result;
}

}  // namespace

TrainingExample prepare_example(const SimulatedEncoder& encoder, const corpus::SyntheticSample& sample,
                                const SelectorConfig& cfg) {
  const auto& scene = sample.scene;
  const auto proposals = sample.proposals.flatten();
  if (proposals.empty()) throw InputError("scene " + scene.scene_id + " has no proposals");
  TrainingExample e;
  e.scene_id = scene.scene_id;
  e.encoder_states = encoder.encode(scene);
  std::vector<BBox> boxes;
  for (const auto& p : proposals) boxes.push_back(p.bbox);
  e.proposals = normalize_proposals<double>(boxes, scene.image_width, scene.image_height);

  const labeling::GroundTruth gt{scene.gt_instances, scene.image_width, scene.image_height};
  e.labels = labeling::assign_labels(proposals, gt);
  const auto n = static_cast<Eigen::Index>(proposals.size());
  e.targets.box_labels.resize(n);
  e.targets.mask_labels.resize(n);
  if (cfg.use_mask_weights) e.targets.mask_weights.resize(n);
  int positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& l = e.labels[i];
    e.targets.box_labels(i) = l.box_positive ? 1.0 : 0.0;
    e.targets.mask_labels(i) = l.mask_positive ? 1.0 : 0.0;
    if (cfg.use_mask_weights) e.targets.mask_weights(i) = l.weight;
    positives += l.mask_positive ? 1 : 0;
  }
  e.targets.gt_count = static_cast<double>(scene.gt_instances.size());
  e.targets.positive_count = positives;
  return e;
}

std::vector<TrainingExample> prepare_examples(const SimulatedEncoder& encoder,
                                              std::span<const corpus::SyntheticSample> samples,
                                              const SelectorConfig& cfg) {
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(prepare_example(encoder, s, cfg));
  return out;
}

SelectorEval evaluate_selector(const SelectorModel<double>& model, std::span<const TrainingExample> examples,
                               double threshold) {
  SelectorEval r;
  long tp = 0, fp = 0, fn = 0, agree = 0, count_ok = 0, positive_ok = 0;
  for (const auto& e : examples) {
    const auto out = forward(model, e.encoder_states, e.proposals);
    const auto chosen = select_from_outputs(out, PresenceHead::kBox, threshold);
    std::vector<bool> picked(static_cast<std::size_t>(e.proposals.rows()), false);
    for (int i : chosen) picked[i] = true;
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const bool label = e.targets.box_labels(static_cast<Eigen::Index>(i)) > 0.5;
      tp += picked[i] && label;
      fp += picked[i] && !label;
      fn += !picked[i] && label;
      agree += picked[i] == label;
    }
    const auto [count, positive] = predicted_counts(out, model.config);
    count_ok += std::abs(count - e.targets.gt_count) <= 0.5;
    positive_ok += std::abs(positive - e.targets.positive_count) <= 0.5;
    r.proposals += static_cast<int>(picked.size());
    ++r.scenes;
  }
  r.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.selection_f1 = r.precision + r.recall == 0 ? 0.0 : 2 * r.precision * r.recall / (r.precision + r.recall);
  if (r.proposals > 0) r.label_agreement = static_cast<double>(agree) / r.proposals;
  if (r.scenes > 0) {
    r.count_accuracy = static_cast<double>(count_ok) / r.scenes;
    r.positive_count_accuracy = static_cast<double>(positive_ok) / r.scenes;
  }
  return r;
}

std::string TrainingLog::to_text() const {
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "initial loss=%.17g\n", initial_loss);
  os << line;
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line,
                  "epoch %d lr=%.17g loss=%.17g bce_box=%.17g bce_mask=%.17g l1_counts=%.17g "
                  "heldout_f1=%.17g heldout_count_acc=%.17g\n",
                  e.epoch, e.learning_rate, e.loss, e.bce_box, e.bce_mask, e.l1_counts, e.heldout_f1,
                  e.heldout_count_accuracy);
    os << line;
  }
  return os.str();
}

std::uint64_t TrainingLog::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

SelectorModel<double> initial_model(const SimulatedEncoder& encoder, const SelectorConfig& cfg) {
  SelectorModel<double> model(cfg);
  Rng rng(cfg.seed);
  if (cfg.init_from_encoder)
    init_from_encoder(model, encoder, rng);
  else
    model.init_random(rng);
  return model;
}

TrainResult train(const SimulatedEncoder& encoder, std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> heldout, const SelectorConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw InputError("training corpus is empty");
  const std::uint64_t before = encoder.checksum();
  TrainResult r = options.single_precision ? train_impl<float>(encoder, train_set, heldout, cfg, options)
                                           : train_impl<double>(encoder, train_set, heldout, cfg, options);
  if (encoder.checksum() != before) throw std::logic_error("encoder parameters changed during training");
  return r;
}

double loss_and_gradient(const SelectorModel<double>& model, const TrainingExample& example,
                         SelectorModel<double>* grad) {
  PreparedCast<double> ex{example.encoder_states, example.proposals, example.targets};
  return loss_and_grad(model, ex, grad, nullptr);
}

GradCheckResult grad_check(const SelectorModel<double>& model, const TrainingExample& example,
                           const GradCheckOptions& options) {
  SelectorModel<double> grad = model.zeros_like();
  loss_and_gradient(model, example, &grad);
  if (options.corrupt) options.corrupt(grad);

  SelectorModel<double> probe = model;
  std::vector<std::string> names;
  std::vector<Eigen::Index> sizes;
  probe.for_each([&](const std::string& name, auto& m) {
    names.push_back(name);
    sizes.push_back(m.size());
  });
  auto params = probe.parameter_pointers();
  auto grads = grad.parameter_pointers();
  std::vector<Eigen::Index> offsets(sizes.size() + 1, 0);
  for (std::size_t i = 0; i < sizes.size(); ++i) offsets[i + 1] = offsets[i] + sizes[i];
  const Eigen::Index total = offsets.back();

  GradCheckResult r;
  Rng rng(options.seed);
  for (int c = 0; c < options.coordinates; ++c) {
    const auto flat = static_cast<Eigen::Index>(rng.next() % static_cast<std::uint64_t>(total));
    const auto block = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const Eigen::Index k = flat - offsets[block];
    double& x = params[block][k];
    const double saved = x;
    x = saved + options.step;
    const double up = loss_and_gradient(probe, example, nullptr);
    x = saved - options.step;
    const double down = loss_and_gradient(probe, example, nullptr);
    x = saved;
    const double numeric = (up - down) / (2 * options.step);
    const double analytic = grads[block][k];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++r.coordinates;
    if (rel >= r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_parameter = names[block] + "[" + std::to_string(k) + "]";
      r.analytic_at_worst = analytic;
      r.numeric_at_worst = numeric;
    }
  }
  return r;
}

std::vector<int> select_proposals(const SelectorModel<double>& model, const TrainingExample& example,
                                  PresenceHead head, double threshold) {
  return select(model, example.encoder_states, example.proposals, head, threshold);
}

}  // namespace vgent::selector
