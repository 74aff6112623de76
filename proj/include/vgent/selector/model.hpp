#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "vgent/error.hpp"
#include "vgent/selector/encoder.hpp"

namespace vgent::selector {

// Decoder block: cross-attention onto encoder states, self-attention over
// all queries, feed-forward; each pre-normalized with a residual.
template <typename Scalar>
struct DecoderLayer {
  LayerNorm<Scalar> ln_cross;
  Attention<Scalar> cross;
  LayerNorm<Scalar> ln_self;
  Attention<Scalar> self;
  LayerNorm<Scalar> ln_ffn;
  FeedForward<Scalar> ffn;

  struct Cache {
    typename LayerNorm<Scalar>::Cache ln_cross, ln_self, ln_ffn;
    typename Attention<Scalar>::Cache cross, self;
    typename FeedForward<Scalar>::Cache ffn;
  };

  DecoderLayer() = default;
  DecoderLayer(int dim, int heads, int ffn_dim)
      : ln_cross(dim), cross(dim, heads), ln_self(dim), self(dim, heads), ln_ffn(dim), ffn(dim, ffn_dim, dim) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, const Mat<Scalar>& memory, Cache& c) const {
    Mat<Scalar> h = x + cross.forward(ln_cross.forward(x, c.ln_cross), memory, c.cross);
    const Mat<Scalar> s = ln_self.forward(h, c.ln_self);
    h += self.forward(s, s, c.self);
    h += ffn.forward(ln_ffn.forward(h, c.ln_ffn), c.ffn);
    return h;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& c, DecoderLayer& g) const {
    Mat<Scalar> dx = dy;
    dx += ln_ffn.backward(ffn.backward(dy, c.ffn, g.ffn), c.ln_ffn, g.ln_ffn);
    Mat<Scalar> ds = Mat<Scalar>::Zero(dx.rows(), dx.cols());
    ds += self.backward(dx, c.self, g.self, &ds);
    dx += ln_self.backward(ds, c.ln_self, g.ln_self);
    dx += ln_cross.backward(cross.backward(dx, c.cross, g.cross, nullptr), c.ln_cross, g.ln_cross);
    return dx;
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    ln_cross.for_each(prefix + ".ln_cross", f);
    cross.for_each(prefix + ".cross", f);
    ln_self.for_each(prefix + ".ln_self", f);
    self.for_each(prefix + ".self", f);
    ln_ffn.for_each(prefix + ".ln_ffn", f);
    ffn.for_each(prefix + ".ffn", f);
  }
};

template <typename Scalar>
struct SelectorOutputs {
  ColVec<Scalar> box_logits;   // N
  ColVec<Scalar> mask_logits;  // N
  ColVec<Scalar> count_preds;  // num_learnable_queries, normalized by count_scale
};

template <typename Scalar>
struct ForwardCache {
  typename FeedForward<Scalar>::Cache embed;
  std::vector<typename DecoderLayer<Scalar>::Cache> layers;
  std::vector<Mat<Scalar>> inputs;  // residual stream entering each layer
  Mat<Scalar> final;
  Eigen::Index proposals = 0;
};

// The proposal-selection decoder. Queries are the embedded proposals
// followed by the learnable queries; decoder layer i (1-based) reads the
// encoder's layer i-1 states as keys and values.
template <typename Scalar>
struct SelectorModel {
  SelectorConfig config;
  FeedForward<Scalar> proposal_embed;  // 4 -> C -> C
  Mat<Scalar> learnable_queries;       // M x C
  std::vector<DecoderLayer<Scalar>> layers;
  Linear<Scalar> box_head, mask_head, count_head, positive_count_head;

  SelectorModel() = default;

  explicit SelectorModel(const SelectorConfig& cfg) : config(cfg) {
    cfg.validate();
    const int dim = cfg.hidden_dim;
    proposal_embed = FeedForward<Scalar>(4, dim, dim);
    learnable_queries = Mat<Scalar>::Zero(cfg.num_learnable_queries, dim);
    for (int l = 0; l < cfg.num_layers; ++l) layers.emplace_back(dim, cfg.heads, cfg.ffn_dim);
    box_head = mask_head = count_head = positive_count_head = Linear<Scalar>(dim, 1);
  }

  // Fresh random parameters everywhere.
  void init_random(Rng& rng) {
    proposal_embed.in.init(rng);
    proposal_embed.out.init(rng);
    fill_normal(learnable_queries, rng, 1.0);
    for (auto& l : layers) {
      l.cross.init(rng);
      l.self.init(rng);
      l.ffn.in.init(rng);
      l.ffn.out.init(rng, 0.5);
    }
    init_heads(rng);
  }

  void init_heads(Rng& rng) {
    box_head.init(rng, 0.1);
    mask_head.init(rng, 0.1);
    count_head.init(rng, 0.01);
    positive_count_head.init(rng, 0.01);
  }

  // Every parameter in a fixed order with a stable name.
  template <typename F>
  void for_each(F&& f) {
    proposal_embed.for_each("proposal_embed", f);
    f(std::string("learnable_queries"), learnable_queries);
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].for_each("decoder." + std::to_string(l), f);
    box_head.for_each("box_head", f);
    mask_head.for_each("mask_head", f);
    count_head.for_each("count_head", f);
    positive_count_head.for_each("positive_count_head", f);
  }

  std::vector<Scalar*> parameter_pointers(std::vector<Eigen::Index>* sizes = nullptr) {
    std::vector<Scalar*> out;
    for_each([&](const std::string&, auto& m) {
      out.push_back(m.data());
      if (sizes) sizes->push_back(m.size());
    });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for_each([&](const std::string&, auto& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  void set_zero() {
    for_each([](const std::string&, auto& m) { m.setZero(); });
  }

  SelectorModel zeros_like() const {
    SelectorModel g = *this;
    g.set_zero();
    return g;
  }

  bool all_finite() {
    bool ok = true;
    for_each([&](const std::string&, auto& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  template <typename Other>
  SelectorModel<Other> cast() const {
    SelectorModel<Other> out(config);
    auto src = const_cast<SelectorModel&>(*this).parameter_pointers();
    std::vector<Eigen::Index> sizes;
    auto dst = out.parameter_pointers(&sizes);
    for (std::size_t i = 0; i < dst.size(); ++i)
      for (Eigen::Index k = 0; k < sizes[i]; ++k) dst[i][k] = static_cast<Other>(src[i][k]);
    return out;
  }
};

// Copies decoder layer i's cross-attention and feed-forward blocks from
// encoder layer i, then seeds the self-attention from the fresh
// cross-attention. Embeddings, learnable queries and heads stay random.
template <typename Scalar>
void init_from_encoder(SelectorModel<Scalar>& model, const SimulatedEncoder& encoder, Rng& rng) {
  const auto& enc_layers = encoder.layers();
  if (enc_layers.size() != model.layers.size()) throw InputError("encoder/decoder layer count mismatch");
  if (encoder.config().hidden_dim != model.config.hidden_dim || encoder.config().ffn_dim != model.config.ffn_dim ||
      encoder.config().heads != model.config.heads)
    throw InputError("encoder/decoder shape mismatch");
  model.init_random(rng);
  for (std::size_t l = 0; l < enc_layers.size(); ++l) {
    auto& dec = model.layers[l];
    auto src = enc_layers[l];
    std::vector<Mat<double>*> from;
    src.attn.for_each("", [&](const std::string&, auto& m) { from.push_back(&m); });
    src.ln_attn.for_each("", [&](const std::string&, auto& m) { from.push_back(&m); });
    src.ffn.for_each("", [&](const std::string&, auto& m) { from.push_back(&m); });
    src.ln_ffn.for_each("", [&](const std::string&, auto& m) { from.push_back(&m); });
    std::size_t k = 0;
    auto copy = [&](const std::string&, auto& m) { m = from[k++]->template cast<Scalar>(); };
    dec.cross.for_each("", copy);
    dec.ln_cross.for_each("", copy);
    dec.ffn.for_each("", copy);
    dec.ln_ffn.for_each("", copy);
    dec.self = dec.cross;
    dec.ln_self = dec.ln_cross;
  }
}

template <typename Scalar>
Mat<Scalar> normalize_proposals(std::span<const BBox> boxes, double width, double height) {
  Mat<Scalar> p(static_cast<Eigen::Index>(boxes.size()), 4);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    p(i, 0) = static_cast<Scalar>(boxes[i].x1 / width);
    p(i, 1) = static_cast<Scalar>(boxes[i].y1 / height);
    p(i, 2) = static_cast<Scalar>(boxes[i].x2 / width);
    p(i, 3) = static_cast<Scalar>(boxes[i].y2 / height);
  }
  return p;
}

template <typename Scalar>
SelectorOutputs<Scalar> forward(const SelectorModel<Scalar>& model, const EncoderStates<Scalar>& enc,
                                const Mat<Scalar>& proposals, ForwardCache<Scalar>& cache) {
  const auto& cfg = model.config;
  if (static_cast<int>(enc.size()) != cfg.num_layers + 1)
    throw InputError("encoder states must hold num_layers + 1 layers");
  for (const auto& s : enc)
    if (s.cols() != cfg.hidden_dim) throw InputError("encoder state width does not match hidden_dim");
  if (proposals.cols() != 4 || proposals.rows() < 1) throw InputError("proposals must be N x 4 with N >= 1");

  const Eigen::Index n = proposals.rows();
  const Eigen::Index m = cfg.num_learnable_queries;
  Mat<Scalar> x(n + m, cfg.hidden_dim);
  x.topRows(n) = model.proposal_embed.forward(proposals, cache.embed);
  x.bottomRows(m) = model.learnable_queries;

  cache.proposals = n;
  cache.layers.resize(model.layers.size());
  cache.inputs.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    cache.inputs[l] = x;
    x = model.layers[l].forward(x, enc[l], cache.layers[l]);
  }
  cache.final = x;

  const int g = cfg.group_size();
  SelectorOutputs<Scalar> out;
  out.box_logits = model.box_head.forward(x.topRows(n)).col(0);
  out.mask_logits = model.mask_head.forward(x.topRows(n)).col(0);
  out.count_preds.resize(m);
  out.count_preds.head(g) = model.count_head.forward(x.middleRows(n, g)).col(0);
  out.count_preds.tail(g) = model.positive_count_head.forward(x.middleRows(n + g, g)).col(0);
  return out;
}

template <typename Scalar>
SelectorOutputs<Scalar> forward(const SelectorModel<Scalar>& model, const EncoderStates<Scalar>& enc,
                                const Mat<Scalar>& proposals) {
  ForwardCache<Scalar> cache;
  return forward(model, enc, proposals, cache);
}

// Back-propagates output gradients into `grad` (accumulating).
template <typename Scalar>
void backward(const SelectorModel<Scalar>& model, const ForwardCache<Scalar>& cache,
              const SelectorOutputs<Scalar>& d_out, SelectorModel<Scalar>& grad) {
  const auto& cfg = model.config;
  const Eigen::Index n = cache.proposals;
  const int g = cfg.group_size();
  const Mat<Scalar>& x = cache.final;

  Mat<Scalar> dx = Mat<Scalar>::Zero(x.rows(), x.cols());
  const Mat<Scalar> xp = x.topRows(n);
  dx.topRows(n) += model.box_head.backward(xp, Mat<Scalar>(d_out.box_logits), grad.box_head);
  dx.topRows(n) += model.mask_head.backward(xp, Mat<Scalar>(d_out.mask_logits), grad.mask_head);
  dx.middleRows(n, g) += model.count_head.backward(Mat<Scalar>(x.middleRows(n, g)),
                                                   Mat<Scalar>(d_out.count_preds.head(g)), grad.count_head);
  dx.middleRows(n + g, g) += model.positive_count_head.backward(
      Mat<Scalar>(x.middleRows(n + g, g)), Mat<Scalar>(d_out.count_preds.tail(g)), grad.positive_count_head);

  for (std::size_t l = model.layers.size(); l-- > 0;)
    dx = model.layers[l].backward(dx, cache.layers[l], grad.layers[l]);

  grad.learnable_queries += dx.bottomRows(cfg.num_learnable_queries);
  model.proposal_embed.backward(Mat<Scalar>(dx.topRows(n)), cache.embed, grad.proposal_embed);
}

// Per-proposal and global supervision for one scene.
template <typename Scalar>
struct SelectorTargets {
  ColVec<Scalar> box_labels;    // 0/1 per proposal
  ColVec<Scalar> mask_labels;   // 0/1 per proposal
  ColVec<Scalar> mask_weights;  // empty => all ones
  double gt_count = 0;
  double positive_count = 0;
};

template <typename Scalar>
struct LossResult {
  Scalar total = 0;
  Scalar bce_box = 0;
  Scalar bce_mask = 0;
  Scalar l1_counts = 0;
  SelectorOutputs<Scalar> grad;  // dL/d(outputs)
};

inline constexpr double kLogitClamp = 40.0;

// total = bce_weight * (BCE_box + BCE_mask) + l1_weight * L1_counts. BCE is
// averaged over proposals, L1 over learnable queries; the first half of the
// queries targets gt_count / count_scale, the second half
// positive_count / count_scale.
template <typename Scalar>
LossResult<Scalar> compute_loss(const SelectorOutputs<Scalar>& out, const SelectorTargets<Scalar>& t,
                                const SelectorConfig& cfg) {
  const Eigen::Index n = out.box_logits.size();
  if (t.box_labels.size() != n || t.mask_labels.size() != n ||
      (t.mask_weights.size() != 0 && t.mask_weights.size() != n))
    throw InputError("label length does not match proposal count");

  LossResult<Scalar> r;
  r.grad.box_logits.resize(n);
  r.grad.mask_logits.resize(n);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  const Scalar clamp = static_cast<Scalar>(kLogitClamp);

  auto bce = [&](const ColVec<Scalar>& logits, const ColVec<Scalar>& labels, const ColVec<Scalar>* weights,
                 ColVec<Scalar>& grad) {
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar raw = logits(i);
      const Scalar z = std::clamp(raw, -clamp, clamp);
      const Scalar y = labels(i);
      const Scalar w = weights ? (*weights)(i) : Scalar(1);
      const Scalar loss = std::max(z, Scalar(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
      const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-z));
      sum += w * loss;
      const bool inside = raw > -clamp && raw < clamp;
      grad(i) = inside ? w * (sig - y) * inv_n * static_cast<Scalar>(cfg.bce_weight) : Scalar(0);
    }
    return sum * inv_n;
  };
  r.bce_box = bce(out.box_logits, t.box_labels, nullptr, r.grad.box_logits);
  r.bce_mask = bce(out.mask_logits, t.mask_labels, t.mask_weights.size() ? &t.mask_weights : nullptr,
                   r.grad.mask_logits);

  const Eigen::Index m = out.count_preds.size();
  const int g = cfg.group_size();
  r.grad.count_preds.resize(m);
  Scalar l1 = 0;
  for (Eigen::Index q = 0; q < m; ++q) {
    const double target = (q < g ? t.gt_count : t.positive_count) / cfg.count_scale;
    const Scalar diff = out.count_preds(q) - static_cast<Scalar>(target);
    l1 += std::abs(diff);
    const Scalar sign = diff > 0 ? Scalar(1) : (diff < 0 ? Scalar(-1) : Scalar(0));
    r.grad.count_preds(q) = sign * static_cast<Scalar>(cfg.l1_weight) / static_cast<Scalar>(m);
  }
  r.l1_counts = l1 / static_cast<Scalar>(m);
  r.total = static_cast<Scalar>(cfg.bce_weight) * (r.bce_box + r.bce_mask) +
            static_cast<Scalar>(cfg.l1_weight) * r.l1_counts;
  return r;
}

enum class PresenceHead { kBox, kMask };

// Indices whose presence probability exceeds the threshold; one forward pass.
template <typename Scalar>
std::vector<int> select_from_outputs(const SelectorOutputs<Scalar>& out, PresenceHead head, double threshold) {
  const ColVec<Scalar>& logits = head == PresenceHead::kBox ? out.box_logits : out.mask_logits;
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits(i))));
    if (p > threshold) keep.push_back(static_cast<int>(i));
  }
  return keep;
}

template <typename Scalar>
std::vector<int> select(const SelectorModel<Scalar>& model, const EncoderStates<Scalar>& enc,
                        const Mat<Scalar>& proposals, PresenceHead head, double threshold) {
  return select_from_outputs(forward(model, enc, proposals), head, threshold);
}

// Count readout: the mean of each query group, rescaled to object counts.
template <typename Scalar>
std::pair<double, double> predicted_counts(const SelectorOutputs<Scalar>& out, const SelectorConfig& cfg) {
  const int g = cfg.group_size();
  return {static_cast<double>(out.count_preds.head(g).mean()) * cfg.count_scale,
          static_cast<double>(out.count_preds.tail(g).mean()) * cfg.count_scale};
}

}  // namespace vgent::selector
