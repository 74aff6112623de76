#pragma once

#include <cstdint>
#include <vector>

#include "vgent/corpus.hpp"
#include "vgent/selector/config.hpp"
#include "vgent/selector/layers.hpp"

namespace vgent::selector {

// Pre-norm transformer block: x += attn(ln(x)); x += ffn(ln(x)).
template <typename Scalar>
struct EncoderLayer {
  LayerNorm<Scalar> ln_attn;
  Attention<Scalar> attn;
  LayerNorm<Scalar> ln_ffn;
  FeedForward<Scalar> ffn;

  EncoderLayer() = default;
  EncoderLayer(int dim, int heads, int ffn_dim)
      : ln_attn(dim), attn(dim, heads), ln_ffn(dim), ffn(dim, ffn_dim, dim) {}

  Mat<Scalar> forward(const Mat<Scalar>& x) const {
    typename LayerNorm<Scalar>::Cache c1, c2;
    typename Attention<Scalar>::Cache ca;
    typename FeedForward<Scalar>::Cache cf;
    const Mat<Scalar> a = ln_attn.forward(x, c1);
    Mat<Scalar> h = x + attn.forward(a, a, ca);
    return h + ffn.forward(ln_ffn.forward(h, c2), cf);
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    ln_attn.for_each(prefix + ".ln_attn", f);
    attn.for_each(prefix + ".attn", f);
    ln_ffn.for_each(prefix + ".ln_ffn", f);
    ffn.for_each(prefix + ".ffn", f);
  }
};

// Hidden states of layers 0..L over one token sequence; layer 0 is the
// embedding output. Each entry is (sequence_length x hidden_dim).
template <typename Scalar>
using EncoderStates = std::vector<Mat<Scalar>>;

// Stand-in for the frozen multimodal encoder. The token sequence is one
// token per scene object (attributes, box, and the reasoning cue "this
// object satisfies the query") padded to max_objects, followed by the
// query-attribute tokens. Parameters are fixed by encoder_seed.
class SimulatedEncoder {
 public:
  explicit SimulatedEncoder(const SelectorConfig& cfg);

  EncoderStates<double> encode(const corpus::Scene& scene) const;

  // Layer-0 embedding only.
  Mat<double> embed(const corpus::Scene& scene) const;

  const std::vector<EncoderLayer<double>>& layers() const { return layers_; }
  const SelectorConfig& config() const { return cfg_; }

  // FNV-1a over every parameter byte; a frozen encoder never changes it.
  std::uint64_t checksum() const;

 private:
  RowVec<double> box_features(const BBox& b, double width, double height) const;

  SelectorConfig cfg_;
  Mat<double> shape_table_, color_table_, size_table_;  // last row: "unconstrained"
  Mat<double> type_table_;  // object, pad, query-shape, query-color, query-size
  Mat<double> position_;    // 5 x C
  Mat<double> relevance_;   // 1 x C
  std::vector<EncoderLayer<double>> layers_;
};

template <typename Scalar>
EncoderStates<Scalar> cast_states(const EncoderStates<double>& states) {
  EncoderStates<Scalar> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.template cast<Scalar>());
  return out;
}

}  // namespace vgent::selector
