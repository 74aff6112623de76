#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vgent/random.hpp"

// Dense building blocks with hand-written backward passes. Activations are
// row-major in the sense of one token per row: X is (tokens x features).
namespace vgent::selector {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
void fill_normal(Mat<Scalar>& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.normal() * stddev);
}

template <typename Scalar>
struct Linear {
  Mat<Scalar> weight;  // in x out
  Mat<Scalar> bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out) : weight(Mat<Scalar>::Zero(in, out)), bias(Mat<Scalar>::Zero(1, out)) {}

  void init(Rng& rng, double gain = 1.0) {
    fill_normal(weight, rng, gain / std::sqrt(static_cast<double>(weight.rows())));
    bias.setZero();
  }

  Mat<Scalar> forward(const Mat<Scalar>& x) const {
    Mat<Scalar> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  // Accumulates parameter gradients into `grad` and returns dL/dx.
  Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy, Linear& grad) const {
    grad.weight.noalias() += x.transpose() * dy;
    grad.bias += dy.colwise().sum();
    return dy * weight.transpose();
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <typename Scalar>
struct LayerNorm {
  Mat<Scalar> gain;  // 1 x C
  Mat<Scalar> bias;  // 1 x C
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat<Scalar> normalized;
    ColVec<Scalar> inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(int dim) : gain(Mat<Scalar>::Ones(1, dim)), bias(Mat<Scalar>::Zero(1, dim)) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache& cache) const {
    const auto c = static_cast<Scalar>(x.cols());
    const ColVec<Scalar> mean = x.rowwise().sum() / c;
    Mat<Scalar> centered = x.colwise() - mean;
    const ColVec<Scalar> var = centered.array().square().rowwise().sum() / c;
    cache.inv_std = (var.array() + static_cast<Scalar>(kEps)).rsqrt();
    cache.normalized = centered.array().colwise() * cache.inv_std.array();
    Mat<Scalar> y = cache.normalized.array().rowwise() * gain.row(0).array();
    y.rowwise() += bias.row(0);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& cache, LayerNorm& grad) const {
    const auto c = static_cast<Scalar>(dy.cols());
    grad.gain += dy.cwiseProduct(cache.normalized).colwise().sum();
    grad.bias += dy.colwise().sum();
    const Mat<Scalar> dxhat = dy.array().rowwise() * gain.row(0).array();
    const ColVec<Scalar> sum_d = dxhat.rowwise().sum();
    const ColVec<Scalar> sum_dx = dxhat.cwiseProduct(cache.normalized).rowwise().sum();
    Mat<Scalar> dx = (dxhat * c).colwise() - sum_d;
    dx -= (cache.normalized.array().colwise() * sum_dx.array()).matrix();
    return (dx.array().colwise() * (cache.inv_std.array() / c)).matrix();
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".bias", bias);
  }
};

// Exact GELU, x * Phi(x).
template <typename Scalar>
Mat<Scalar> gelu(const Mat<Scalar>& x) {
  return x.unaryExpr([](Scalar v) {
    return static_cast<Scalar>(0.5) * v * (1 + std::erf(v * static_cast<Scalar>(M_SQRT1_2)));
  });
}

template <typename Scalar>
Mat<Scalar> gelu_grad(const Mat<Scalar>& x) {
  return x.unaryExpr([](Scalar v) {
    const Scalar cdf = static_cast<Scalar>(0.5) * (1 + std::erf(v * static_cast<Scalar>(M_SQRT1_2)));
    const Scalar pdf = std::exp(-static_cast<Scalar>(0.5) * v * v) * static_cast<Scalar>(0.3989422804014327);
    return cdf + v * pdf;
  });
}

// Two-layer perceptron with a GELU in between.
template <typename Scalar>
struct FeedForward {
  Linear<Scalar> in, out;

  struct Cache {
    Mat<Scalar> x, pre, hidden;
  };

  FeedForward() = default;
  FeedForward(int dim, int hidden_dim, int out_dim) : in(dim, hidden_dim), out(hidden_dim, out_dim) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache& cache) const {
    cache.x = x;
    cache.pre = in.forward(x);
    cache.hidden = gelu(cache.pre);
    return out.forward(cache.hidden);
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& cache, FeedForward& grad) const {
    const Mat<Scalar> dh = out.backward(cache.hidden, dy, grad.out);
    const Mat<Scalar> dpre = dh.cwiseProduct(gelu_grad(cache.pre));
    return in.backward(cache.x, dpre, grad.in);
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    in.for_each(prefix + ".in", f);
    out.for_each(prefix + ".out", f);
  }
};

// Multi-head scaled dot-product attention. Queries come from `xq`, keys and
// values from `xkv`; self-attention passes the same matrix twice.
template <typename Scalar>
struct Attention {
  Linear<Scalar> q, k, v, o;
  int heads = 1;

  struct Cache {
    Mat<Scalar> xq, xkv, queries, keys, values, mixed;
    std::vector<Mat<Scalar>> weights;  // per head, (n_q x n_kv)
  };

  Attention() = default;
  Attention(int dim, int num_heads) : q(dim, dim), k(dim, dim), v(dim, dim), o(dim, dim), heads(num_heads) {}

  int head_dim() const { return static_cast<int>(q.weight.cols()) / heads; }

  Mat<Scalar> forward(const Mat<Scalar>& xq, const Mat<Scalar>& xkv, Cache& cache) const {
    cache.xq = xq;
    cache.xkv = xkv;
    cache.queries = q.forward(xq);
    cache.keys = k.forward(xkv);
    cache.values = v.forward(xkv);
    const int d = head_dim();
    const Scalar scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(d)));
    cache.mixed.resize(xq.rows(), q.weight.cols());
    cache.weights.resize(heads);
    for (int h = 0; h < heads; ++h) {
      Mat<Scalar> scores = cache.queries.middleCols(h * d, d) * cache.keys.middleCols(h * d, d).transpose() * scale;
      const ColVec<Scalar> row_max = scores.rowwise().maxCoeff();
      scores = (scores.colwise() - row_max).array().exp().matrix();
      const ColVec<Scalar> denom = scores.rowwise().sum();
      scores = scores.array().colwise() / denom.array();
      cache.mixed.middleCols(h * d, d).noalias() = scores * cache.values.middleCols(h * d, d);
      cache.weights[h] = std::move(scores);
    }
    return o.forward(cache.mixed);
  }

  // Returns dL/dxq; dL/dxkv is added to *dxkv when requested.
  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& cache, Attention& grad, Mat<Scalar>* dxkv) const {
    const Mat<Scalar> dmixed = o.backward(cache.mixed, dy, grad.o);
    const int d = head_dim();
    const Scalar scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(d)));
    Mat<Scalar> dq(cache.queries.rows(), cache.queries.cols());
    Mat<Scalar> dk(cache.keys.rows(), cache.keys.cols());
    Mat<Scalar> dv(cache.values.rows(), cache.values.cols());
    for (int h = 0; h < heads; ++h) {
      const Mat<Scalar>& a = cache.weights[h];
      const auto dout = dmixed.middleCols(h * d, d);
      const Mat<Scalar> da = dout * cache.values.middleCols(h * d, d).transpose();
      dv.middleCols(h * d, d).noalias() = a.transpose() * dout;
      const ColVec<Scalar> inner = da.cwiseProduct(a).rowwise().sum();
      const Mat<Scalar> ds = (a.array() * (da.colwise() - inner).array()).matrix() * scale;
      dq.middleCols(h * d, d).noalias() = ds * cache.keys.middleCols(h * d, d);
      dk.middleCols(h * d, d).noalias() = ds.transpose() * cache.queries.middleCols(h * d, d);
    }
    Mat<Scalar> dxq = q.backward(cache.xq, dq, grad.q);
    Mat<Scalar> dkv = k.backward(cache.xkv, dk, grad.k);
    dkv += v.backward(cache.xkv, dv, grad.v);
    if (dxkv) *dxkv += dkv;
    return dxq;
  }

  void init(Rng& rng) {
    q.init(rng);
    k.init(rng);
    v.init(rng);
    o.init(rng, 0.5);
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& f) {
    q.for_each(prefix + ".q", f);
    k.for_each(prefix + ".k", f);
    v.for_each(prefix + ".v", f);
    o.for_each(prefix + ".o", f);
  }
};

}  // namespace vgent::selector
