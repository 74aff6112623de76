#pragma once

// Slow, obviously-correct reference implementations used to check the
// library. Nothing here shares code with the code under test beyond plain
// data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "vgent/corpus.hpp"
#include "vgent/geometry.hpp"
#include "vgent/instance.hpp"
#include "vgent/random.hpp"
#include "vgent/reward.hpp"

namespace oracle {

using Dense = std::vector<std::uint8_t>;

// ---- assignment -------------------------------------------------------------

struct BruteMatching {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> col_of_row;  // -1 for unmatched rows
};

// Every permutation of the padded square problem; ties resolve to the
// lexicographically smallest row->column vector with "unmatched" ranked last.
inline BruteMatching brute_force_assignment(const Eigen::MatrixXd& c) {
  const int rows = static_cast<int>(c.rows()), cols = static_cast<int>(c.cols());
  BruteMatching best;
  if (rows == 0 || cols == 0) {
    best.cost = 0;
    best.col_of_row.assign(rows, -1);
    return best;
  }
  const int n = std::max(rows, cols);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_key;
  do {
    double cost = 0;
    std::vector<int> key(rows);
    for (int i = 0; i < rows; ++i) {
      if (perm[i] < cols) {
        cost += c(i, perm[i]);
        key[i] = perm[i];
      } else {
        key[i] = cols;
      }
    }
    if (cost < best.cost || (cost == best.cost && key < best_key)) {
      best.cost = cost;
      best_key = key;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.col_of_row = best_key;
  for (auto& k : best.col_of_row)
    if (k == cols) k = -1;
  return best;
}

// ---- rasters ------------------------------------------------------------------

inline Dense raster_box(int w, int h, const vgent::BBox& b) {
  Dense d(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      if (cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2) d[static_cast<std::size_t>(y) * w + x] = 1;
    }
  return d;
}

inline std::uint64_t count(const Dense& d) { return static_cast<std::uint64_t>(std::count(d.begin(), d.end(), 1)); }

inline Dense dense_or(const Dense& a, const Dense& b) {
  Dense o(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] | b[i];
  return o;
}

inline std::uint64_t and_count(const Dense& a, const Dense& b) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] & b[i];
  return n;
}

inline Dense random_dense(vgent::Rng& rng, int w, int h, double density) {
  Dense d(static_cast<std::size_t>(w) * h);
  // Blocky noise so runs have realistic lengths.
  for (auto& v : d) v = rng.bernoulli(density) ? 1 : 0;
  for (int pass = 0; pass < 2; ++pass)
    for (std::size_t i = 1; i < d.size(); ++i)
      if (rng.bernoulli(0.6)) d[i] = d[i - 1];
  return d;
}

inline Dense pixel_region(const vgent::Instance& inst, int w, int h) {
  return inst.mask ? inst.mask->to_dense() : raster_box(w, h, inst.bbox);
}

// ---- boxes -------------------------------------------------------------------

inline double box_iou(const vgent::BBox& a, const vgent::BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// ---- reward detection term ------------------------------------------------------

inline int indicator_sum(const vgent::reward::GtInstance& g, const vgent::reward::AnswerItem& p) {
  const double l1 = std::abs(g.bbox.x1 - p.bbox.x1) + std::abs(g.bbox.y1 - p.bbox.y1) +
                    std::abs(g.bbox.x2 - p.bbox.x2) + std::abs(g.bbox.y2 - p.bbox.y2);
  const double dist = std::sqrt((g.centroid.x - p.point.x) * (g.centroid.x - p.point.x) +
                                (g.centroid.y - p.point.y) * (g.centroid.y - p.point.y));
  return (box_iou(g.bbox, p.bbox) > 0.5) + (l1 < 10.0) + (dist < 30.0);
}

// Maximum indicator total over every injection of the smaller side into the
// larger one, divided by max(1, max(|G|, |P|)); both sides empty score 3.
inline double brute_force_rdet(const std::vector<vgent::reward::GtInstance>& gt,
                               const std::vector<vgent::reward::AnswerItem>& pred) {
  if (gt.empty() && pred.empty()) return 3.0;
  const std::size_t small = std::min(gt.size(), pred.size());
  const std::size_t large = std::max(gt.size(), pred.size());
  const bool gt_small = gt.size() <= pred.size();
  int best = 0;
  std::vector<int> pick(large);
  std::iota(pick.begin(), pick.end(), 0);
  do {
    int total = 0;
    for (std::size_t i = 0; i < small; ++i)
      total += gt_small ? indicator_sum(gt[i], pred[pick[i]]) : indicator_sum(gt[pick[i]], pred[i]);
    best = std::max(best, total);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best / static_cast<double>(std::max<std::size_t>(1, large));
}

// ---- evaluation metrics ------------------------------------------------------------

struct MetricValues {
  double f1 = 0, precision = 0, recall = 0, macro_f1 = 0, giou = 0, ciou = 0;
  bool has_n_acc = false;
  double n_acc = 0;
};

struct SampleCase {
  int width = 0, height = 0;
  std::vector<vgent::Instance> predictions, ground_truth;
};

inline MetricValues brute_force_metrics(const std::vector<SampleCase>& samples) {
  long tp = 0, fp = 0, fn = 0, no_target = 0, silent = 0;
  double macro = 0, sum_iou = 0, inter_total = 0, union_total = 0;
  auto prf = [](long t, long p, long n, double& pr, double& rc) {
    pr = t + p ? static_cast<double>(t) / static_cast<double>(t + p) : 1.0;
    rc = t + n ? static_cast<double>(t) / static_cast<double>(t + n) : 1.0;
    return pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
  };
  for (const auto& s : samples) {
    const int g = static_cast<int>(s.ground_truth.size()), p = static_cast<int>(s.predictions.size());
    Eigen::MatrixXd cost(g, p), overlap(g, p);
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < p; ++j) {
        overlap(i, j) = box_iou(s.ground_truth[i].bbox, s.predictions[j].bbox);
        cost(i, j) = 1.0 - overlap(i, j);
      }
    const auto m = brute_force_assignment(cost);
    long t = 0;
    for (int i = 0; i < g; ++i)
      if (m.col_of_row[i] >= 0 && overlap(i, m.col_of_row[i]) > 0.5) ++t;
    tp += t;
    fp += p - t;
    fn += g - t;
    double pr, rc;
    macro += prf(t, p - t, g - t, pr, rc);

    Dense pred(static_cast<std::size_t>(s.width) * s.height, 0), gt = pred;
    for (const auto& inst : s.predictions) pred = dense_or(pred, pixel_region(inst, s.width, s.height));
    for (const auto& inst : s.ground_truth) gt = dense_or(gt, pixel_region(inst, s.width, s.height));
    const double inter = static_cast<double>(and_count(pred, gt));
    const double uni = static_cast<double>(count(dense_or(pred, gt)));
    inter_total += inter;
    union_total += uni;
    if (count(gt) == 0) {
      sum_iou += count(pred) == 0 ? 1.0 : 0.0;
      ++no_target;
      silent += p == 0;
    } else {
      sum_iou += inter / uni;
    }
  }
  MetricValues v;
  v.f1 = prf(tp, fp, fn, v.precision, v.recall);
  v.macro_f1 = macro / static_cast<double>(samples.size());
  v.giou = sum_iou / static_cast<double>(samples.size());
  v.ciou = union_total == 0 ? 1.0 : inter_total / union_total;
  v.has_n_acc = no_target > 0;
  if (no_target) v.n_acc = static_cast<double>(silent) / static_cast<double>(no_target);
  return v;
}

}  // namespace oracle
