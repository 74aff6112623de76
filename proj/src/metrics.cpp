#include "vgent/metrics.hpp"

#include "vgent/assignment.hpp"

namespace vgent::metrics {

namespace {

BitMask region_union(std::span<const Instance> instances, int width, int height,
                     const EvalOptions& opts) {
  std::vector<BitMask> regions;
  for (const auto& inst : instances) {
    if (inst.mask) {
      if (inst.mask->width() != width || inst.mask->height() != height)
        throw InputError("instance mask does not match scene dimensions");
      regions.push_back(*inst.mask);
    } else if (opts.box_raster_fallback) {
      regions.push_back(BitMask::from_box(width, height, inst.bbox));
    } else {
      throw InputError("instance has no mask and box fallback is disabled");
    }
  }
  if (regions.empty()) return BitMask(width, height);
  return mask_union(regions);
}

std::vector<BBox> boxes_of(std::span<const Instance> instances) {
  std::vector<BBox> out;
  out.reserve(instances.size());
  for (const auto& i : instances) out.push_back(i.bbox);
  return out;
}

}  // namespace

Counts sample_f1(std::span<const BBox> predictions, std::span<const BBox> ground_truth) {
  const auto n_gt = static_cast<Eigen::Index>(ground_truth.size());
  const auto n_pred = static_cast<Eigen::Index>(predictions.size());
  Eigen::MatrixXd overlap(n_gt, n_pred);
  for (Eigen::Index i = 0; i < n_gt; ++i)
    for (Eigen::Index j = 0; j < n_pred; ++j) overlap(i, j) = iou(ground_truth[i], predictions[j]);
  const Matching m = solve(1.0 - overlap.array());
  Counts c;
  for (const auto& [i, j] : m.pairs)
    if (overlap(i, j) > kMatchIouThreshold) ++c.tp;
  c.fp = static_cast<int>(n_pred) - c.tp;
  c.fn = static_cast<int>(n_gt) - c.tp;
  return c;
}

Counts sample_f1(const SampleEval& s) {
  const auto p = boxes_of(s.predictions);
  const auto g = boxes_of(s.ground_truth);
  return sample_f1(p, g);
}

double precision_of(const Counts& c) {
  return c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 1.0;
}

double recall_of(const Counts& c) {
  return c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 1.0;
}

double f1_of(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

F1Summary dataset_f1(std::span<const SampleEval> samples) {
  if (samples.empty()) throw InputError("dataset_f1 needs at least one sample");
  Counts total;
  double macro = 0.0;
  for (const auto& s : samples) {
    const Counts c = sample_f1(s);
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
    macro += f1_of(precision_of(c), recall_of(c));
  }
  F1Summary out;
  out.precision = precision_of(total);
  out.recall = recall_of(total);
  out.f1 = f1_of(out.precision, out.recall);
  out.macro_f1 = macro / static_cast<double>(samples.size());
  return out;
}

SampleIou sample_mask_iou(const SampleEval& s, const EvalOptions& opts) {
  const BitMask pred = region_union(s.predictions, s.image_width, s.image_height, opts);
  const BitMask gt = region_union(s.ground_truth, s.image_width, s.image_height, opts);
  SampleIou r;
  r.intersection = intersection_count(pred, gt);
  r.uni = pred.count() + gt.count() - r.intersection;
  if (gt.count() == 0) {
    r.iou = pred.count() == 0 ? 1.0 : 0.0;
  } else {
    r.iou = static_cast<double>(r.intersection) / static_cast<double>(r.uni);
  }
  return r;
}

SegmentationSummary giou_ciou(std::span<const SampleEval> samples, const EvalOptions& opts) {
  if (samples.empty()) throw InputError("giou_ciou needs at least one sample");
  double sum_iou = 0.0;
  std::uint64_t sum_inter = 0, sum_union = 0;
  for (const auto& s : samples) {
    const auto r = sample_mask_iou(s, opts);
    sum_iou += r.iou;
    sum_inter += r.intersection;
    sum_union += r.uni;
  }
  SegmentationSummary out;
  out.giou = sum_iou / static_cast<double>(samples.size());
  out.ciou = sum_union == 0 ? 1.0 : static_cast<double>(sum_inter) / static_cast<double>(sum_union);
  return out;
}

std::optional<double> n_acc(std::span<const SampleEval> samples) {
  int no_target = 0, silent = 0;
  for (const auto& s : samples) {
    if (!s.ground_truth.empty()) continue;
    ++no_target;
    if (s.predictions.empty()) ++silent;
  }
  if (no_target == 0) return std::nullopt;
  return static_cast<double>(silent) / no_target;
}

int bucket_index(std::size_t target_count) {
  if (target_count <= 1) return 0;
  if (target_count <= 5) return 1;
  if (target_count <= 10) return 2;
  return 3;
}

Metrics compute_metrics(std::span<const SampleEval> samples, const EvalOptions& opts) {
  const auto f1 = dataset_f1(samples);
  const auto seg = giou_ciou(samples, opts);
  Metrics m;
  m.samples = static_cast<int>(samples.size());
  m.f1 = f1.f1;
  m.precision = f1.precision;
  m.recall = f1.recall;
  m.macro_f1 = f1.macro_f1;
  m.giou = seg.giou;
  m.ciou = seg.ciou;
  m.n_acc = n_acc(samples);
  return m;
}

MetricsReport evaluate(std::span<const SampleEval> samples, const EvalOptions& opts) {
  MetricsReport report;
  report.overall = compute_metrics(samples, opts);
  std::array<std::vector<SampleEval>, 4> split;
  for (const auto& s : samples) split[bucket_index(s.ground_truth.size())].push_back(s);
  for (std::size_t b = 0; b < split.size(); ++b)
    if (!split[b].empty()) report.buckets[b] = compute_metrics(split[b], opts);
  return report;
}

}  // namespace vgent::metrics
