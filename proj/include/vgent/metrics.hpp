#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vgent/instance.hpp"

namespace vgent::metrics {

inline constexpr double kMatchIouThreshold = 0.5;  // TP iff matched IoU > 0.5

// One evaluated sample: what the system predicted against what is annotated.
struct SampleEval {
  std::string scene_id;
  int image_width = 0;
  int image_height = 0;
  bool has_visual_ref = false;
  std::vector<Instance> predictions;
  std::vector<Instance> ground_truth;
};

struct Counts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct F1Summary {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
};

struct SegmentationSummary {
  double giou = 0.0;
  double ciou = 0.0;
};

struct Metrics {
  int samples = 0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
  double giou = 0.0;
  double ciou = 0.0;
  std::optional<double> n_acc;
};

inline constexpr std::array<const char*, 4> kBucketNames = {"<=1", "2-5", "6-10", "11+"};

struct MetricsReport {
  Metrics overall;
  std::array<std::optional<Metrics>, 4> buckets;  // indexed like kBucketNames
};

struct EvalOptions {
  // Rasterize boxes for instances that carry no mask.
  bool box_raster_fallback = false;
};

// Hungarian matching on 1 - IoU; TP = matched pairs with IoU > 0.5.
Counts sample_f1(std::span<const BBox> predictions, std::span<const BBox> ground_truth);
Counts sample_f1(const SampleEval& s);

double precision_of(const Counts& c);
double recall_of(const Counts& c);
double f1_of(double precision, double recall);

// Micro-averaged headline values plus the per-sample macro mean.
F1Summary dataset_f1(std::span<const SampleEval> samples);

// Per-sample mask IoU and its pixel counts. No-target samples score 1 when
// the prediction is empty and 0 otherwise.
struct SampleIou {
  double iou = 0.0;
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;
};
SampleIou sample_mask_iou(const SampleEval& s, const EvalOptions& opts = {});

SegmentationSummary giou_ciou(std::span<const SampleEval> samples, const EvalOptions& opts = {});

// Fraction of no-target samples with an empty prediction; absent without any.
std::optional<double> n_acc(std::span<const SampleEval> samples);

int bucket_index(std::size_t target_count);

Metrics compute_metrics(std::span<const SampleEval> samples, const EvalOptions& opts = {});

MetricsReport evaluate(std::span<const SampleEval> samples, const EvalOptions& opts = {});

}  // namespace vgent::metrics
