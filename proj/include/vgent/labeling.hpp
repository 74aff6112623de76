#pragma once

#include <span>
#include <vector>

#include "vgent/instance.hpp"

namespace vgent::labeling {

inline constexpr double kBoxThreshold = 0.6;     // IoU > 0.6 => box-aware positive
inline constexpr double kMaskThreshold = 0.6;    // IoA > 0.6 => mask-aware positive
inline constexpr double kOracleIouThreshold = 0.5;

struct GroundTruth {
  std::span<const Instance> instances;
  int image_width = 0;
  int image_height = 0;
};

struct BoxLabel {
  bool positive = false;
  double best_iou = 0.0;
};

struct MaskLabel {
  bool positive = false;
  double ioa = 0.0;
  bool degenerate = false;
  double weight = 1.0;  // 1 + IoA, optional reweighting of the mask loss
};

struct ProposalLabel {
  bool box_positive = false;
  bool mask_positive = false;
  double best_iou = 0.0;
  double ioa = 0.0;
  bool degenerate = false;
  double weight = 1.0;
};

using LabelAssignment = std::vector<ProposalLabel>;

std::vector<BoxLabel> assign_box_labels(std::span<const Proposal> proposals,
                                        std::span<const BBox> gt_boxes,
                                        double threshold = kBoxThreshold);

// IoA against the union of all ground-truth regions. Proposals or targets
// without masks are rasterized from their boxes; when no masks exist at all
// the exact box-level IoA is used instead.
std::vector<MaskLabel> assign_mask_labels(std::span<const Proposal> proposals,
                                          const GroundTruth& gt,
                                          double threshold = kMaskThreshold);

LabelAssignment assign_labels(std::span<const Proposal> proposals, const GroundTruth& gt,
                              double box_threshold = kBoxThreshold,
                              double mask_threshold = kMaskThreshold);

enum class OracleMode { kF1, kMask };

// Ground-truth-driven upper-bound selection. kF1: one-to-one Hungarian
// matching on 1 - IoU, keep matched proposals with IoU > iou_threshold.
// kMask: keep every proposal with IoA > ioa_threshold. Indices ascend.
std::vector<int> oracle_select(std::span<const Proposal> proposals, const GroundTruth& gt,
                               OracleMode mode, double iou_threshold = kOracleIouThreshold,
                               double ioa_threshold = kMaskThreshold);

}  // namespace vgent::labeling
