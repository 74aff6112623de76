#include "vgent/labeling.hpp"

#include <algorithm>

#include "vgent/assignment.hpp"

namespace vgent::labeling {

namespace {

bool any_mask(std::span<const Proposal> proposals, const GroundTruth& gt) {
  for (const auto& p : proposals)
    if (p.mask) return true;
  for (const auto& g : gt.instances)
    if (g.mask) return true;
  return false;
}

void require_dims(const BitMask& m, const GroundTruth& gt) {
  if (m.width() != gt.image_width || m.height() != gt.image_height)
    throw InputError("mask does not match scene dimensions");
}

BitMask region_of(const BBox& box, const std::optional<BitMask>& mask, const GroundTruth& gt) {
  if (mask) {
    require_dims(*mask, gt);
    return *mask;
  }
  return BitMask::from_box(gt.image_width, gt.image_height, box);
}

BitMask gt_union(const GroundTruth& gt) {
  std::vector<BitMask> regions;
  for (const auto& g : gt.instances) regions.push_back(region_of(g.bbox, g.mask, gt));
  if (regions.empty()) return BitMask(gt.image_width, gt.image_height);
  return mask_union(regions);
}

}  // namespace

std::vector<BoxLabel> assign_box_labels(std::span<const Proposal> proposals,
                                        std::span<const BBox> gt_boxes, double threshold) {
  std::vector<BoxLabel> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) {
    double best = 0.0;
    for (const auto& g : gt_boxes) best = std::max(best, iou(p.bbox, g));
    out.push_back({best > threshold, best});
  }
  return out;
}

std::vector<MaskLabel> assign_mask_labels(std::span<const Proposal> proposals,
                                          const GroundTruth& gt, double threshold) {
  std::vector<MaskLabel> out;
  out.reserve(proposals.size());
  if (!any_mask(proposals, gt)) {
    std::vector<BBox> boxes;
    for (const auto& g : gt.instances) boxes.push_back(g.bbox);
    for (const auto& p : proposals) {
      const Overlap o = box_ioa(p.bbox, boxes);
      out.push_back({!o.degenerate && o.value > threshold, o.value, o.degenerate, 1.0 + o.value});
    }
    return out;
  }

  const BitMask unified = gt_union(gt);
  for (const auto& p : proposals) {
    const Overlap o = mask_ioa(region_of(p.bbox, p.mask, gt), unified);
    out.push_back({!o.degenerate && o.value > threshold, o.value, o.degenerate, 1.0 + o.value});
  }
  return out;
}

LabelAssignment assign_labels(std::span<const Proposal> proposals, const GroundTruth& gt,
                              double box_threshold, double mask_threshold) {
  std::vector<BBox> boxes;
  for (const auto& g : gt.instances) boxes.push_back(g.bbox);
  const auto box = assign_box_labels(proposals, boxes, box_threshold);
  const auto mask = assign_mask_labels(proposals, gt, mask_threshold);
  LabelAssignment out(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    out[i] = {box[i].positive, mask[i].positive, box[i].best_iou,
              mask[i].ioa,     mask[i].degenerate, mask[i].weight};
  }
  return out;
}

std::vector<int> oracle_select(std::span<const Proposal> proposals, const GroundTruth& gt,
                               OracleMode mode, double iou_threshold, double ioa_threshold) {
  std::vector<int> keep;
  if (mode == OracleMode::kMask) {
    const auto labels = assign_mask_labels(proposals, gt, ioa_threshold);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i].positive) keep.push_back(static_cast<int>(i));
    return keep;
  }

  const auto n_gt = static_cast<Eigen::Index>(gt.instances.size());
  const auto n_prop = static_cast<Eigen::Index>(proposals.size());
  Eigen::MatrixXd overlap(n_gt, n_prop);
  for (Eigen::Index i = 0; i < n_gt; ++i)
    for (Eigen::Index j = 0; j < n_prop; ++j)
      overlap(i, j) = iou(gt.instances[i].bbox, proposals[j].bbox);
  const Matching m = solve(1.0 - overlap.array());
  for (const auto& [i, j] : m.pairs)
    if (overlap(i, j) > iou_threshold) keep.push_back(j);
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace vgent::labeling
