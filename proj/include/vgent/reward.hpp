#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vgent/geometry.hpp"

namespace vgent::reward {

// Reward constants of the verifiable QuadThinker scoring rule.
inline constexpr double kTagReward = 1.0;
inline constexpr double kCountsValidReward = 1.0;
inline constexpr double kJsonReward = 2.0;
inline constexpr double kCountMatchReward = 1.0;
inline constexpr double kIouThreshold = 0.5;     // R_IoU = 1[IoU > 0.5]
inline constexpr double kL1Threshold = 10.0;     // R_L1 = 1[L1 < 10]
inline constexpr double kPointThreshold = 30.0;  // R_point = 1[dist < 30]
inline constexpr double kMaxIndicatorSum = 3.0;

// Tags every well-formed response must carry exactly once.
inline constexpr std::array<std::string_view, 7> kRequiredTags = {
    "think", "count_q1", "count_q2", "count_q3", "count_q4", "count_total", "answer"};

struct GtInstance {
  BBox bbox;
  PointXY centroid;
};

struct GtTargets {
  std::vector<GtInstance> instances;
  double image_width = 0;
  double image_height = 0;
};

struct AnswerItem {
  BBox bbox;
  PointXY point;
};

struct ParsedPrediction {
  bool has_all_tags = false;
  bool count_tags_valid = false;
  std::optional<std::array<int, 4>> quadrant_counts;  // Q1..Q4: TL, TR, BL, BR
  std::optional<int> total_count;
  std::optional<std::vector<AnswerItem>> answer_items;
  std::string raw_text;
};

struct PairEvidence {
  int gt = 0;
  int pred = 0;
  int r_iou = 0;
  int r_l1 = 0;
  int r_point = 0;
};

struct FormatReward {
  double r_tags = 0.0;
  double r_counts_valid = 0.0;
  double r_json = 0.0;
};

struct DetectionReward {
  double r_det = 0.0;
  std::vector<PairEvidence> per_pair;
};

struct RewardBreakdown {
  double r_tags = 0.0;
  double r_counts_valid = 0.0;
  double r_json = 0.0;
  double r_count_match = 0.0;
  double r_det = 0.0;
  double r_total = 0.0;
  std::vector<PairEvidence> per_pair;
};

enum class CoordinateSpace { kPixels, kNormalized1000 };

// Total function: malformations become absent fields, never exceptions.
ParsedPrediction parse_prediction(std::string_view text);

FormatReward format_reward(const ParsedPrediction& p);

std::array<int, 4> quadrant_counts(const GtTargets& g);

double count_reward(const ParsedPrediction& p, const GtTargets& g);

DetectionReward detection_reward(const ParsedPrediction& p, const GtTargets& g);

RewardBreakdown total_reward(std::string_view text, const GtTargets& g,
                             CoordinateSpace space = CoordinateSpace::kPixels);

// Maps 0-1000 normalized coordinates to pixels, clamped to the image.
std::vector<AnswerItem> denormalize_boxes(std::vector<AnswerItem> items, double image_width,
                                          double image_height);

}  // namespace vgent::reward
