#include "vgent/reward.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "vgent/assignment.hpp"

namespace vgent::reward {

namespace {

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

struct TagSpan {
  std::size_t open = 0;   // position of '<name>'
  std::size_t close = 0;  // one past '</name>'
  std::string_view content;
};

// A tag is usable only when it opens and closes exactly once, in order.
std::optional<TagSpan> find_tag(std::string_view text, std::string_view name) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  if (count_occurrences(text, open) != 1 || count_occurrences(text, close) != 1)
    return std::nullopt;
  const auto o = text.find(open);
  const auto c = text.find(close);
  if (c < o + open.size()) return std::nullopt;
  return TagSpan{o, c + close.size(), text.substr(o + open.size(), c - o - open.size())};
}

std::optional<int> parse_count(std::string_view s) {
  s = trim(s);
  if (s.empty() || s.size() > 9) return std::nullopt;
  for (char ch : s)
    if (ch < '0' || ch > '9') return std::nullopt;
  int v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::optional<std::vector<double>> numeric_array(const nlohmann::json& j, std::size_t n) {
  if (!j.is_array() || j.size() != n) return std::nullopt;
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number()) return std::nullopt;
    const double v = e.get<double>();
    if (!std::isfinite(v)) return std::nullopt;
    out.push_back(v);
  }
  return out;
}

std::optional<std::vector<AnswerItem>> parse_answer(std::string_view payload) {
  const auto j = nlohmann::json::parse(trim(payload), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_array()) return std::nullopt;
  std::vector<AnswerItem> items;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("bbox_2d") || !e.contains("point_2d")) return std::nullopt;
    const auto b = numeric_array(e["bbox_2d"], 4);
    const auto p = numeric_array(e["point_2d"], 2);
    if (!b || !p) return std::nullopt;
    const auto& v = *b;
    items.push_back({{std::min(v[0], v[2]), std::min(v[1], v[3]), std::max(v[0], v[2]),
                      std::max(v[1], v[3])},
                     {(*p)[0], (*p)[1]}});
  }
  return items;
}

}  // namespace

ParsedPrediction parse_prediction(std::string_view text) {
  ParsedPrediction out;
  out.raw_text = std::string(text);

  std::vector<std::optional<TagSpan>> spans;
  for (auto name : kRequiredTags) spans.push_back(find_tag(text, name));

  bool all = true;
  for (const auto& s : spans) all = all && s.has_value();
  if (all) {
    // No tag may sit inside another.
    for (std::size_t a = 0; a < spans.size() && all; ++a)
      for (std::size_t b = a + 1; b < spans.size() && all; ++b)
        if (spans[a]->open < spans[b]->close && spans[b]->open < spans[a]->close) all = false;
  }
  out.has_all_tags = all;

  std::array<std::optional<int>, 5> counts;
  for (std::size_t k = 0; k < 5; ++k)
    if (spans[k + 1]) counts[k] = parse_count(spans[k + 1]->content);

  if (counts[0] && counts[1] && counts[2] && counts[3])
    out.quadrant_counts = std::array<int, 4>{*counts[0], *counts[1], *counts[2], *counts[3]};
  out.total_count = counts[4];
  out.count_tags_valid = out.quadrant_counts.has_value() && out.total_count.has_value();

  if (spans[6]) out.answer_items = parse_answer(spans[6]->content);
  return out;
}

FormatReward format_reward(const ParsedPrediction& p) {
  return {p.has_all_tags ? kTagReward : 0.0, p.count_tags_valid ? kCountsValidReward : 0.0,
          p.answer_items ? kJsonReward : 0.0};
}

std::array<int, 4> quadrant_counts(const GtTargets& g) {
  std::array<int, 4> q{0, 0, 0, 0};
  const double mid_x = g.image_width / 2, mid_y = g.image_height / 2;
  for (const auto& inst : g.instances) {
    const auto c = bbox_center(inst.bbox);
    const bool left = c.x <= mid_x;
    const bool top = c.y <= mid_y;
    ++q[(top ? 0 : 2) + (left ? 0 : 1)];
  }
  return q;
}

double count_reward(const ParsedPrediction& p, const GtTargets& g) {
  if (!p.quadrant_counts || !p.total_count) return 0.0;
  const bool match = *p.quadrant_counts == quadrant_counts(g) &&
                     *p.total_count == static_cast<int>(g.instances.size());
  return match ? kCountMatchReward : 0.0;
}

DetectionReward detection_reward(const ParsedPrediction& p, const GtTargets& g) {
  static const std::vector<AnswerItem> kNone;
  const auto& preds = p.answer_items ? *p.answer_items : kNone;
  const auto n_gt = static_cast<Eigen::Index>(g.instances.size());
  const auto n_pred = static_cast<Eigen::Index>(preds.size());

  DetectionReward out;
  if (n_gt == 0 && n_pred == 0) {
    out.r_det = kMaxIndicatorSum;
    return out;
  }

  Eigen::MatrixXi r_iou(n_gt, n_pred), r_l1(n_gt, n_pred), r_point(n_gt, n_pred);
  for (Eigen::Index i = 0; i < n_gt; ++i) {
    const auto& gt = g.instances[i];
    for (Eigen::Index j = 0; j < n_pred; ++j) {
      r_iou(i, j) = iou(gt.bbox, preds[j].bbox) > kIouThreshold;
      r_l1(i, j) = l1_box(gt.bbox, preds[j].bbox) < kL1Threshold;
      r_point(i, j) = point_dist(gt.centroid, preds[j].point) < kPointThreshold;
    }
  }
  const CostMatrix cost = kMaxIndicatorSum - (r_iou + r_l1 + r_point).cast<double>().array();
  const Matching m = solve(cost);

  double gained = 0.0;
  for (const auto& [i, j] : m.pairs) {
    gained += kMaxIndicatorSum - cost(i, j);
    out.per_pair.push_back({i, j, r_iou(i, j), r_l1(i, j), r_point(i, j)});
  }
  out.r_det = gained / static_cast<double>(std::max<Eigen::Index>(1, std::max(n_gt, n_pred)));
  return out;
}

RewardBreakdown total_reward(std::string_view text, const GtTargets& g, CoordinateSpace space) {
  ParsedPrediction p = parse_prediction(text);
  if (space == CoordinateSpace::kNormalized1000 && p.answer_items)
    p.answer_items = denormalize_boxes(std::move(*p.answer_items), g.image_width, g.image_height);

  const auto fmt = format_reward(p);
  auto det = detection_reward(p, g);
  RewardBreakdown r;
  r.r_tags = fmt.r_tags;
  r.r_counts_valid = fmt.r_counts_valid;
  r.r_json = fmt.r_json;
  r.r_count_match = count_reward(p, g);
  r.r_det = det.r_det;
  r.per_pair = std::move(det.per_pair);
  r.r_total = r.r_tags + r.r_counts_valid + r.r_json + r.r_count_match + r.r_det;
  return r;
}

std::vector<AnswerItem> denormalize_boxes(std::vector<AnswerItem> items, double image_width,
                                          double image_height) {
  const double sx = image_width / 1000.0, sy = image_height / 1000.0;
  for (auto& it : items) {
    it.bbox = clamp_to_image(BBox{it.bbox.x1 * sx, it.bbox.y1 * sy, it.bbox.x2 * sx, it.bbox.y2 * sy},
                             image_width, image_height);
    it.point = {std::clamp(it.point.x * sx, 0.0, image_width),
                std::clamp(it.point.y * sy, 0.0, image_height)};
  }
  return items;
}

}  // namespace vgent::reward
