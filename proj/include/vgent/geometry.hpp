#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vgent/error.hpp"

namespace vgent {

// Axis-aligned box in half-open pixel-edge coordinates: [x1, x2) x [y1, y2).
template <typename Scalar>
struct Box {
  Scalar x1{0}, y1{0}, x2{0}, y2{0};

  Scalar width() const { return x2 - x1; }
  Scalar height() const { return y2 - y1; }
  Scalar area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 <= x2 && y1 <= y2;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

template <typename Scalar>
struct Point {
  Scalar x{0}, y{0};
  friend bool operator==(const Point&, const Point&) = default;
};

using BBox = Box<double>;
using PointXY = Point<double>;

template <typename Scalar>
inline void require_valid(const Box<Scalar>& b) {
  if (!b.valid()) throw InputError("invalid box: expected finite x1 <= x2, y1 <= y2");
}

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const Scalar h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0 || h <= 0) return Scalar(0);
  return w * h;
}

template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  require_valid(a);
  require_valid(b);
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= 0) return Scalar(0);
  return inter / uni;
}

// Sum of absolute corner-coordinate differences, in pixels.
template <typename Scalar>
Scalar l1_box(const Box<Scalar>& a, const Box<Scalar>& b) {
  require_valid(a);
  require_valid(b);
  using std::abs;
  return abs(a.x1 - b.x1) + abs(a.y1 - b.y1) + abs(a.x2 - b.x2) + abs(a.y2 - b.y2);
}

template <typename Scalar>
Scalar point_dist(const Point<Scalar>& a, const Point<Scalar>& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

template <typename Scalar>
Point<Scalar> bbox_center(const Box<Scalar>& b) {
  require_valid(b);
  return {(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2};
}

template <typename Scalar>
Box<Scalar> clamp_to_image(const Box<Scalar>& b, Scalar width, Scalar height) {
  auto cl = [](Scalar v, Scalar hi) { return std::clamp(v, Scalar(0), hi); };
  return {cl(b.x1, width), cl(b.y1, height), cl(b.x2, width), cl(b.y2, height)};
}

// Ratio result that also reports a zero-area denominator.
struct Overlap {
  double value = 0.0;
  bool degenerate = false;
};

// Exact |proposal ∩ union(gts)| / |proposal| via coordinate compression.
Overlap box_ioa(const BBox& proposal, std::span<const BBox> gts);

// Binary raster stored as run lengths over the row-major pixel order,
// alternating zero-runs and one-runs, starting with a zero-run.
class BitMask {
 public:
  BitMask() = default;

  // An all-zero mask.
  BitMask(int width, int height);

  static BitMask from_dense(int width, int height, std::span<const std::uint8_t> pixels);
  static BitMask from_runs(int width, int height, std::vector<std::uint32_t> runs);

  // Every pixel whose center lies inside the box.
  static BitMask from_box(int width, int height, const BBox& box);

  struct RowSpan {
    int row;
    int x_begin;  // inclusive
    int x_end;    // exclusive
  };
  // Spans must be sorted by (row, x_begin) and non-overlapping.
  static BitMask from_row_spans(int width, int height, std::span<const RowSpan> spans);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint32_t>& runs() const { return runs_; }

  std::vector<std::uint8_t> to_dense() const;
  std::uint64_t count() const;
  bool empty() const { return count() == 0; }

  // "w h r0 r1 ..." text form.
  std::string to_rle_text() const;
  static BitMask from_rle_text(std::string_view text);

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint32_t> runs_;
};

std::uint64_t intersection_count(const BitMask& a, const BitMask& b);
std::uint64_t union_count(const BitMask& a, const BitMask& b);

// |proposal ∩ gt_union| / |proposal|; empty proposal gives 0 flagged degenerate.
Overlap mask_ioa(const BitMask& proposal, const BitMask& gt_union);

double mask_iou(const BitMask& a, const BitMask& b);

BitMask mask_union(std::span<const BitMask> masks);
BitMask mask_intersection(const BitMask& a, const BitMask& b);

// Tight box over set pixels; x2/y2 are one past the last set column/row.
BBox mask_to_bbox(const BitMask& m);

// Mean of set-pixel centers (integer + 0.5).
PointXY mask_centroid(const BitMask& m);

}  // namespace vgent
