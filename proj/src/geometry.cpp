#include "vgent/geometry.hpp"

#include <charconv>
#include <sstream>

namespace vgent {

namespace {

void require_same_dims(const BitMask& a, const BitMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InputError("mask dimension mismatch");
}

// Appends a run of `len` pixels with value `bit`, merging with the tail.
void push_run(std::vector<std::uint32_t>& runs, bool bit, std::uint32_t len) {
  if (len == 0) return;
  // runs.size() odd => last run is a zero-run; even (and nonzero) => one-run.
  const bool tail_is_one = runs.size() % 2 == 0;
  if (!runs.empty() && tail_is_one == bit) {
    runs.back() += len;
    return;
  }
  if (runs.empty() && bit) runs.push_back(0);
  runs.push_back(len);
}

}  // namespace

Overlap box_ioa(const BBox& proposal, std::span<const BBox> gts) {
  require_valid(proposal);
  const double area = proposal.area();
  if (area <= 0) return {0.0, true};

  std::vector<BBox> clipped;
  for (const auto& g : gts) {
    require_valid(g);
    BBox c{std::max(g.x1, proposal.x1), std::max(g.y1, proposal.y1),
           std::min(g.x2, proposal.x2), std::min(g.y2, proposal.y2)};
    if (c.x1 < c.x2 && c.y1 < c.y2) clipped.push_back(c);
  }
  if (clipped.empty()) return {0.0, false};

  std::vector<double> xs, ys;
  for (const auto& c : clipped) {
    xs.insert(xs.end(), {c.x1, c.x2});
    ys.insert(ys.end(), {c.y1, c.y2});
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  double covered = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
      const double mx = (xs[i] + xs[i + 1]) / 2, my = (ys[j] + ys[j + 1]) / 2;
      for (const auto& c : clipped) {
        if (mx > c.x1 && mx < c.x2 && my > c.y1 && my < c.y2) {
          covered += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
          break;
        }
      }
    }
  }
  return {std::min(1.0, covered / area), false};
}

BitMask::BitMask(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw InputError("mask dimensions must be positive");
  runs_ = {static_cast<std::uint32_t>(width) * static_cast<std::uint32_t>(height)};
}

BitMask BitMask::from_dense(int width, int height, std::span<const std::uint8_t> pixels) {
  BitMask m(width, height);
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw InputError("dense mask size does not match dimensions");
  m.runs_.clear();
  std::size_t i = 0;
  while (i < pixels.size()) {
    const bool bit = pixels[i] != 0;
    std::size_t j = i;
    while (j < pixels.size() && (pixels[j] != 0) == bit) ++j;
    push_run(m.runs_, bit, static_cast<std::uint32_t>(j - i));
    i = j;
  }
  return m;
}

BitMask BitMask::from_runs(int width, int height, std::vector<std::uint32_t> runs) {
  BitMask m(width, height);
  std::uint64_t total = 0;
  for (auto r : runs) total += r;
  if (total != static_cast<std::uint64_t>(width) * height)
    throw InputError("run lengths do not sum to width*height");
  m.runs_.clear();
  for (std::size_t i = 0; i < runs.size(); ++i) push_run(m.runs_, i % 2 == 1, runs[i]);
  return m;
}

BitMask BitMask::from_box(int width, int height, const BBox& box) {
  require_valid(box);
  const int c0 = std::clamp(static_cast<int>(std::ceil(box.x1 - 0.5)), 0, width);
  const int c1 = std::clamp(static_cast<int>(std::ceil(box.x2 - 0.5)), 0, width);
  const int r0 = std::clamp(static_cast<int>(std::ceil(box.y1 - 0.5)), 0, height);
  const int r1 = std::clamp(static_cast<int>(std::ceil(box.y2 - 0.5)), 0, height);
  std::vector<RowSpan> spans;
  if (c0 < c1)
    for (int r = r0; r < r1; ++r) spans.push_back({r, c0, c1});
  return from_row_spans(width, height, spans);
}

BitMask BitMask::from_row_spans(int width, int height, std::span<const RowSpan> spans) {
  BitMask m(width, height);
  m.runs_.clear();
  std::uint64_t cursor = 0;
  for (const auto& s : spans) {
    if (s.row < 0 || s.row >= height || s.x_begin < 0 || s.x_end > width || s.x_begin > s.x_end)
      throw InputError("row span out of bounds");
    if (s.x_begin == s.x_end) continue;
    const std::uint64_t begin = static_cast<std::uint64_t>(s.row) * width + s.x_begin;
    if (begin < cursor) throw InputError("row spans must be sorted and disjoint");
    push_run(m.runs_, false, static_cast<std::uint32_t>(begin - cursor));
    push_run(m.runs_, true, static_cast<std::uint32_t>(s.x_end - s.x_begin));
    cursor = begin + (s.x_end - s.x_begin);
  }
  const std::uint64_t total = static_cast<std::uint64_t>(width) * height;
  push_run(m.runs_, false, static_cast<std::uint32_t>(total - cursor));
  if (m.runs_.empty()) m.runs_.push_back(0);
  return m;
}

std::vector<std::uint8_t> BitMask::to_dense() const {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(width_) * height_);
  for (std::size_t i = 0; i < runs_.size(); ++i)
    out.insert(out.end(), runs_[i], static_cast<std::uint8_t>(i % 2));
  return out;
}

std::uint64_t BitMask::count() const {
  std::uint64_t n = 0;
  for (std::size_t i = 1; i < runs_.size(); i += 2) n += runs_[i];
  return n;
}

std::string BitMask::to_rle_text() const {
  std::string s = std::to_string(width_) + " " + std::to_string(height_);
  for (auto r : runs_) {
    s += ' ';
    s += std::to_string(r);
  }
  return s;
}

BitMask BitMask::from_rle_text(std::string_view text) {
  std::vector<long long> values;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (ec != std::errc() || v < 0) throw InputError("malformed RLE text");
    i = static_cast<std::size_t>(ptr - text.data());
    if (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
      throw InputError("malformed RLE text");
    values.push_back(v);
  }
  if (values.size() < 3) throw InputError("RLE text needs width, height and at least one run");
  if (values[0] <= 0 || values[1] <= 0 || values[0] > (1 << 20) || values[1] > (1 << 20))
    throw InputError("RLE dimensions out of range");
  std::vector<std::uint32_t> runs;
  for (std::size_t k = 2; k < values.size(); ++k) {
    if (values[k] > 0xFFFFFFFFLL) throw InputError("RLE run too long");
    runs.push_back(static_cast<std::uint32_t>(values[k]));
  }
  return from_runs(static_cast<int>(values[0]), static_cast<int>(values[1]), std::move(runs));
}

std::uint64_t intersection_count(const BitMask& a, const BitMask& b) {
  require_same_dims(a, b);
  // Walk both run lists in lockstep.
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  std::size_t ia = 0, ib = 0;
  std::uint64_t left_a = ra.empty() ? 0 : ra[0], left_b = rb.empty() ? 0 : rb[0];
  std::uint64_t n = 0;
  while (ia < ra.size() && ib < rb.size()) {
    if (left_a == 0) {
      if (++ia < ra.size()) left_a = ra[ia];
      continue;
    }
    if (left_b == 0) {
      if (++ib < rb.size()) left_b = rb[ib];
      continue;
    }
    const std::uint64_t step = std::min(left_a, left_b);
    if (ia % 2 == 1 && ib % 2 == 1) n += step;
    left_a -= step;
    left_b -= step;
  }
  return n;
}

std::uint64_t union_count(const BitMask& a, const BitMask& b) {
  return a.count() + b.count() - intersection_count(a, b);
}

Overlap mask_ioa(const BitMask& proposal, const BitMask& gt_union) {
  require_same_dims(proposal, gt_union);
  const std::uint64_t area = proposal.count();
  if (area == 0) return {0.0, true};
  return {static_cast<double>(intersection_count(proposal, gt_union)) / static_cast<double>(area),
          false};
}

double mask_iou(const BitMask& a, const BitMask& b) {
  const std::uint64_t inter = intersection_count(a, b);
  const std::uint64_t uni = a.count() + b.count() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BitMask mask_union(std::span<const BitMask> masks) {
  if (masks.empty()) throw InputError("mask_union needs at least one mask");
  const int w = masks.front().width(), h = masks.front().height();
  std::vector<std::uint8_t> acc(static_cast<std::size_t>(w) * h, 0);
  for (const auto& m : masks) {
    require_same_dims(m, masks.front());
    std::size_t pos = 0;
    const auto& runs = m.runs();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i % 2 == 1) std::fill_n(acc.begin() + pos, runs[i], std::uint8_t{1});
      pos += runs[i];
    }
  }
  return BitMask::from_dense(w, h, acc);
}

BitMask mask_intersection(const BitMask& a, const BitMask& b) {
  require_same_dims(a, b);
  auto da = a.to_dense();
  const auto db = b.to_dense();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] &= db[i];
  return BitMask::from_dense(a.width(), a.height(), da);
}

BBox mask_to_bbox(const BitMask& m) {
  int min_x = m.width(), min_y = m.height(), max_x = -1, max_y = -1;
  std::uint64_t pos = 0;
  const auto& runs = m.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1 && runs[i] > 0) {
      const std::uint64_t first = pos, last = pos + runs[i] - 1;
      const int r0 = static_cast<int>(first / m.width()), r1 = static_cast<int>(last / m.width());
      min_y = std::min(min_y, r0);
      max_y = std::max(max_y, r1);
      if (r0 != r1) {
        min_x = 0;
        max_x = m.width() - 1;
      } else {
        min_x = std::min(min_x, static_cast<int>(first % m.width()));
        max_x = std::max(max_x, static_cast<int>(last % m.width()));
      }
    }
    pos += runs[i];
  }
  if (max_x < 0) throw InputError("mask_to_bbox: mask is empty");
  return {static_cast<double>(min_x), static_cast<double>(min_y), static_cast<double>(max_x + 1),
          static_cast<double>(max_y + 1)};
}

PointXY mask_centroid(const BitMask& m) {
  double sx = 0.0, sy = 0.0;
  std::uint64_t n = 0, pos = 0;
  const auto& runs = m.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1) {
      for (std::uint64_t p = pos; p < pos + runs[i]; ++p) {
        sx += static_cast<double>(p % m.width()) + 0.5;
        sy += static_cast<double>(p / m.width()) + 0.5;
      }
      n += runs[i];
    }
    pos += runs[i];
  }
  if (n == 0) throw InputError("mask_centroid: mask is empty");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

}  // namespace vgent
