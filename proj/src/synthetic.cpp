#include <cmath>
#include <cstdio>

#include "vgent/corpus.hpp"
#include "vgent/random.hpp"

namespace vgent::corpus {

namespace {

using RowSpan = BitMask::RowSpan;

// Row spans of a shape inscribed in an integer-aligned box, judged at pixel centers.
std::vector<RowSpan> shape_spans(Shape shape, const BBox& box) {
  const int x1 = static_cast<int>(box.x1), x2 = static_cast<int>(box.x2);
  const int y1 = static_cast<int>(box.y1), y2 = static_cast<int>(box.y2);
  const double w = box.width(), h = box.height();
  std::vector<RowSpan> spans;
  for (int r = y1; r < y2; ++r) {
    const double v = (r + 0.5 - box.y1) / h;
    int first = -1, last = -1;
    for (int c = x1; c < x2; ++c) {
      const double u = (c + 0.5 - box.x1) / w;
      bool inside = true;
      switch (shape) {
        case Shape::kSquare:
          break;
        case Shape::kCircle:
          inside = (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25;
          break;
        case Shape::kTriangle:
          inside = v >= 2.0 * std::abs(u - 0.5);
          break;
        case Shape::kDiamond:
          inside = std::abs(u - 0.5) + std::abs(v - 0.5) <= 0.5;
          break;
      }
      if (inside) {
        if (first < 0) first = c;
        last = c;
      }
    }
    if (first >= 0) spans.push_back({r, first, last + 1});
  }
  return spans;
}

std::vector<RowSpan> clip_spans(const std::vector<RowSpan>& spans, const BBox& box) {
  std::vector<RowSpan> out;
  for (const auto& s : spans) {
    if (s.row < box.y1 || s.row >= box.y2) continue;
    const int b = std::max(s.x_begin, static_cast<int>(box.x1));
    const int e = std::min(s.x_end, static_cast<int>(box.x2));
    if (b < e) out.push_back({s.row, b, e});
  }
  return out;
}

AttributeQuery random_query(Rng& rng) {
  AttributeQuery q;
  const auto shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
  const auto color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
  const auto size = static_cast<SizeClass>(rng.uniform_int(0, kNumSizes - 1));
  switch (rng.uniform_int(0, 4)) {
    case 0: q.color = color; break;
    case 1: q.shape = shape; break;
    case 2: q.color = color; q.shape = shape; break;
    case 3: q.size = size; q.shape = shape; break;
    default: q.size = size; q.color = color; break;
  }
  return q;
}

SceneObject random_attributes(Rng& rng) {
  SceneObject o;
  o.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
  o.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
  o.size = static_cast<SizeClass>(rng.uniform_int(0, kNumSizes - 1));
  return o;
}

SceneObject target_attributes(Rng& rng, const AttributeQuery& q) {
  SceneObject o = random_attributes(rng);
  if (q.shape) o.shape = *q.shape;
  if (q.color) o.color = *q.color;
  if (q.size) o.size = *q.size;
  return o;
}

SceneObject distractor_attributes(Rng& rng, const AttributeQuery& q) {
  for (;;) {
    SceneObject o = random_attributes(rng);
    if (!q.matches(o)) return o;
  }
}

BBox place_in_cell(Rng& rng, SizeClass size, int cell_x, int cell_y, int cell) {
  const double lo = size == SizeClass::kSmall ? 0.25 : 0.6;
  const double hi = size == SizeClass::kSmall ? 0.4 : 0.85;
  const int w = std::max(2, static_cast<int>(std::lround(rng.uniform(lo, hi) * cell)));
  const int h = std::max(2, static_cast<int>(std::lround(rng.uniform(lo, hi) * cell)));
  const int x = cell_x * cell + rng.uniform_int(1, std::max(1, cell - w - 1));
  const int y = cell_y * cell + rng.uniform_int(1, std::max(1, cell - h - 1));
  return {static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + w),
          static_cast<double>(y + h)};
}

BBox jitter_box(Rng& rng, const BBox& b, double min_iou, int image_size) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double cx = (b.x1 + b.x2) / 2 + rng.uniform(-0.2, 0.2) * b.width();
    const double cy = (b.y1 + b.y2) / 2 + rng.uniform(-0.2, 0.2) * b.height();
    const double w = b.width() * rng.uniform(0.8, 1.2);
    const double h = b.height() * rng.uniform(0.8, 1.2);
    BBox j{std::round(cx - w / 2), std::round(cy - h / 2), std::round(cx + w / 2),
           std::round(cy + h / 2)};
    j = clamp_to_image(j, static_cast<double>(image_size), static_cast<double>(image_size));
    if (j.area() > 0 && j != b && iou(j, b) >= min_iou) return j;
  }
  return b;
}

void validate(const SyntheticSpec& s) {
  if (s.num_scenes < 0) throw InputError("num_scenes must be non-negative");
  if (s.grid < 1 || s.image_size < s.grid * 8) throw InputError("image too small for grid");
  if (s.min_targets < 0 || s.min_targets > s.max_targets)
    throw InputError("invalid target range");
  if (s.min_distractors < 0 || s.min_distractors > s.max_distractors)
    throw InputError("invalid distractor range");
  if (s.max_targets + s.max_distractors > s.grid * s.grid)
    throw InputError("infeasible spec: more objects than non-overlapping grid cells");
  if (s.max_targets + s.max_distractors > s.num_proposals)
    throw InputError("infeasible spec: fewer proposals than objects");
  if (s.no_target_fraction < 0 || s.no_target_fraction > 1)
    throw InputError("no_target_fraction must lie in [0, 1]");
  if (!(s.min_jitter_iou > 0.6 && s.min_jitter_iou <= 1.0))
    throw InputError("min_jitter_iou must lie in (0.6, 1]");
}

}  // namespace

BitMask render_shape(Shape shape, const BBox& box, int width, int height) {
  const auto spans = shape_spans(shape, box);
  return BitMask::from_row_spans(width, height, spans);
}

std::vector<SyntheticSample> generate_synthetic_corpus(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const int size = spec.image_size;
  const int cell = size / spec.grid;
  std::vector<SyntheticSample> corpus;
  corpus.reserve(spec.num_scenes);

  for (int index = 0; index < spec.num_scenes; ++index) {
    SyntheticSample sample;
    Scene& scene = sample.scene;
    char id[64];
    std::snprintf(id, sizeof id, "syn-%llu-%05d", static_cast<unsigned long long>(spec.seed), index);
    scene.scene_id = id;
    scene.image_width = scene.image_height = size;

    SceneLayout layout;
    layout.query = random_query(rng);
    const int targets = rng.bernoulli(spec.no_target_fraction)
                            ? 0
                            : rng.uniform_int(spec.min_targets, spec.max_targets);
    const int distractors = rng.uniform_int(spec.min_distractors, spec.max_distractors);

    std::vector<bool> is_target(targets, true);
    is_target.resize(targets + distractors, false);
    rng.shuffle(is_target);
    std::vector<int> cells(spec.grid * spec.grid);
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = static_cast<int>(c);
    rng.shuffle(cells);

    std::vector<std::vector<RowSpan>> spans;
    for (std::size_t k = 0; k < is_target.size(); ++k) {
      SceneObject o = is_target[k] ? target_attributes(rng, layout.query)
                                   : distractor_attributes(rng, layout.query);
      o.bbox = place_in_cell(rng, o.size, cells[k] % spec.grid, cells[k] / spec.grid, cell);
      spans.push_back(shape_spans(o.shape, o.bbox));
      if (is_target[k])
        scene.gt_instances.push_back({o.bbox, BitMask::from_row_spans(size, size, spans.back())});
      layout.objects.push_back(o);
    }
    scene.query = layout.query.describe();

    if (distractors > 0 && rng.bernoulli(spec.visual_ref_fraction)) {
      std::vector<std::size_t> candidates;
      for (std::size_t k = 0; k < is_target.size(); ++k)
        if (!is_target[k]) candidates.push_back(k);
      const auto pick = candidates[rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)];
      scene.query += " near " + std::string(kMaskRefToken);
      scene.visual_refs.push_back(BitMask::from_row_spans(size, size, spans[pick]));
    }

    ProposalGroup exact{"sim-exact", {}}, jittered{"sim-jitter", {}};
    auto emit = [&](std::size_t k) {
      const BBox& b = layout.objects[k].bbox;
      const bool keep_exact = rng.bernoulli(spec.exact_proposal_rate);
      const BBox pb = keep_exact ? b : jitter_box(rng, b, spec.min_jitter_iou, size);
      Proposal p;
      p.bbox = pb;
      p.mask = BitMask::from_row_spans(size, size, clip_spans(spans[k], pb));
      auto& group = pb == b ? exact : jittered;
      p.source = group.detector;
      group.proposals.push_back(std::move(p));
    };
    const int n_objects = static_cast<int>(layout.objects.size());
    for (int k = 0; k < n_objects; ++k) emit(k);
    for (int extra = n_objects; n_objects > 0 && extra < spec.num_proposals; ++extra)
      emit(static_cast<std::size_t>(rng.uniform_int(0, n_objects - 1)));
    rng.shuffle(exact.proposals);
    rng.shuffle(jittered.proposals);

    scene.layout = std::move(layout);
    sample.proposals.scene_id = scene.scene_id;
    if (!exact.proposals.empty()) sample.proposals.groups.push_back(std::move(exact));
    if (!jittered.proposals.empty()) sample.proposals.groups.push_back(std::move(jittered));
    corpus.push_back(std::move(sample));
  }
  return corpus;
}

SyntheticSample decoration_fixture() {
  constexpr int kSize = 200;
  std::vector<RowSpan> blob, string, both;
  for (int r = 0; r < kSize; ++r) {
    int first = -1, last = -1;
    for (int c = 0; c < kSize; ++c) {
      const double dx = c + 0.5 - 100.0, dy = r + 0.5 - 80.0;
      if (dx * dx + dy * dy <= 40.0 * 40.0) {
        if (first < 0) first = c;
        last = c;
      }
    }
    if (first >= 0) blob.push_back({r, first, last + 1});
  }
  for (int r = 120; r < 160; ++r) string.push_back({r, 98, 102});
  both = blob;
  both.insert(both.end(), string.begin(), string.end());

  const BitMask blob_mask = BitMask::from_row_spans(kSize, kSize, blob);
  const BitMask string_mask = BitMask::from_row_spans(kSize, kSize, string);
  const BitMask gt_mask = BitMask::from_row_spans(kSize, kSize, both);

  SyntheticSample s;
  s.scene.scene_id = "decoration-fixture";
  s.scene.image_width = s.scene.image_height = kSize;
  s.scene.query = "the decoration hanging from the branch";
  s.scene.gt_instances.push_back({mask_to_bbox(gt_mask), gt_mask});

  ProposalGroup g{"fixture", {}};
  g.proposals.push_back({mask_to_bbox(blob_mask), blob_mask, "fixture", 0.9});
  g.proposals.push_back({mask_to_bbox(string_mask), string_mask, "fixture", 0.4});
  const BBox other{150, 150, 190, 190};
  g.proposals.push_back({other, BitMask::from_box(kSize, kSize, other), "fixture", 0.7});
  s.proposals = {s.scene.scene_id, {std::move(g)}};
  return s;
}

}  // namespace vgent::corpus
