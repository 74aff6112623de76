#include "vgent/selector/latency.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "vgent/corpus.hpp"

namespace vgent::selector {

namespace {

struct BenchScene {
  int targets;
  EncoderStates<double> states;
  Mat<double> proposals;
};

}  // namespace

std::vector<LatencyRow> bench_latency(const SelectorModel<double>& model, const SimulatedEncoder& encoder,
                                      const LatencyOptions& options) {
  std::vector<BenchScene> scenes;
  for (std::size_t c = 0; c < options.target_counts.size(); ++c) {
    const int k = options.target_counts[c];
    corpus::SyntheticSpec spec;
    spec.num_scenes = options.scenes_per_count;
    spec.min_targets = spec.max_targets = k;
    spec.no_target_fraction = 0.0;
    spec.num_proposals = options.num_proposals;
    spec.max_distractors = std::min(spec.max_distractors, spec.grid * spec.grid - k);
    spec.min_distractors = std::min(spec.min_distractors, spec.max_distractors);
    spec.seed = options.seed * 1000 + c;
    for (const auto& s : corpus::generate_synthetic_corpus(spec)) {
      std::vector<BBox> boxes;
      for (const auto& p : s.proposals.flatten()) boxes.push_back(p.bbox);
      if (static_cast<int>(boxes.size()) != options.num_proposals)
        throw InputError("benchmark scene does not carry the requested proposal count");
      scenes.push_back({k, encoder.encode(s.scene),
                        normalize_proposals<double>(boxes, s.scene.image_width, s.scene.image_height)});
    }
  }

  // Warm caches and allocator before timing.
  for (const auto& s : scenes) (void)forward(model, s.states, s.proposals);

  std::vector<std::vector<double>> samples(options.target_counts.size());
  volatile double sink = 0;
  for (int round = 0; round < options.rounds; ++round) {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto& s = scenes[i];
      const auto t0 = std::chrono::steady_clock::now();
      const auto out = forward(model, s.states, s.proposals);
      const auto picked = select_from_outputs(out, PresenceHead::kBox, model.config.presence_threshold);
      const auto t1 = std::chrono::steady_clock::now();
      sink = sink + static_cast<double>(picked.size());
      samples[i / options.scenes_per_count].push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }

  std::vector<LatencyRow> rows;
  for (std::size_t c = 0; c < options.target_counts.size(); ++c) {
    const auto& v = samples[c];
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    LatencyRow row;
    row.targets = options.target_counts[c];
    row.proposals = options.num_proposals;
    row.sequence_length = model.config.sequence_length();
    row.selection_ms = mean;
    row.selection_stddev_ms = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    row.autoregressive_ms = options.cost.cost_ms(row.targets);
    rows.push_back(row);
  }
  return rows;
}

double regression_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("regression needs two or more paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0) throw InputError("regression needs distinct x values");
  return sxy / sxx;
}

std::string format_latency_table(std::span<const LatencyRow> rows) {
  std::string out = "targets  proposals  tokens  selection_ms  stddev_ms  autoregressive_ms\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%7d  %9d  %6d  %12.4f  %9.4f  %17.2f\n", r.targets, r.proposals,
                  r.sequence_length, r.selection_ms, r.selection_stddev_ms, r.autoregressive_ms);
    out += line;
  }
  return out;
}

}  // namespace vgent::selector
