#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vgent/selector/encoder.hpp"
#include "vgent/selector/model.hpp"

namespace vgent::selector {

// Modeled cost of emitting boxes one token at a time.
struct AutoregressiveCostModel {
  double per_token_ms = 0.5;
  int tokens_per_box = 20;

  double cost_ms(int targets) const { return per_token_ms * tokens_per_box * targets; }
};

struct LatencyOptions {
  std::vector<int> target_counts = {1, 2, 5, 10, 15, 20};
  int scenes_per_count = 4;
  int rounds = 30;  // each round times every scene once, interleaving counts
  int num_proposals = 32;
  std::uint64_t seed = 0;
  AutoregressiveCostModel cost;
};

struct LatencyRow {
  int targets = 0;
  int proposals = 0;
  int sequence_length = 0;
  double selection_ms = 0.0;  // mean wall time of one selector forward pass
  double selection_stddev_ms = 0.0;
  double autoregressive_ms = 0.0;  // modeled
};

// Times one-pass selection at fixed N and T across target counts.
std::vector<LatencyRow> bench_latency(const SelectorModel<double>& model, const SimulatedEncoder& encoder,
                                      const LatencyOptions& options = {});

// Least-squares slope of y on x.
double regression_slope(std::span<const double> x, std::span<const double> y);

std::string format_latency_table(std::span<const LatencyRow> rows);

}  // namespace vgent::selector
