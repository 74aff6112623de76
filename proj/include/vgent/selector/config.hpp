#pragma once

#include <cstdint>
#include <string>

namespace vgent::selector {

struct SelectorConfig {
  int num_layers = 4;
  int hidden_dim = 64;
  int heads = 4;
  int ffn_dim = 128;
  int num_learnable_queries = 10;  // first half regress target count, second half positive count
  int max_objects = 32;            // encoder object slots; unused slots hold padding tokens
  int query_tokens = 3;
  double presence_threshold = 0.5;
  double bce_weight = 1.0;
  double l1_weight = 10.0;
  double count_scale = 1000.0;  // count targets are divided by this
  bool init_from_encoder = true;
  bool use_mask_weights = false;  // weight mask BCE by 1 + IoA

  // Training.
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 2e-3;
  double final_learning_rate = 0.0;  // linear decay target
  int warmup_steps = 100;
  double grad_clip = 1.0;

  std::uint64_t seed = 0;          // decoder init and shuffling
  std::uint64_t encoder_seed = 7;  // frozen encoder parameters

  int sequence_length() const { return max_objects + query_tokens; }
  int group_size() const { return num_learnable_queries / 2; }

  // Throws InputError when the shape constraints do not hold.
  void validate() const;

  std::string to_json() const;
  static SelectorConfig from_json(const std::string& text);
};

}  // namespace vgent::selector
