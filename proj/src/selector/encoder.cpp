#include "vgent/selector/encoder.hpp"

#include <json.hpp>

#include "vgent/error.hpp"

namespace vgent::selector {

namespace {

enum TokenType { kObject = 0, kPad = 1, kQueryShape = 2, kQueryColor = 3, kQuerySize = 4 };

constexpr double kEmbedNorm = 2.0;
constexpr double kRelevanceNorm = 3.0;
constexpr double kPositionScale = 4.0;

Mat<double> random_table(Rng& rng, int rows, int dim, double norm) {
  Mat<double> m(rows, dim);
  fill_normal(m, rng, norm / std::sqrt(static_cast<double>(dim)));
  return m;
}

template <typename M>
void hash_bytes(std::uint64_t& h, const M& m) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace

void SelectorConfig::validate() const {
  if (num_layers < 1 || hidden_dim < 1 || heads < 1 || ffn_dim < 1)
    throw InputError("selector dimensions must be positive");
  if (hidden_dim % heads != 0) throw InputError("hidden_dim must be divisible by heads");
  if (num_learnable_queries < 2 || num_learnable_queries % 2 != 0)
    throw InputError("num_learnable_queries must be even and positive");
  if (max_objects < 1 || query_tokens != 3) throw InputError("invalid encoder token layout");
  if (batch_size < 1 || epochs < 0) throw InputError("invalid training schedule");
}

std::string SelectorConfig::to_json() const {
  nlohmann::ordered_json j;
  j["num_layers"] = num_layers;
  j["hidden_dim"] = hidden_dim;
  j["heads"] = heads;
  j["ffn_dim"] = ffn_dim;
  j["num_learnable_queries"] = num_learnable_queries;
  j["max_objects"] = max_objects;
  j["query_tokens"] = query_tokens;
  j["presence_threshold"] = presence_threshold;
  j["bce_weight"] = bce_weight;
  j["l1_weight"] = l1_weight;
  j["count_scale"] = count_scale;
  j["init_from_encoder"] = init_from_encoder;
  j["use_mask_weights"] = use_mask_weights;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["final_learning_rate"] = final_learning_rate;
  j["warmup_steps"] = warmup_steps;
  j["grad_clip"] = grad_clip;
  j["seed"] = seed;
  j["encoder_seed"] = encoder_seed;
  return j.dump();
}

SelectorConfig SelectorConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InputError("selector config is not a JSON object");
  SelectorConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j[key].get<std::remove_reference_t<decltype(dst)>>();
  };
  get("num_layers", c.num_layers);
  get("hidden_dim", c.hidden_dim);
  get("heads", c.heads);
  get("ffn_dim", c.ffn_dim);
  get("num_learnable_queries", c.num_learnable_queries);
  get("max_objects", c.max_objects);
  get("query_tokens", c.query_tokens);
  get("presence_threshold", c.presence_threshold);
  get("bce_weight", c.bce_weight);
  get("l1_weight", c.l1_weight);
  get("count_scale", c.count_scale);
  get("init_from_encoder", c.init_from_encoder);
  get("use_mask_weights", c.use_mask_weights);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("learning_rate", c.learning_rate);
  get("final_learning_rate", c.final_learning_rate);
  get("warmup_steps", c.warmup_steps);
  get("grad_clip", c.grad_clip);
  get("seed", c.seed);
  get("encoder_seed", c.encoder_seed);
  c.validate();
  return c;
}

SimulatedEncoder::SimulatedEncoder(const SelectorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int dim = cfg_.hidden_dim;
  Rng rng(cfg_.encoder_seed);
  shape_table_ = random_table(rng, corpus::kNumShapes + 1, dim, kEmbedNorm);
  color_table_ = random_table(rng, corpus::kNumColors + 1, dim, kEmbedNorm);
  size_table_ = random_table(rng, corpus::kNumSizes + 1, dim, kEmbedNorm);
  type_table_ = random_table(rng, 5, dim, kEmbedNorm);
  position_ = random_table(rng, 5, dim, 1.0);
  relevance_ = random_table(rng, 1, dim, kRelevanceNorm);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    EncoderLayer<double> layer(dim, cfg_.heads, cfg_.ffn_dim);
    layer.attn.init(rng);
    layer.ffn.in.init(rng);
    layer.ffn.out.init(rng, 0.5);
    layers_.push_back(std::move(layer));
  }
}

RowVec<double> SimulatedEncoder::box_features(const BBox& b, double width, double height) const {
  Eigen::Matrix<double, 1, 5> f;
  f(0) = (b.x1 / width - 0.5) * kPositionScale;
  f(1) = (b.y1 / height - 0.5) * kPositionScale;
  f(2) = (b.x2 / width - 0.5) * kPositionScale;
  f(3) = (b.y2 / height - 0.5) * kPositionScale;
  f(4) = 0.25 * f.head<4>().squaredNorm();
  return f * position_;
}

Mat<double> SimulatedEncoder::embed(const corpus::Scene& scene) const {
  if (!scene.layout) throw InputError("scene " + scene.scene_id + " carries no object layout");
  const auto& layout = *scene.layout;
  if (static_cast<int>(layout.objects.size()) > cfg_.max_objects)
    throw InputError("scene has more objects than encoder slots");
  const int dim = cfg_.hidden_dim;
  Mat<double> tokens(cfg_.sequence_length(), dim);
  const double w = scene.image_width, h = scene.image_height;
  for (int k = 0; k < cfg_.max_objects; ++k) {
    if (k < static_cast<int>(layout.objects.size())) {
      const auto& o = layout.objects[k];
      tokens.row(k) = type_table_.row(kObject) + shape_table_.row(static_cast<int>(o.shape)) +
                      color_table_.row(static_cast<int>(o.color)) +
                      size_table_.row(static_cast<int>(o.size)) + box_features(o.bbox, w, h);
      if (layout.query.matches(o)) tokens.row(k) += relevance_.row(0);
    } else {
      tokens.row(k) = type_table_.row(kPad);
    }
  }
  const int q0 = cfg_.max_objects;
  const auto& q = layout.query;
  tokens.row(q0) = type_table_.row(kQueryShape) +
                   shape_table_.row(q.shape ? static_cast<int>(*q.shape) : corpus::kNumShapes);
  tokens.row(q0 + 1) = type_table_.row(kQueryColor) +
                       color_table_.row(q.color ? static_cast<int>(*q.color) : corpus::kNumColors);
  tokens.row(q0 + 2) = type_table_.row(kQuerySize) +
                       size_table_.row(q.size ? static_cast<int>(*q.size) : corpus::kNumSizes);
  return tokens;
}

EncoderStates<double> SimulatedEncoder::encode(const corpus::Scene& scene) const {
  EncoderStates<double> states;
  states.reserve(layers_.size() + 1);
  states.push_back(embed(scene));
  for (const auto& layer : layers_) states.push_back(layer.forward(states.back()));
  return states;
}

std::uint64_t SimulatedEncoder::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto* m : {&shape_table_, &color_table_, &size_table_, &type_table_, &position_, &relevance_})
    hash_bytes(h, *m);
  for (auto layer : layers_)
    layer.for_each("", [&](const std::string&, const auto& m) { hash_bytes(h, m); });
  return h;
}

}  // namespace vgent::selector
