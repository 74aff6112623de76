#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vgent/instance.hpp"
#include "vgent/reward.hpp"

namespace vgent::corpus {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kMaskRefToken = "<mask-ref>";
inline constexpr int kDefaultModelResolution = 840;

// Attribute vocabulary of the synthetic grounding task.
enum class Shape { kCircle, kSquare, kTriangle, kDiamond };
enum class Color { kRed, kGreen, kBlue, kYellow };
enum class SizeClass { kSmall, kLarge };

inline constexpr int kNumShapes = 4;
inline constexpr int kNumColors = 4;
inline constexpr int kNumSizes = 2;

std::string_view to_string(Shape s);
std::string_view to_string(Color c);
std::string_view to_string(SizeClass s);

struct SceneObject {
  Shape shape = Shape::kCircle;
  Color color = Color::kRed;
  SizeClass size = SizeClass::kSmall;
  BBox bbox;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

// Conjunction of attribute constraints; absent fields are unconstrained.
struct AttributeQuery {
  std::optional<Shape> shape;
  std::optional<Color> color;
  std::optional<SizeClass> size;

  bool matches(const SceneObject& o) const;
  std::string describe() const;
  friend bool operator==(const AttributeQuery&, const AttributeQuery&) = default;
};

// Object-level description carried by synthetic scenes only.
struct SceneLayout {
  std::vector<SceneObject> objects;
  AttributeQuery query;
  friend bool operator==(const SceneLayout&, const SceneLayout&) = default;
};

struct Scene {
  std::string scene_id;
  int image_width = 0;
  int image_height = 0;
  std::string query;
  std::vector<BitMask> visual_refs;
  std::vector<Instance> gt_instances;
  std::optional<SceneLayout> layout;

  bool has_visual_ref() const { return !visual_refs.empty(); }
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct ProposalGroup {
  std::string detector;
  std::vector<Proposal> proposals;  // each proposal's source equals detector
  friend bool operator==(const ProposalGroup&, const ProposalGroup&) = default;
};

struct ProposalSet {
  std::string scene_id;
  std::vector<ProposalGroup> groups;

  // Concatenation in group order.
  std::vector<Proposal> flatten() const;
  std::size_t size() const;
  friend bool operator==(const ProposalSet&, const ProposalSet&) = default;
};

struct PredictionRecord {
  std::string scene_id;
  std::vector<Instance> instances;
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Ground truth plus response text for one reward computation.
struct RewardRequest {
  std::string id;
  double image_width = 0;
  double image_height = 0;
  std::vector<reward::GtInstance> gt;
  std::string prediction_text;
};

// --- JSON mapping -----------------------------------------------------------

Json box_to_json(const BBox& b);
BBox box_from_json(const Json& j);

Json to_json(const Scene& s);
Scene scene_from_json(const Json& j);

// One record per detector group.
std::vector<Json> to_json(const ProposalSet& p);
Json to_json(const PredictionRecord& p);
PredictionRecord prediction_from_json(const Json& j);

Json to_json(const RewardRequest& r);
RewardRequest reward_request_from_json(const Json& j);
Json to_json(const std::string& id, const reward::RewardBreakdown& r);

// --- JSONL files --------------------------------------------------------------

// A parse failure tagged with its 1-based line number.
struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct JsonLines {
  std::vector<std::pair<std::size_t, Json>> records;  // (line number, value)
  std::vector<LineError> errors;
};

JsonLines read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);
std::string dump_line(const Json& j);

std::vector<Scene> read_scenes(const std::filesystem::path& path);
void write_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes);

// Records for the same scene_id are grouped in file order.
std::vector<ProposalSet> read_proposals(const std::filesystem::path& path);
void write_proposals(const std::filesystem::path& path, const std::vector<ProposalSet>& sets);

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& preds);

// --- Operations ---------------------------------------------------------------

// Replaces each <mask-ref> with the tight box of the matching visual
// reference, rescaled to model_resolution and floored: "[x1, y1, x2, y2]".
std::string convert_mask_ref(const Scene& scene, int model_resolution = kDefaultModelResolution);

// Concatenates proposal sets of one scene, preserving order and sources.
ProposalSet merge_proposals(std::span<const ProposalSet> sets);

struct SyntheticSpec {
  int num_scenes = 100;
  int image_size = 240;
  int grid = 6;  // objects occupy distinct cells of a grid x grid layout
  int min_targets = 1;
  int max_targets = 20;
  double no_target_fraction = 0.1;
  int min_distractors = 2;
  int max_distractors = 8;
  int num_proposals = 32;
  double exact_proposal_rate = 0.5;
  double min_jitter_iou = 0.7;
  double visual_ref_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticSample {
  Scene scene;
  ProposalSet proposals;
};

// Pure function of the spec (including its seed).
std::vector<SyntheticSample> generate_synthetic_corpus(const SyntheticSpec& spec);

// Raster of a shape inscribed in an integer-aligned box.
BitMask render_shape(Shape shape, const BBox& box, int width, int height);

// A decoration whose annotated mask is a blob plus a thin attached string,
// with proposals that cover the blob and the string separately.
SyntheticSample decoration_fixture();

}  // namespace vgent::corpus
