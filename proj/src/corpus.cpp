#include "vgent/corpus.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace vgent::corpus {

namespace {

template <typename Enum, std::size_t N>
Enum enum_from_string(std::string_view s, const std::array<std::string_view, N>& names,
                      const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  throw InputError(std::string("unknown ") + what + ": " + std::string(s));
}

constexpr std::array<std::string_view, kNumShapes> kShapeNames = {"circle", "square", "triangle",
                                                                  "diamond"};
constexpr std::array<std::string_view, kNumColors> kColorNames = {"red", "green", "blue",
                                                                  "yellow"};
constexpr std::array<std::string_view, kNumSizes> kSizeNames = {"small", "large"};

void check_schema(const Json& j) {
  if (!j.is_object()) throw InputError("record is not a JSON object");
  if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion)
    throw InputError("unsupported schema_version");
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string("field '") + key + "' has the wrong type");
  }
}

Json mask_to_json(const std::optional<BitMask>& m) {
  return m ? Json(m->to_rle_text()) : Json(nullptr);
}

std::optional<BitMask> mask_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_string()) throw InputError("mask must be an RLE string or null");
  return BitMask::from_rle_text(j.get<std::string>());
}

Json point_to_json(const PointXY& p) { return Json::array({p.x, p.y}); }

PointXY point_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InputError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json instance_to_json(const Instance& i) {
  Json j;
  j["bbox"] = box_to_json(i.bbox);
  j["mask"] = mask_to_json(i.mask);
  return j;
}

Instance instance_from_json(const Json& j) {
  Instance i;
  i.bbox = box_from_json(field<Json>(j, "bbox"));
  i.mask = j.contains("mask") ? mask_from_json(j["mask"]) : std::nullopt;
  return i;
}

std::string format_error(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

template <typename T, typename F>
std::vector<T> read_records(const std::filesystem::path& path, F&& convert) {
  const JsonLines lines = read_jsonl(path);
  if (!lines.errors.empty())
    throw InputError(format_error(lines.errors.front().line, lines.errors.front().message));
  std::vector<T> out;
  for (const auto& [line, j] : lines.records) {
    try {
      out.push_back(convert(j));
    } catch (const std::exception& e) {
      throw InputError(format_error(line, e.what()));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Shape s) { return kShapeNames[static_cast<int>(s)]; }
std::string_view to_string(Color c) { return kColorNames[static_cast<int>(c)]; }
std::string_view to_string(SizeClass s) { return kSizeNames[static_cast<int>(s)]; }

bool AttributeQuery::matches(const SceneObject& o) const {
  return (!shape || *shape == o.shape) && (!color || *color == o.color) &&
         (!size || *size == o.size);
}

std::string AttributeQuery::describe() const {
  std::string s = "all";
  if (size) s += " " + std::string(to_string(*size));
  if (color) s += " " + std::string(to_string(*color));
  s += shape ? " " + std::string(to_string(*shape)) + "s" : " objects";
  return s;
}

std::vector<Proposal> ProposalSet::flatten() const {
  std::vector<Proposal> out;
  for (const auto& g : groups) out.insert(out.end(), g.proposals.begin(), g.proposals.end());
  return out;
}

std::size_t ProposalSet::size() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.proposals.size();
  return n;
}

Json box_to_json(const BBox& b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

BBox box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw InputError("bbox must be [x1, y1, x2, y2]");
  for (const auto& v : j)
    if (!v.is_number()) throw InputError("bbox coordinates must be numbers");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  require_valid(b);
  return b;
}

Json to_json(const Scene& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scene_id"] = s.scene_id;
  j["image_width"] = s.image_width;
  j["image_height"] = s.image_height;
  j["query"] = s.query;
  j["visual_refs"] = Json::array();
  for (const auto& m : s.visual_refs) j["visual_refs"].push_back(m.to_rle_text());
  j["gt"] = Json::array();
  for (const auto& g : s.gt_instances) j["gt"].push_back(instance_to_json(g));
  if (s.layout) {
    Json q = Json::object();
    if (s.layout->query.shape) q["shape"] = to_string(*s.layout->query.shape);
    if (s.layout->query.color) q["color"] = to_string(*s.layout->query.color);
    if (s.layout->query.size) q["size"] = to_string(*s.layout->query.size);
    Json objs = Json::array();
    for (const auto& o : s.layout->objects) {
      Json oj;
      oj["shape"] = to_string(o.shape);
      oj["color"] = to_string(o.color);
      oj["size"] = to_string(o.size);
      oj["bbox"] = box_to_json(o.bbox);
      objs.push_back(std::move(oj));
    }
    j["layout"] = Json{{"query", std::move(q)}, {"objects", std::move(objs)}};
  }
  return j;
}

Scene scene_from_json(const Json& j) {
  check_schema(j);
  Scene s;
  s.scene_id = field<std::string>(j, "scene_id");
  s.image_width = field<int>(j, "image_width");
  s.image_height = field<int>(j, "image_height");
  if (s.image_width <= 0 || s.image_height <= 0) throw InputError("image dims must be positive");
  s.query = field<std::string>(j, "query");
  if (j.contains("visual_refs")) {
    for (const auto& r : j["visual_refs"]) {
      auto m = mask_from_json(r);
      if (!m) throw InputError("visual_refs entries must be RLE strings");
      s.visual_refs.push_back(std::move(*m));
    }
  }
  for (const auto& g : field<Json>(j, "gt")) s.gt_instances.push_back(instance_from_json(g));
  for (const auto& m : s.visual_refs)
    if (m.width() != s.image_width || m.height() != s.image_height)
      throw InputError("visual_ref mask does not match image dims");
  for (const auto& g : s.gt_instances)
    if (g.mask && (g.mask->width() != s.image_width || g.mask->height() != s.image_height))
      throw InputError("gt mask does not match image dims");
  if (j.contains("layout")) {
    const Json& l = j["layout"];
    SceneLayout layout;
    const Json q = field<Json>(l, "query");
    if (q.contains("shape"))
      layout.query.shape = enum_from_string<Shape>(q["shape"].get<std::string>(), kShapeNames, "shape");
    if (q.contains("color"))
      layout.query.color = enum_from_string<Color>(q["color"].get<std::string>(), kColorNames, "color");
    if (q.contains("size"))
      layout.query.size = enum_from_string<SizeClass>(q["size"].get<std::string>(), kSizeNames, "size");
    for (const auto& oj : field<Json>(l, "objects")) {
      SceneObject o;
      o.shape = enum_from_string<Shape>(field<std::string>(oj, "shape"), kShapeNames, "shape");
      o.color = enum_from_string<Color>(field<std::string>(oj, "color"), kColorNames, "color");
      o.size = enum_from_string<SizeClass>(field<std::string>(oj, "size"), kSizeNames, "size");
      o.bbox = box_from_json(field<Json>(oj, "bbox"));
      layout.objects.push_back(o);
    }
    s.layout = std::move(layout);
  }
  return s;
}

std::vector<Json> to_json(const ProposalSet& p) {
  std::vector<Json> out;
  for (const auto& g : p.groups) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["scene_id"] = p.scene_id;
    j["detector"] = g.detector;
    j["proposals"] = Json::array();
    for (const auto& prop : g.proposals) {
      Json pj;
      pj["bbox"] = box_to_json(prop.bbox);
      pj["mask"] = mask_to_json(prop.mask);
      pj["score"] = prop.score ? Json(*prop.score) : Json(nullptr);
      j["proposals"].push_back(std::move(pj));
    }
    out.push_back(std::move(j));
  }
  return out;
}

Json to_json(const PredictionRecord& p) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scene_id"] = p.scene_id;
  j["instances"] = Json::array();
  for (const auto& i : p.instances) j["instances"].push_back(instance_to_json(i));
  return j;
}

PredictionRecord prediction_from_json(const Json& j) {
  check_schema(j);
  PredictionRecord p;
  p.scene_id = field<std::string>(j, "scene_id");
  for (const auto& i : field<Json>(j, "instances")) p.instances.push_back(instance_from_json(i));
  return p;
}

Json to_json(const RewardRequest& r) {
  Json j;
  j["id"] = r.id;
  j["image_width"] = r.image_width;
  j["image_height"] = r.image_height;
  j["gt"] = Json::array();
  for (const auto& g : r.gt)
    j["gt"].push_back(Json{{"bbox", box_to_json(g.bbox)}, {"centroid", point_to_json(g.centroid)}});
  j["prediction_text"] = r.prediction_text;
  return j;
}

RewardRequest reward_request_from_json(const Json& j) {
  check_schema(j);
  RewardRequest r;
  r.id = j.contains("id") && j["id"].is_number() ? j["id"].dump() : field<std::string>(j, "id");
  r.image_width = field<double>(j, "image_width");
  r.image_height = field<double>(j, "image_height");
  if (!(r.image_width > 0) || !(r.image_height > 0))
    throw InputError("image dims must be positive");
  if (j.contains("gt")) {
    for (const auto& g : j["gt"]) {
      reward::GtInstance inst;
      inst.bbox = box_from_json(field<Json>(g, "bbox"));
      inst.centroid = g.contains("centroid") ? point_from_json(g["centroid"]) : bbox_center(inst.bbox);
      r.gt.push_back(inst);
    }
  }
  if (j.contains("prediction_text")) r.prediction_text = field<std::string>(j, "prediction_text");
  return r;
}

Json to_json(const std::string& id, const reward::RewardBreakdown& r) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = id;
  j["r_tags"] = r.r_tags;
  j["r_counts_valid"] = r.r_counts_valid;
  j["r_json"] = r.r_json;
  j["r_count_match"] = r.r_count_match;
  j["r_det"] = r.r_det;
  j["r_total"] = r.r_total;
  j["per_pair"] = Json::array();
  for (const auto& p : r.per_pair)
    j["per_pair"].push_back(Json{{"gt", p.gt},
                                 {"pred", p.pred},
                                 {"r_iou", p.r_iou},
                                 {"r_l1", p.r_l1},
                                 {"r_point", p.r_point}});
  return j;
}

JsonLines read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  JsonLines out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      out.errors.push_back({n, "malformed JSON"});
      continue;
    }
    out.records.emplace_back(n, std::move(j));
  }
  return out;
}

std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& r : records) out << dump_line(r) << '\n';
}

std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  return read_records<Scene>(path, [](const Json& j) { return scene_from_json(j); });
}

void write_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::vector<Json> records;
  for (const auto& s : scenes) records.push_back(to_json(s));
  write_jsonl(path, records);
}

std::vector<ProposalSet> read_proposals(const std::filesystem::path& path) {
  struct Raw {
    std::string scene_id;
    ProposalGroup group;
  };
  const auto raws = read_records<Raw>(path, [](const Json& j) {
    check_schema(j);
    Raw r;
    r.scene_id = field<std::string>(j, "scene_id");
    r.group.detector = j.contains("detector") ? field<std::string>(j, "detector") : "";
    for (const auto& pj : field<Json>(j, "proposals")) {
      Proposal p;
      p.bbox = box_from_json(field<Json>(pj, "bbox"));
      p.mask = pj.contains("mask") ? mask_from_json(pj["mask"]) : std::nullopt;
      if (pj.contains("score") && !pj["score"].is_null()) p.score = pj["score"].get<double>();
      p.source = r.group.detector;
      r.group.proposals.push_back(std::move(p));
    }
    return r;
  });
  std::vector<ProposalSet> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : raws) {
    auto [it, inserted] = index.try_emplace(r.scene_id, out.size());
    if (inserted) out.push_back({r.scene_id, {}});
    out[it->second].groups.push_back(r.group);
  }
  return out;
}

void write_proposals(const std::filesystem::path& path, const std::vector<ProposalSet>& sets) {
  std::vector<Json> records;
  for (const auto& s : sets)
    for (auto& j : to_json(s)) records.push_back(std::move(j));
  write_jsonl(path, records);
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  return read_records<PredictionRecord>(path,
                                        [](const Json& j) { return prediction_from_json(j); });
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& preds) {
  std::vector<Json> records;
  for (const auto& p : preds) records.push_back(to_json(p));
  write_jsonl(path, records);
}

std::string convert_mask_ref(const Scene& scene, int model_resolution) {
  std::size_t tokens = 0;
  for (auto pos = scene.query.find(kMaskRefToken); pos != std::string::npos;
       pos = scene.query.find(kMaskRefToken, pos + kMaskRefToken.size()))
    ++tokens;
  if (tokens != scene.visual_refs.size())
    throw InputError("number of <mask-ref> tokens does not match visual_refs");

  const double sx = static_cast<double>(model_resolution) / scene.image_width;
  const double sy = static_cast<double>(model_resolution) / scene.image_height;
  std::string out;
  std::size_t cursor = 0;
  for (const auto& ref : scene.visual_refs) {
    const auto pos = scene.query.find(kMaskRefToken, cursor);
    const BBox b = mask_to_bbox(ref);
    std::ostringstream coords;
    coords << '[' << static_cast<long long>(std::floor(b.x1 * sx)) << ", "
           << static_cast<long long>(std::floor(b.y1 * sy)) << ", "
           << static_cast<long long>(std::floor(b.x2 * sx)) << ", "
           << static_cast<long long>(std::floor(b.y2 * sy)) << ']';
    out += scene.query.substr(cursor, pos - cursor);
    out += coords.str();
    cursor = pos + kMaskRefToken.size();
  }
  out += scene.query.substr(cursor);
  return out;
}

ProposalSet merge_proposals(std::span<const ProposalSet> sets) {
  if (sets.empty()) throw InputError("merge_proposals needs at least one proposal set");
  ProposalSet out{sets.front().scene_id, {}};
  for (const auto& s : sets) {
    if (s.scene_id != out.scene_id) throw InputError("merge_proposals: scene_id mismatch");
    out.groups.insert(out.groups.end(), s.groups.begin(), s.groups.end());
  }
  return out;
}

}  // namespace vgent::corpus
