// vgent: command-line front end for rewards, labeling, evaluation, oracle
// selection, selector training and inference, and corpus utilities.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vgent/corpus.hpp"
#include "vgent/labeling.hpp"
#include "vgent/metrics.hpp"
#include "vgent/reward.hpp"
#include "vgent/selector/checkpoint.hpp"
#include "vgent/selector/latency.hpp"
#include "vgent/selector/train.hpp"

namespace fs = std::filesystem;
using vgent::corpus::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRecordErrors = 1;
constexpr int kExitInputError = 2;

// Relative paths resolve against $VGENT_DATA_DIR when it is set.
fs::path data_path(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || p == "-") return path;
  if (const char* dir = std::getenv("VGENT_DATA_DIR"); dir && *dir) return fs::path(dir) / path;
  return path;
}

fs::path existing_input(const std::string& p) {
  const fs::path path = data_path(p);
  if (!fs::exists(path)) throw vgent::InputError("input not found: " + path.string());
  return path;
}

void write_text(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(data_path(out), std::ios::binary);
  if (!f) throw vgent::InputError("cannot write " + data_path(out).string());
  f << text;
}

std::string join_lines(const std::vector<Json>& records) {
  std::string s;
  for (const auto& r : records) s += vgent::corpus::dump_line(r) + "\n";
  return s;
}

Json line_error(std::size_t line, const std::string& message) {
  Json j;
  j["line"] = line;
  j["error"] = message;
  return j;
}

Json record_error(const std::string& id_key, const std::string& id, const std::string& message) {
  Json j;
  j[id_key] = id;
  j["error"] = message;
  return j;
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---------------------------------------------------------------- reward ----

struct RewardArgs {
  std::string gt, pred, out, format = "table", coords = "pixels";
};

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

int cmd_reward(const RewardArgs& a) {
  using namespace vgent;
  const auto gt_lines = corpus::read_jsonl(existing_input(a.gt));
  const auto pred_lines = corpus::read_jsonl(existing_input(a.pred));
  const auto space = a.coords == "norm1000" ? reward::CoordinateSpace::kNormalized1000
                                            : reward::CoordinateSpace::kPixels;
  std::vector<Json> out;
  int errors = 0;
  for (const auto& e : gt_lines.errors) out.push_back(line_error(e.line, "ground truth: " + e.message)), ++errors;
  for (const auto& e : pred_lines.errors) out.push_back(line_error(e.line, "prediction: " + e.message)), ++errors;

  std::map<std::string, std::string> responses;
  for (const auto& [line, j] : pred_lines.records) {
    try {
      if (!j.is_object() || !j.contains("id")) throw InputError("missing field 'id'");
      const std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      const Json text = j.value("prediction_text", Json(""));
      if (!text.is_string()) throw InputError("field 'prediction_text' has the wrong type");
      if (!responses.emplace(id, text.get<std::string>()).second)
        throw InputError("duplicate prediction id " + id);
    } catch (const std::exception& e) {
      out.push_back(line_error(line, std::string("prediction: ") + e.what()));
      ++errors;
    }
  }

  std::vector<double> totals;
  std::array<double, 6> sums{};
  for (const auto& [line, j] : gt_lines.records) {
    corpus::RewardRequest req;
    try {
      req = corpus::reward_request_from_json(j);
    } catch (const std::exception& e) {
      out.push_back(line_error(line, std::string("ground truth: ") + e.what()));
      ++errors;
      continue;
    }
    const auto it = responses.find(req.id);
    if (it == responses.end()) {
      out.push_back(record_error("id", req.id, "no prediction for this id"));
      ++errors;
      continue;
    }
    reward::GtTargets targets{req.gt, req.image_width, req.image_height};
    const auto r = reward::total_reward(it->second, targets, space);
    out.push_back(corpus::to_json(req.id, r));
    totals.push_back(r.r_total);
    const std::array<double, 6> parts{r.r_tags, r.r_counts_valid, r.r_json, r.r_count_match, r.r_det, r.r_total};
    for (std::size_t k = 0; k < parts.size(); ++k) sums[k] += parts[k];
  }
  write_text(a.out, join_lines(out));

  const double n = static_cast<double>(std::max<std::size_t>(1, totals.size()));
  const char* names[] = {"r_tags", "r_counts_valid", "r_json", "r_count_match", "r_det", "r_total"};
  if (a.format == "json") {
    Json s;
    s["samples"] = totals.size();
    s["errors"] = errors;
    for (std::size_t k = 0; k < 6; ++k) s["mean"][names[k]] = totals.empty() ? 0.0 : sums[k] / n;
    s["r_total_percentiles"] = Json{{"p10", percentile(totals, 0.1)},
                                    {"p50", percentile(totals, 0.5)},
                                    {"p90", percentile(totals, 0.9)},
                                    {"min", totals.empty() ? 0.0 : *std::min_element(totals.begin(), totals.end())},
                                    {"max", totals.empty() ? 0.0 : *std::max_element(totals.begin(), totals.end())}};
    std::cerr << s.dump(2) << "\n";
  } else {
    std::cerr << "samples " << totals.size() << "  errors " << errors << "\n";
    for (std::size_t k = 0; k < 6; ++k)
      std::cerr << "mean " << names[k] << " " << fmt(totals.empty() ? 0.0 : sums[k] / n) << "\n";
    std::cerr << "r_total p10 " << fmt(percentile(totals, 0.1)) << "  p50 " << fmt(percentile(totals, 0.5))
              << "  p90 " << fmt(percentile(totals, 0.9)) << "\n";
  }
  return errors ? kExitRecordErrors : kExitOk;
}

// ----------------------------------------------------------------- label ----

struct LabelArgs {
  std::string scenes, proposals, out;
  double box_thresh = vgent::labeling::kBoxThreshold;
  double mask_thresh = vgent::labeling::kMaskThreshold;
};

std::map<std::string, vgent::corpus::Scene> index_scenes(const std::vector<vgent::corpus::Scene>& scenes) {
  std::map<std::string, vgent::corpus::Scene> m;
  for (const auto& s : scenes)
    if (!m.emplace(s.scene_id, s).second) throw vgent::InputError("duplicate scene_id " + s.scene_id);
  return m;
}

int cmd_label(const LabelArgs& a) {
  using namespace vgent;
  const auto scenes = index_scenes(corpus::read_scenes(existing_input(a.scenes)));
  const auto sets = corpus::read_proposals(existing_input(a.proposals));
  std::vector<Json> out;
  int errors = 0;
  for (const auto& set : sets) {
    const auto it = scenes.find(set.scene_id);
    if (it == scenes.end()) {
      out.push_back(record_error("scene_id", set.scene_id, "unknown scene"));
      ++errors;
      continue;
    }
    const auto& scene = it->second;
    const auto proposals = set.flatten();
    try {
      const labeling::GroundTruth gt{scene.gt_instances, scene.image_width, scene.image_height};
      const auto labels = labeling::assign_labels(proposals, gt, a.box_thresh, a.mask_thresh);
      Json j;
      j["schema_version"] = corpus::kSchemaVersion;
      j["scene_id"] = set.scene_id;
      j["labels"] = Json::array();
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& l = labels[i];
        j["labels"].push_back(Json{{"index", i},
                                   {"source", proposals[i].source},
                                   {"box_positive", l.box_positive},
                                   {"mask_positive", l.mask_positive},
                                   {"best_iou", l.best_iou},
                                   {"ioa", l.ioa},
                                   {"degenerate", l.degenerate},
                                   {"weight", l.weight}});
      }
      out.push_back(std::move(j));
    } catch (const std::exception& e) {
      out.push_back(record_error("scene_id", set.scene_id, e.what()));
      ++errors;
    }
  }
  write_text(a.out, join_lines(out));
  return errors ? kExitRecordErrors : kExitOk;
}

// ------------------------------------------------------------------ eval ----

Json metrics_json(const vgent::metrics::Metrics& m) {
  Json j;
  j["samples"] = m.samples;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["macro_f1"] = m.macro_f1;
  j["giou"] = m.giou;
  j["ciou"] = m.ciou;
  j["n_acc"] = m.n_acc ? Json(*m.n_acc) : Json(nullptr);
  return j;
}

struct SplitReport {
  std::string name;
  std::optional<vgent::metrics::MetricsReport> report;
};

std::vector<SplitReport> split_reports(const std::vector<vgent::metrics::SampleEval>& samples, bool split,
                                       const vgent::metrics::EvalOptions& opts) {
  using vgent::metrics::SampleEval;
  std::vector<SplitReport> out;
  if (split) {
    std::vector<SampleEval> without, with;
    for (const auto& s : samples) (s.has_visual_ref ? with : without).push_back(s);
    out.push_back({"without_ref", without.empty() ? std::nullopt
                                                  : std::optional(vgent::metrics::evaluate(without, opts))});
    out.push_back({"with_ref", with.empty() ? std::nullopt : std::optional(vgent::metrics::evaluate(with, opts))});
  }
  out.push_back({"overall", samples.empty() ? std::nullopt : std::optional(vgent::metrics::evaluate(samples, opts))});
  return out;
}

std::string render_report(const std::vector<SplitReport>& splits, const std::string& format) {
  using vgent::metrics::kBucketNames;
  if (format == "json") {
    Json j;
    j["schema_version"] = vgent::corpus::kSchemaVersion;
    for (const auto& s : splits) {
      if (!s.report) {
        j["splits"][s.name] = nullptr;
        continue;
      }
      Json r = metrics_json(s.report->overall);
      for (std::size_t b = 0; b < kBucketNames.size(); ++b)
        r["buckets"][kBucketNames[b]] = s.report->buckets[b] ? metrics_json(*s.report->buckets[b]) : Json(nullptr);
      j["splits"][s.name] = std::move(r);
    }
    return j.dump(2) + "\n";
  }
  std::string t;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-8s %7s %7s %7s %7s %8s %7s %7s %7s\n", "split", "bucket", "samples",
                "F1", "P", "R", "macroF1", "gIoU", "cIoU", "N-acc");
  t += line;
  auto row = [&](const std::string& split, const std::string& bucket, const vgent::metrics::Metrics* m) {
    if (!m) {
      std::snprintf(line, sizeof line, "%-12s %-8s %7s\n", split.c_str(), bucket.c_str(), "absent");
    } else {
      const std::string nacc = m->n_acc ? fmt(*m->n_acc * 100, "%.2f") : "-";
      std::snprintf(line, sizeof line, "%-12s %-8s %7d %7.2f %7.2f %7.2f %8.2f %7.2f %7.2f %7s\n", split.c_str(),
                    bucket.c_str(), m->samples, m->f1 * 100, m->precision * 100, m->recall * 100,
                    m->macro_f1 * 100, m->giou * 100, m->ciou * 100, nacc.c_str());
    }
    t += line;
  };
  for (const auto& s : splits) {
    if (!s.report) {
      row(s.name, "all", nullptr);
      continue;
    }
    row(s.name, "all", &s.report->overall);
    for (std::size_t b = 0; b < kBucketNames.size(); ++b)
      row(s.name, kBucketNames[b], s.report->buckets[b] ? &*s.report->buckets[b] : nullptr);
  }
  return t;
}

vgent::metrics::SampleEval make_sample(const vgent::corpus::Scene& scene, std::vector<vgent::Instance> preds) {
  vgent::metrics::SampleEval s;
  s.scene_id = scene.scene_id;
  s.image_width = scene.image_width;
  s.image_height = scene.image_height;
  s.has_visual_ref = scene.has_visual_ref();
  s.predictions = std::move(preds);
  s.ground_truth = scene.gt_instances;
  return s;
}

struct EvalArgs {
  std::string scenes, predictions, out, format = "table";
  bool split = false;
  bool box_raster = false;
};

int cmd_eval(const EvalArgs& a) {
  using namespace vgent;
  const auto scenes = corpus::read_scenes(existing_input(a.scenes));
  const auto preds = corpus::read_predictions(existing_input(a.predictions));
  std::map<std::string, std::vector<Instance>> by_id;
  std::vector<Json> errors;
  for (const auto& p : preds)
    if (!by_id.emplace(p.scene_id, p.instances).second)
      errors.push_back(record_error("scene_id", p.scene_id, "duplicate prediction record"));
  std::vector<metrics::SampleEval> samples;
  for (const auto& s : scenes) {
    const auto it = by_id.find(s.scene_id);
    if (it == by_id.end()) {
      errors.push_back(record_error("scene_id", s.scene_id, "no prediction for this scene"));
      continue;
    }
    samples.push_back(make_sample(s, it->second));
    by_id.erase(it);
  }
  for (const auto& [id, _] : by_id) errors.push_back(record_error("scene_id", id, "prediction for unknown scene"));
  for (const auto& e : errors) std::cerr << corpus::dump_line(e) << "\n";
  write_text(a.out, render_report(split_reports(samples, a.split, {a.box_raster}), a.format));
  return errors.empty() ? kExitOk : kExitRecordErrors;
}

// ---------------------------------------------------------------- oracle ----

struct OracleArgs {
  std::string scenes, proposals, out, report, mode = "f1", format = "table";
  bool box_raster = false;
};

int cmd_oracle(const OracleArgs& a) {
  using namespace vgent;
  const auto scenes = index_scenes(corpus::read_scenes(existing_input(a.scenes)));
  const auto sets = corpus::read_proposals(existing_input(a.proposals));
  const auto mode = a.mode == "mask" ? labeling::OracleMode::kMask : labeling::OracleMode::kF1;
  std::vector<corpus::PredictionRecord> records;
  std::vector<metrics::SampleEval> samples;
  int errors = 0;
  for (const auto& set : sets) {
    const auto it = scenes.find(set.scene_id);
    if (it == scenes.end()) {
      std::cerr << corpus::dump_line(record_error("scene_id", set.scene_id, "unknown scene")) << "\n";
      ++errors;
      continue;
    }
    const auto& scene = it->second;
    const auto proposals = set.flatten();
    const labeling::GroundTruth gt{scene.gt_instances, scene.image_width, scene.image_height};
    corpus::PredictionRecord rec{scene.scene_id, {}};
    for (int i : labeling::oracle_select(proposals, gt, mode))
      rec.instances.push_back({proposals[i].bbox, proposals[i].mask});
    samples.push_back(make_sample(scene, rec.instances));
    records.push_back(std::move(rec));
  }
  std::vector<Json> lines;
  for (const auto& r : records) lines.push_back(corpus::to_json(r));
  write_text(a.out, join_lines(lines));
  const std::string report = render_report(split_reports(samples, false, {a.box_raster}), a.format);
  if (a.report.empty())
    std::cerr << report;
  else
    write_text(a.report, report);
  return errors ? kExitRecordErrors : kExitOk;
}

// ------------------------------------------------------------- selector ----

struct ModelArgs {
  int layers = 4, hidden = 64, heads = 4, ffn = 128, queries = 10;
  int epochs = -1, batch = 8, warmup = -1;
  double lr = 2e-3, threshold = 0.5;
  bool random_init = false, mask_weights = false, double_precision = false;
};

vgent::selector::SelectorConfig make_config(const ModelArgs& m, std::uint64_t seed) {
  vgent::selector::SelectorConfig c;
  c.num_layers = m.layers;
  c.hidden_dim = m.hidden;
  c.heads = m.heads;
  c.ffn_dim = m.ffn;
  c.num_learnable_queries = m.queries;
  if (m.epochs >= 0) c.epochs = m.epochs;
  c.batch_size = m.batch;
  if (m.warmup >= 0) c.warmup_steps = m.warmup;
  c.learning_rate = m.lr;
  c.presence_threshold = m.threshold;
  c.init_from_encoder = !m.random_init;
  c.use_mask_weights = m.mask_weights;
  c.seed = seed;
  c.validate();
  return c;
}

std::vector<vgent::corpus::SyntheticSample> join_samples(const std::vector<vgent::corpus::Scene>& scenes,
                                                         const std::vector<vgent::corpus::ProposalSet>& sets) {
  std::map<std::string, const vgent::corpus::ProposalSet*> by_id;
  for (const auto& s : sets) by_id[s.scene_id] = &s;
  std::vector<vgent::corpus::SyntheticSample> out;
  for (const auto& s : scenes) {
    const auto it = by_id.find(s.scene_id);
    if (it == by_id.end()) throw vgent::InputError("no proposals for scene " + s.scene_id);
    out.push_back({s, *it->second});
  }
  return out;
}

struct TrainArgs {
  ModelArgs model;
  std::string scenes, proposals, heldout_scenes, heldout_proposals, checkpoint = "selector.ckpt", log;
  int num_train = 2000, num_heldout = 200;
};

int cmd_train(const TrainArgs& a, std::uint64_t seed) {
  using namespace vgent;
  const auto cfg = make_config(a.model, seed);
  const selector::SimulatedEncoder encoder(cfg);
  std::vector<corpus::SyntheticSample> train_samples, heldout_samples;
  if (!a.scenes.empty()) {
    if (a.proposals.empty()) throw InputError("--scenes requires --proposals");
    train_samples = join_samples(corpus::read_scenes(existing_input(a.scenes)),
                                 corpus::read_proposals(existing_input(a.proposals)));
    if (!a.heldout_scenes.empty())
      heldout_samples = join_samples(corpus::read_scenes(existing_input(a.heldout_scenes)),
                                     corpus::read_proposals(existing_input(a.heldout_proposals)));
  } else {
    corpus::SyntheticSpec spec;
    spec.num_scenes = a.num_train;
    spec.seed = seed * 2 + 1;
    train_samples = corpus::generate_synthetic_corpus(spec);
    spec.num_scenes = a.num_heldout;
    spec.seed = seed * 2 + 2;
    heldout_samples = corpus::generate_synthetic_corpus(spec);
  }
  const auto train_set = selector::prepare_examples(encoder, train_samples, cfg);
  const auto heldout = selector::prepare_examples(encoder, heldout_samples, cfg);
  selector::TrainOptions options;
  options.single_precision = !a.model.double_precision;
  options.on_epoch = [](const selector::EpochLog& e) {
    std::cerr << "epoch " << e.epoch << "  loss " << fmt(e.loss, "%.6f") << "  heldout_f1 " << fmt(e.heldout_f1)
              << "  count_acc " << fmt(e.heldout_count_accuracy) << "\n";
  };
  const auto result = selector::train(encoder, train_set, heldout, cfg, options);
  selector::save_checkpoint(data_path(a.checkpoint), result.model);
  if (!a.log.empty()) write_text(a.log, result.log.to_text());
  char sum[32];
  std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(selector::checkpoint_checksum(result.model)));
  std::cout << "checkpoint " << data_path(a.checkpoint).string() << "  checksum " << sum << "\n";
  std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(result.log.checksum()));
  std::cout << "training log checksum " << sum << "\n";
  return kExitOk;
}

struct SelectArgs {
  std::string checkpoint, scenes, proposals, out, head = "box";
  std::optional<double> threshold;
};

int cmd_select(const SelectArgs& a) {
  using namespace vgent;
  const auto model = selector::load_checkpoint(existing_input(a.checkpoint));
  const selector::SimulatedEncoder encoder(model.config);
  const auto scenes = corpus::read_scenes(existing_input(a.scenes));
  const auto sets = corpus::read_proposals(existing_input(a.proposals));
  std::map<std::string, const corpus::ProposalSet*> by_id;
  for (const auto& s : sets) by_id[s.scene_id] = &s;
  const auto head = a.head == "mask" ? selector::PresenceHead::kMask : selector::PresenceHead::kBox;
  const double threshold = a.threshold.value_or(model.config.presence_threshold);
  std::vector<Json> out;
  int errors = 0;
  for (const auto& scene : scenes) {
    try {
      const auto it = by_id.find(scene.scene_id);
      if (it == by_id.end()) throw InputError("no proposals for this scene");
      const corpus::SyntheticSample sample{scene, *it->second};
      const auto example = selector::prepare_example(encoder, sample, model.config);
      const auto proposals = it->second->flatten();
      corpus::PredictionRecord rec{scene.scene_id, {}};
      for (int i : selector::select_proposals(model, example, head, threshold))
        rec.instances.push_back({proposals[i].bbox, proposals[i].mask});
      out.push_back(corpus::to_json(rec));
    } catch (const std::exception& e) {
      out.push_back(record_error("scene_id", scene.scene_id, e.what()));
      ++errors;
    }
  }
  write_text(a.out, join_lines(out));
  return errors ? kExitRecordErrors : kExitOk;
}

struct GradCheckArgs {
  ModelArgs model;
  std::string checkpoint;
  int coordinates = 256;
  double tolerance = 1e-3;
  double step = 1e-5;
};

int cmd_gradcheck(const GradCheckArgs& a, std::uint64_t seed) {
  using namespace vgent;
  const auto model = a.checkpoint.empty() ? selector::SelectorModel<double>()
                                          : selector::load_checkpoint(existing_input(a.checkpoint));
  const auto cfg = a.checkpoint.empty() ? make_config(a.model, seed) : model.config;
  const selector::SimulatedEncoder encoder(cfg);
  const auto m = a.checkpoint.empty() ? selector::initial_model(encoder, cfg) : model;
  corpus::SyntheticSpec spec;
  spec.num_scenes = 1;
  spec.no_target_fraction = 0;
  spec.seed = seed;
  const auto sample = corpus::generate_synthetic_corpus(spec).front();
  const auto example = selector::prepare_example(encoder, sample, cfg);
  selector::GradCheckOptions opts;
  opts.coordinates = a.coordinates;
  opts.step = a.step;
  opts.seed = seed;
  const auto r = selector::grad_check(m, example, opts);
  std::cout << "coordinates " << r.coordinates << "  max_relative_error " << fmt(r.max_relative_error, "%.3e")
            << "  worst " << r.worst_parameter << " (analytic " << fmt(r.analytic_at_worst, "%.6e") << ", numeric "
            << fmt(r.numeric_at_worst, "%.6e") << ")\n";
  return r.max_relative_error <= a.tolerance ? kExitOk : kExitRecordErrors;
}

struct BenchArgs {
  ModelArgs model;
  std::string checkpoint, out, format = "table";
  int rounds = 30;
  double per_token_ms = 0.5;
  int tokens_per_box = 20;
};

int cmd_bench(const BenchArgs& a, std::uint64_t seed) {
  using namespace vgent;
  std::optional<selector::SelectorModel<double>> model;
  if (!a.checkpoint.empty()) model = selector::load_checkpoint(existing_input(a.checkpoint));
  const auto cfg = model ? model->config : make_config(a.model, seed);
  const selector::SimulatedEncoder encoder(cfg);
  if (!model) model = selector::initial_model(encoder, cfg);
  selector::LatencyOptions opts;
  opts.rounds = a.rounds;
  opts.seed = seed;
  opts.cost.per_token_ms = a.per_token_ms;
  opts.cost.tokens_per_box = a.tokens_per_box;
  const auto rows = selector::bench_latency(*model, encoder, opts);
  std::vector<double> x, ys, ya;
  for (const auto& r : rows) {
    x.push_back(r.targets);
    ys.push_back(r.selection_ms);
    ya.push_back(r.autoregressive_ms);
  }
  const double slope_sel = selector::regression_slope(x, ys);
  const double slope_ar = selector::regression_slope(x, ya);
  if (a.format == "json") {
    Json j;
    j["rows"] = Json::array();
    for (const auto& r : rows)
      j["rows"].push_back(Json{{"targets", r.targets},
                               {"proposals", r.proposals},
                               {"tokens", r.sequence_length},
                               {"selection_ms", r.selection_ms},
                               {"selection_stddev_ms", r.selection_stddev_ms},
                               {"autoregressive_ms", r.autoregressive_ms}});
    j["selection_slope_ms_per_target"] = slope_sel;
    j["autoregressive_slope_ms_per_target"] = slope_ar;
    write_text(a.out, j.dump(2) + "\n");
  } else {
    write_text(a.out, selector::format_latency_table(rows) + "slope ms/target: selection " + fmt(slope_sel, "%.6f") +
                          "  autoregressive " + fmt(slope_ar, "%.6f") + "\n");
  }
  return kExitOk;
}

// ------------------------------------------------------- corpus utilities ----

struct ConvertArgs {
  std::string scenes, out;
  int resolution = vgent::corpus::kDefaultModelResolution;
};

int cmd_convert_ref(const ConvertArgs& a) {
  using namespace vgent;
  const auto lines = corpus::read_jsonl(existing_input(a.scenes));
  std::vector<Json> out;
  int errors = 0;
  for (const auto& e : lines.errors) out.push_back(line_error(e.line, e.message)), ++errors;
  for (const auto& [line, j] : lines.records) {
    try {
      const auto scene = corpus::scene_from_json(j);
      out.push_back(Json{{"scene_id", scene.scene_id}, {"query", corpus::convert_mask_ref(scene, a.resolution)}});
    } catch (const std::exception& e) {
      out.push_back(line_error(line, e.what()));
      ++errors;
    }
  }
  write_text(a.out, join_lines(out));
  return errors ? kExitRecordErrors : kExitOk;
}

struct MergeArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_merge(const MergeArgs& a) {
  using namespace vgent;
  if (a.inputs.empty()) throw InputError("merge needs at least one proposal file");
  std::vector<std::string> order;
  std::map<std::string, std::vector<corpus::ProposalSet>> by_scene;
  for (const auto& in : a.inputs) {
    for (auto& s : corpus::read_proposals(existing_input(in))) {
      auto& v = by_scene[s.scene_id];
      if (v.empty()) order.push_back(s.scene_id);
      v.push_back(std::move(s));
    }
  }
  std::vector<corpus::ProposalSet> merged;
  for (const auto& id : order) merged.push_back(corpus::merge_proposals(by_scene[id]));
  std::vector<Json> lines;
  for (const auto& s : merged)
    for (auto& j : corpus::to_json(s)) lines.push_back(std::move(j));
  write_text(a.out, join_lines(lines));
  return kExitOk;
}

struct GenArgs {
  vgent::corpus::SyntheticSpec spec;
  std::string scenes_out = "scenes.jsonl", proposals_out = "proposals.jsonl";
  bool decoration = false;
};

int cmd_gen(GenArgs a, std::uint64_t seed) {
  using namespace vgent;
  std::vector<corpus::SyntheticSample> samples;
  if (a.decoration) {
    samples.push_back(corpus::decoration_fixture());
  } else {
    a.spec.seed = seed;
    samples = corpus::generate_synthetic_corpus(a.spec);
  }
  std::vector<Json> scenes, proposals;
  for (const auto& s : samples) {
    scenes.push_back(corpus::to_json(s.scene));
    for (auto& j : corpus::to_json(s.proposals)) proposals.push_back(std::move(j));
  }
  write_text(a.scenes_out, join_lines(scenes));
  write_text(a.proposals_out, join_lines(proposals));
  return kExitOk;
}

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--layers", m.layers, "decoder and encoder layers");
  cmd->add_option("--hidden", m.hidden, "hidden width");
  cmd->add_option("--heads", m.heads, "attention heads");
  cmd->add_option("--ffn", m.ffn, "feed-forward width");
  cmd->add_option("--queries", m.queries, "learnable count queries (even)");
  cmd->add_flag("--random-init", m.random_init, "do not copy decoder weights from the encoder");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proposal-selection grounding toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();
  const std::vector<std::string> formats = {"table", "json"};

  RewardArgs reward;
  auto* c_reward = app.add_subcommand("reward", "score model responses with the verifiable reward");
  c_reward->add_option("--gt", reward.gt, "ground truth JSONL (id, image_width, image_height, gt)")->required();
  c_reward->add_option("--pred", reward.pred, "responses JSONL (id, prediction_text)")->required();
  c_reward->add_option("--out", reward.out, "rewards JSONL (default stdout)");
  c_reward->add_option("--coords", reward.coords, "answer coordinate space")
      ->check(CLI::IsMember({"pixels", "norm1000"}));
  c_reward->add_option("--format", reward.format, "summary format")->check(CLI::IsMember(formats));

  LabelArgs label;
  auto* c_label = app.add_subcommand("label", "assign box- and mask-aware proposal labels");
  c_label->add_option("--scenes", label.scenes)->required();
  c_label->add_option("--proposals", label.proposals)->required();
  c_label->add_option("--out", label.out);
  c_label->add_option("--box-thresh", label.box_thresh, "IoU threshold (strict)")->capture_default_str();
  c_label->add_option("--mask-thresh", label.mask_thresh, "IoA threshold (strict)")->capture_default_str();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "F1, gIoU, cIoU and N-acc report");
  c_eval->add_option("--scenes", eval.scenes)->required();
  c_eval->add_option("--predictions", eval.predictions)->required();
  c_eval->add_option("--out", eval.out);
  c_eval->add_flag("--split", eval.split, "report with and without visual references separately");
  c_eval->add_flag("--box-raster", eval.box_raster, "rasterize boxes for instances without masks");
  c_eval->add_option("--format", eval.format)->check(CLI::IsMember(formats));

  OracleArgs oracle;
  auto* c_oracle = app.add_subcommand("oracle", "ground-truth upper-bound proposal selection");
  c_oracle->add_option("--scenes", oracle.scenes)->required();
  c_oracle->add_option("--proposals", oracle.proposals)->required();
  c_oracle->add_option("--mode", oracle.mode)->check(CLI::IsMember({"f1", "mask"}));
  c_oracle->add_option("--out", oracle.out, "predictions JSONL (default stdout)");
  c_oracle->add_option("--report", oracle.report, "metrics report path (default stderr)");
  c_oracle->add_flag("--box-raster", oracle.box_raster);
  c_oracle->add_option("--format", oracle.format)->check(CLI::IsMember(formats));

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train the selector (synthetic corpus unless --scenes is given)");
  add_model_options(c_train, train.model);
  c_train->add_option("--epochs", train.model.epochs);
  c_train->add_option("--batch-size", train.model.batch);
  c_train->add_option("--lr", train.model.lr);
  c_train->add_option("--warmup", train.model.warmup, "linear warmup steps");
  c_train->add_option("--threshold", train.model.threshold, "presence threshold stored in the checkpoint");
  c_train->add_flag("--mask-weights", train.model.mask_weights, "weight mask BCE by 1 + IoA");
  c_train->add_flag("--double", train.model.double_precision, "train in double precision");
  c_train->add_option("--num-train", train.num_train);
  c_train->add_option("--num-heldout", train.num_heldout);
  c_train->add_option("--scenes", train.scenes);
  c_train->add_option("--proposals", train.proposals);
  c_train->add_option("--heldout-scenes", train.heldout_scenes);
  c_train->add_option("--heldout-proposals", train.heldout_proposals);
  c_train->add_option("--checkpoint", train.checkpoint)->capture_default_str();
  c_train->add_option("--log", train.log, "training log path");

  SelectArgs sel;
  auto* c_select = app.add_subcommand("select", "run a trained selector");
  c_select->add_option("--checkpoint", sel.checkpoint)->required();
  c_select->add_option("--scenes", sel.scenes)->required();
  c_select->add_option("--proposals", sel.proposals)->required();
  c_select->add_option("--head", sel.head)->check(CLI::IsMember({"box", "mask"}));
  c_select->add_option("--threshold", sel.threshold);
  c_select->add_option("--out", sel.out);

  GradCheckArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  add_model_options(c_grad, grad.model);
  c_grad->add_option("--checkpoint", grad.checkpoint);
  c_grad->add_option("--coordinates", grad.coordinates)->check(CLI::PositiveNumber);
  c_grad->add_option("--tolerance", grad.tolerance)->capture_default_str();
  c_grad->add_option("--step", grad.step)->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench-latency", "selection latency versus target count");
  add_model_options(c_bench, bench.model);
  c_bench->add_option("--checkpoint", bench.checkpoint);
  c_bench->add_option("--rounds", bench.rounds)->check(CLI::PositiveNumber);
  c_bench->add_option("--per-token-ms", bench.per_token_ms, "autoregressive cost model");
  c_bench->add_option("--tokens-per-box", bench.tokens_per_box, "autoregressive cost model");
  c_bench->add_option("--out", bench.out);
  c_bench->add_option("--format", bench.format)->check(CLI::IsMember(formats));

  ConvertArgs convert;
  auto* c_convert = app.add_subcommand("convert-ref", "substitute <mask-ref> tokens with box coordinates");
  c_convert->add_option("--scenes", convert.scenes)->required();
  c_convert->add_option("--resolution", convert.resolution)->capture_default_str();
  c_convert->add_option("--out", convert.out);

  MergeArgs merge;
  auto* c_merge = app.add_subcommand("merge", "concatenate proposal files per scene");
  c_merge->add_option("inputs", merge.inputs, "proposal JSONL files");
  c_merge->add_option("--out", merge.out);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "generate a synthetic corpus");
  c_gen->add_option("--num-scenes", gen.spec.num_scenes)->capture_default_str();
  c_gen->add_option("--min-targets", gen.spec.min_targets);
  c_gen->add_option("--max-targets", gen.spec.max_targets);
  c_gen->add_option("--no-target-fraction", gen.spec.no_target_fraction);
  c_gen->add_option("--min-distractors", gen.spec.min_distractors);
  c_gen->add_option("--max-distractors", gen.spec.max_distractors);
  c_gen->add_option("--proposals-per-scene", gen.spec.num_proposals);
  c_gen->add_option("--visual-ref-fraction", gen.spec.visual_ref_fraction);
  c_gen->add_flag("--decoration", gen.decoration, "emit the decoration-and-string fixture instead");
  c_gen->add_option("--scenes-out", gen.scenes_out)->capture_default_str();
  c_gen->add_option("--proposals-out", gen.proposals_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_reward->parsed()) return cmd_reward(reward);
    if (c_label->parsed()) return cmd_label(label);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_oracle->parsed()) return cmd_oracle(oracle);
    if (c_train->parsed()) return cmd_train(train, seed);
    if (c_select->parsed()) return cmd_select(sel);
    if (c_grad->parsed()) return cmd_gradcheck(grad, seed);
    if (c_bench->parsed()) return cmd_bench(bench, seed);
    if (c_convert->parsed()) return cmd_convert_ref(convert);
    if (c_merge->parsed()) return cmd_merge(merge);
    if (c_gen->parsed()) return cmd_gen(gen, seed);
  } catch (const vgent::selector::TrainingDiverged& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kExitRecordErrors;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
