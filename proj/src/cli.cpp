// Copyright 2026 The polycam Authors
// SPDX-License-Identifier: Apache-2.0

#include "polycam/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "polycam/archive.hpp"
#include "polycam/config.hpp"
#include "polycam/errors.hpp"
#include "polycam/faithfulness.hpp"
#include "polycam/image_io.hpp"
#include "polycam/metrics_csv.hpp"
#include "polycam/onnx_model.hpp"
#include "polycam/parallel.hpp"
#include "polycam/robustness.hpp"
#include "polycam/saliency.hpp"
#include "polycam/tensor_ops.hpp"

namespace polycam {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raw flag values; only flags present on the command line override the config.
struct Flags {
  std::string config;
  std::string model;
  std::vector<std::string> images;
  std::string image_list;
  std::string layers;
  std::string method;
  std::size_t cls = 0;
  std::string weight_kind;
  std::string cam_layer;
  bool no_lnorm = false;
  std::size_t steps = 0;
  std::size_t pixels_per_step = 0;
  std::size_t blur_kernel = 0;
  double blur_sigma = 0.0;
  std::string occlusion_patch;
  std::string occlusion_stride;
  std::size_t rise_masks = 0;
  std::size_t rise_grid = 0;
  double rise_p = 0.0;
  std::size_t batch_size = 0;
  std::size_t top_k = 0;
  uint64_t seed = 0;
  std::size_t sens_perturbations = 0;
  double sens_radius = 0.0;
  double alpha = 0.0;
  std::string out;
  bool all_layers = false;
  std::vector<std::string> variants;
  std::string methods;
};

using OptionIndex = std::map<std::string, CLI::Option*>;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Extent parse_extent(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) {
      const auto v = std::stoul(text);
      return {v, v};
    }
    return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw UsageError("expected N or HxW, got '" + text + "'");
  }
}

OptionIndex add_common(CLI::App* sub, Flags& f) {
  OptionIndex o;
  o["config"] = sub->add_option("--config", f.config, "JSON run configuration (flags override it)")->check(CLI::ExistingFile);
  o["model"] = sub->add_option("--model", f.model, "ONNX model with tap outputs");
  o["image"] = sub->add_option("--image", f.images, "Input image (repeatable)");
  o["image-list"] = sub->add_option("--image-list", f.image_list, "Text file with one image path per line")
                        ->check(CLI::ExistingFile);
  o["layers"] = sub->add_option("--layers", f.layers, "Comma-separated tap subset, earliest first");
  o["method"] = sub->add_option("--method", f.method, "pcam+ | pcam- | pcam± | cam | scorecam | occlusion | rise");
  o["class"] = sub->add_option("--class", f.cls, "Explicit target class (default: predicted top-1)");
  o["weight-kind"] = sub->add_option("--weight-kind", f.weight_kind, "cic | cdc | cvc");
  o["cam-layer"] = sub->add_option("--cam-layer", f.cam_layer, "Layer for --method cam (default: last tap)");
  o["no-lnorm"] = sub->add_flag("--no-lnorm", f.no_lnorm, "Ablate local normalisation in Poly-CAM");
  o["steps"] = sub->add_option("--steps", f.steps, "Insertion/deletion steps");
  o["pixels-per-step"] = sub->add_option("--pixels-per-step", f.pixels_per_step, "Pixels changed per step");
  o["blur-kernel"] = sub->add_option("--blur-kernel", f.blur_kernel, "Odd Gaussian kernel size of the baseline");
  o["blur-sigma"] = sub->add_option("--blur-sigma", f.blur_sigma, "Gaussian sigma of the baseline");
  o["occlusion-patch"] = sub->add_option("--occlusion-patch", f.occlusion_patch, "Occlusion patch, N or HxW");
  o["occlusion-stride"] = sub->add_option("--occlusion-stride", f.occlusion_stride, "Occlusion stride, N or HxW");
  o["rise-masks"] = sub->add_option("--rise-masks", f.rise_masks, "Number of RISE masks");
  o["rise-grid"] = sub->add_option("--rise-grid", f.rise_grid, "RISE grid size");
  o["rise-p"] = sub->add_option("--rise-p", f.rise_p, "RISE keep probability");
  o["batch-size"] = sub->add_option("--batch-size", f.batch_size, "Images per inference call");
  o["top-k"] = sub->add_option("--top-k", f.top_k, "Score only the K most active channels per layer");
  o["seed"] = sub->add_option("--seed", f.seed, "Random seed");
  o["sens-perturbations"] = sub->add_option("--sens-perturbations", f.sens_perturbations, "Sensitivity samples");
  o["sens-radius"] = sub->add_option("--sens-radius", f.sens_radius, "Sensitivity L-infinity radius");
  o["alpha"] = sub->add_option("--alpha", f.alpha, "Overlay opacity");
  o["out"] = sub->add_option("--out", f.out, "Output directory");
  return o;
}

bool given(const OptionIndex& o, const std::string& name) {
  auto it = o.find(name);
  return it != o.end() && it->second->count() > 0;
}

RunConfig build_config(const Flags& f, const OptionIndex& o) {
  RunConfig c;
  if (given(o, "config")) {
    std::ifstream in(f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    c = config_from_json(ss.str());
  }
  try {
    if (given(o, "method")) {
      c.method = parse_method(f.method);
      // A kind loaded from the config file belongs to the config's method.
      if (!given(o, "weight-kind") && c.weight_kind && c.method != Method::Cam) c.weight_kind.reset();
    }
    if (given(o, "model")) c.model_path = f.model;
    if (given(o, "layers")) c.layers = split_list(f.layers);
    if (given(o, "class")) c.class_index = f.cls;
    if (given(o, "weight-kind")) c.weight_kind = parse_weight_kind(f.weight_kind);
    if (given(o, "cam-layer")) c.cam_layer = f.cam_layer;
    if (given(o, "no-lnorm")) c.lnorm = !f.no_lnorm;
    if (given(o, "steps")) c.schedule.steps = f.steps;
    if (given(o, "pixels-per-step")) c.schedule.pixels_per_step = f.pixels_per_step;
    if (given(o, "blur-kernel")) c.blur.kernel = f.blur_kernel;
    if (given(o, "blur-sigma")) c.blur.sigma = f.blur_sigma;
    if (given(o, "occlusion-patch")) c.occlusion_patch = parse_extent(f.occlusion_patch);
    if (given(o, "occlusion-stride")) c.occlusion_stride = parse_extent(f.occlusion_stride);
    if (given(o, "rise-masks")) c.rise_masks = f.rise_masks;
    if (given(o, "rise-grid")) c.rise_grid = f.rise_grid;
    if (given(o, "rise-p")) c.rise_p = f.rise_p;
    if (given(o, "batch-size")) c.batch_size = f.batch_size;
    if (given(o, "top-k")) c.top_k = f.top_k;
    if (given(o, "seed")) c.seed = f.seed;
    if (given(o, "sens-perturbations")) c.sensitivity_perturbations = f.sens_perturbations;
    if (given(o, "sens-radius")) c.sensitivity_radius = f.sens_radius;
    if (given(o, "alpha")) c.overlay_alpha = f.alpha;
    if (given(o, "out")) c.output_dir = f.out;
    c.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (c.model_path.empty()) throw UsageError("no model given (--model or \"model\" in --config)");
  return c;
}

std::vector<fs::path> collect_images(const Flags& f, const OptionIndex& o) {
  std::vector<fs::path> images(f.images.begin(), f.images.end());
  if (given(o, "image-list")) {
    std::ifstream in(f.image_list);
    const fs::path base = fs::path(f.image_list).parent_path();
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      const fs::path p(line);
      images.push_back(p.is_absolute() ? p : base / p);
    }
  }
  if (images.empty()) throw UsageError("no input images (--image or --image-list)");
  for (const auto& p : images) {
    if (!fs::exists(p)) throw UsageError("image not found: " + p.string());
  }
  return images;
}

struct Session {
  RunConfig config;
  std::unique_ptr<OnnxModel> model;
  std::vector<fs::path> images;
  fs::path out_dir;

  std::string model_id() const { return model->info().id; }
};

Session open_session(const Flags& f, const OptionIndex& o) {
  Session s;
  s.config = build_config(f, o);
  s.images = collect_images(f, o);
  if (!fs::exists(s.config.model_path)) throw UsageError("model not found: " + s.config.model_path);
  s.model = load_model(s.config.model_path, {s.config.batch_size, {}});
  for (const auto& layer : s.config.layers) {
    try {
      s.model->info().tap(layer);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (!s.config.cam_layer.empty()) {
    try {
      s.model->info().tap(s.config.cam_layer);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (s.config.class_index && *s.config.class_index >= s.model->info().classes) {
    throw UsageError("--class " + std::to_string(*s.config.class_index) + " is out of range");
  }
  const Geometry& g = s.model->info().input;
  if (s.config.method == Method::Occlusion &&
      (s.config.occlusion_patch.height > g.height || s.config.occlusion_patch.width > g.width)) {
    throw UsageError("occlusion patch is larger than the " + std::to_string(g.height) + "x" +
                     std::to_string(g.width) + " model input");
  }
  s.out_dir = s.config.output_dir;
  fs::create_directories(s.out_dir);
  std::ofstream(s.out_dir / "config.json", std::ios::trunc) << config_to_json(s.config);
  return s;
}

/// Every map the configured method produces, finest (final) map last.
std::vector<SaliencyMap> generate_maps(const Model& model, const ImageTensor& x, std::size_t cls, const RunConfig& c,
                                       Method method) {
  const WeightOptions wopts{c.top_k};
  switch (method) {
    case Method::PcamPlus:
    case Method::PcamMinus:
    case Method::PcamPm:
      return polycam(model, x, cls, implied_weight_kind(method), c.layers, c.lnorm, wopts);
    case Method::Cam: {
      const std::string layer = c.cam_layer.empty() ? model.info().taps.back().name : c.cam_layer;
      return {isolated_cam(model, x, cls, c.resolved_weight_kind(), layer, wopts)};
    }
    case Method::ScoreCam:
      return {score_cam(model, x, cls, wopts)};
    case Method::Occlusion:
      return {occlusion_map(model, x, cls, c.occlusion_patch, c.occlusion_stride, ImageTensor(x.geometry()))};
    case Method::Rise:
      return {rise_map(model, x, cls, c.rise())};
  }
  throw std::logic_error("unhandled method");
}

std::vector<SaliencyMap> compute_maps(const Model& model, const ImageTensor& x, std::size_t cls, const RunConfig& c,
                                      Method method) {
  auto maps = generate_maps(model, x, cls, c, method);
  const Geometry& g = model.info().input;
  for (auto& m : maps) {
    m.parameters["resize_filter"] = c.resize_filter;
    if (m.layer != "input") m.parameters["tap_activation"] = "post-addition-relu";
    if (m.plane.height() != g.height || m.plane.width() != g.width) {
      m.parameters["input_resolution"] = "bilinear-upsampled";
    }
  }
  return maps;
}

SaliencyProcedure make_procedure(const RunConfig& c, Method method) {
  return [c, method](const Model& model, const ImageTensor& x, std::size_t cls) {
    return compute_maps(model, x, cls, c, method).back();
  };
}

std::size_t target_class(const Model& model, const ImageTensor& x, const RunConfig& c) {
  if (c.class_index) return *c.class_index;
  return argmax(model.predict_batch(std::span(&x, 1)).front());
}

std::string key_of(const fs::path& image) { return image.filename().string(); }

std::string stem_of(const fs::path& image) { return image.stem().string(); }

void log_line(std::ostream& out, const std::string& line) {
  static std::mutex m;
  std::lock_guard lock(m);
  out << line << '\n';
}

int cmd_explain(const Flags& f, const OptionIndex& o, bool all_layers, std::ostream& out) {
  Session s = open_session(f, o);
  const Geometry& g = s.model->info().input;
  const std::string slug = method_slug(s.config.method);
  std::vector<std::vector<KeyedMap>> per_image(s.images.size());

  parallel_for(s.images.size(), [&](std::size_t i) {
    const RgbImage raw = read_rgb(s.images[i]);
    const ImageTensor x = normalize_image(raw, g);
    const std::size_t cls = target_class(*s.model, x, s.config);
    auto maps = compute_maps(*s.model, x, cls, s.config, s.config.method);
    for (const auto& m : maps) validate_map(m, g);
    const SaliencyMap& final_map = maps.back();

    const RgbImage shown = resize_rgb(raw, g.height, g.width);
    const Plane unit = unit_normalize(to_input_resolution(final_map.plane, g));
    write_png(render_overlay(shown, unit, s.config.overlay_alpha, OverlayMode::Heatmap),
              s.out_dir / (stem_of(s.images[i]) + "_" + slug + "_overlay.png"));
    write_png(render_overlay(shown, unit, 1.0, OverlayMode::Mask),
              s.out_dir / (stem_of(s.images[i]) + "_" + slug + "_masked.png"));

    std::vector<KeyedMap> keyed;
    if (all_layers) {
      for (std::size_t k = 0; k + 1 < maps.size(); ++k) keyed.push_back({key_of(s.images[i]) + "@" + maps[k].layer, maps[k]});
    }
    keyed.push_back({key_of(s.images[i]), final_map});
    per_image[i] = std::move(keyed);
    log_line(out, key_of(s.images[i]) + " class=" + std::to_string(cls) + " method=" + slug);
  });

  std::vector<KeyedMap> all;
  for (auto& v : per_image) std::ranges::move(v, std::back_inserter(all));
  const fs::path archive = s.out_dir / ("maps_" + s.model_id() + "_" + slug + ".npz");
  write_map_archive(all, archive);
  log_line(out, "archive " + archive.string());
  return kExitOk;
}

int cmd_eval(const Flags& f, const OptionIndex& o, std::ostream& out) {
  Session s = open_session(f, o);
  const Geometry& g = s.model->info().input;
  const CurveSchedule schedule = resolve_schedule(s.config, g);
  const std::string slug = method_slug(s.config.method);
  std::vector<EvalCurve> ins(s.images.size());
  std::vector<EvalCurve> del(s.images.size());
  std::vector<KeyedMap> maps;
  maps.reserve(s.images.size());
  std::vector<std::unique_ptr<KeyedMap>> slots(s.images.size());

  parallel_for(s.images.size(), [&](std::size_t i) {
    const ImageTensor x = preprocess_image(s.images[i], g);
    const std::size_t cls = target_class(*s.model, x, s.config);
    SaliencyMap m = compute_maps(*s.model, x, cls, s.config, s.config.method).back();
    validate_map(m, g);
    const ImageTensor baseline = blur_baseline(x, s.config.blur);
    const Plane full = to_input_resolution(m.plane, g);
    ins[i] = perturbation_curve(*s.model, x, full, cls, CurveMode::Insertion, schedule, baseline);
    del[i] = perturbation_curve(*s.model, x, full, cls, CurveMode::Deletion, schedule, baseline);
    ins[i].image = del[i].image = key_of(s.images[i]);
    slots[i] = std::make_unique<KeyedMap>(KeyedMap{key_of(s.images[i]), std::move(m)});
  });
  for (auto& slot : slots) maps.push_back(std::move(*slot));

  write_metric_csv(ins, CurveMode::Insertion, s.out_dir, s.model_id(), slug);
  write_metric_csv(del, CurveMode::Deletion, s.out_dir, s.model_id(), slug);
  write_map_archive(maps, s.out_dir / ("maps_" + s.model_id() + "_" + slug + ".npz"));

  auto mean_auc = [](const std::vector<EvalCurve>& curves) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c.auc;
    return sum / static_cast<double>(curves.size());
  };
  const double mi = mean_auc(ins);
  const double md = mean_auc(del);
  log_line(out, "method=" + slug + " images=" + std::to_string(s.images.size()) + " insertion=" + format_double(mi) +
                    " deletion=" + format_double(md) + " ins_del=" + format_double(mi - md));
  return kExitOk;
}

int cmd_ablate(const Flags& f, const OptionIndex& o, std::ostream& out) {
  Session s = open_session(f, o);
  if (!is_polycam(s.config.method) && s.config.method != Method::Cam) {
    throw UsageError("ablate compares Poly-CAM with isolated CAM; use a pcam method or cam with --weight-kind");
  }
  const ModelInfo& info = s.model->info();
  const Geometry& g = info.input;
  const CurveSchedule schedule = resolve_schedule(s.config, g);
  const WeightKind kind = s.config.resolved_weight_kind();
  std::vector<std::string> layers = s.config.layers;
  if (layers.empty()) {
    for (const auto& t : info.taps) layers.push_back(t.name);
  }

  struct Row {
    std::string layer;
    std::string method;
    double insertion;
    double deletion;
  };
  std::vector<std::vector<Row>> per_image(s.images.size());
  const std::string pcam_name = polycam_method_name(kind);
  const std::string cam_name = "cam_" + to_string(kind);

  parallel_for(s.images.size(), [&](std::size_t i) {
    const ImageTensor x = preprocess_image(s.images[i], g);
    const std::size_t cls = target_class(*s.model, x, s.config);
    const TapResult tapped = s.model->tap_activations(x);
    std::vector<WeightVector> weights;
    for (const auto& layer : layers) {
      weights.push_back(channel_weights(*s.model, x, tapped.activations, layer, cls, kind, {s.config.top_k}));
    }
    const auto pcam = polycam_from_weights(tapped.activations, weights, layers, s.config.lnorm);
    const ImageTensor baseline = blur_baseline(x, s.config.blur);
    auto score = [&](const Plane& p) {
      const Plane full = to_input_resolution(p, g);
      return std::pair{perturbation_curve(*s.model, x, full, cls, CurveMode::Insertion, schedule, baseline).auc,
                       perturbation_curve(*s.model, x, full, cls, CurveMode::Deletion, schedule, baseline).auc};
    };
    for (std::size_t k = 0; k < pcam.size(); ++k) {
      const std::size_t li = layers.size() - 1 - k;
      const auto [pi, pd] = score(pcam[k].plane);
      per_image[i].push_back({layers[li], pcam_name, pi, pd});
      const auto [ci, cd] = score(single_layer_cam(tapped.activations, weights[li], layers[li]).plane);
      per_image[i].push_back({layers[li], cam_name, ci, cd});
    }
  });

  const std::string suffix = s.model_id() + "_" + to_string(kind);
  CsvWriter details(s.out_dir / ("ablation_details_" + suffix + ".csv"),
                    {"image", "layer", "method", "insertion", "deletion", "ins_del"});
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> sums;
  std::vector<std::pair<std::string, std::string>> order;
  for (std::size_t i = 0; i < s.images.size(); ++i) {
    for (const Row& r : per_image[i]) {
      details.cell(key_of(s.images[i])).cell(r.layer).cell(r.method).cell(r.insertion).cell(r.deletion);
      details.cell(r.insertion - r.deletion).end_row();
      const auto key = std::pair{r.layer, r.method};
      if (!sums.contains(key)) order.push_back(key);
      sums[key].first += r.insertion;
      sums[key].second += r.deletion;
    }
  }
  details.close();
  std::stable_partition(order.begin(), order.end(), [&](const auto& k) { return k.second == pcam_name; });
  CsvWriter summary(s.out_dir / ("ablation_" + suffix + ".csv"), {"layer", "method", "insertion", "deletion", "ins_del"});
  const double n = static_cast<double>(s.images.size());
  for (const auto& key : order) {
    const auto [si, sd] = sums[key];
    summary.cell(key.first).cell(key.second).cell(si / n).cell(sd / n).cell((si - sd) / n).end_row();
    log_line(out, key.second + " " + key.first + " insertion=" + format_double(si / n) +
                      " deletion=" + format_double(sd / n) + " ins_del=" + format_double((si - sd) / n));
  }
  summary.close();
  return kExitOk;
}

std::vector<Method> parse_methods(const std::string& text, std::vector<Method> fallback) {
  if (text.empty()) return fallback;
  std::vector<Method> out;
  try {
    for (const auto& m : split_list(text)) out.push_back(parse_method(m));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return out;
}

int cmd_sanity(const Flags& f, const OptionIndex& o, std::ostream& out) {
  Session s = open_session(f, o);
  if (f.variants.empty()) throw UsageError("sanity needs at least one --variant model");
  std::vector<std::unique_ptr<OnnxModel>> owned;
  for (const auto& v : f.variants) {
    if (!fs::exists(v)) throw UsageError("variant not found: " + v);
    owned.push_back(load_model(v, {s.config.batch_size, {}}));
  }
  std::vector<const Model*> variants{s.model.get()};
  for (const auto& m : owned) variants.push_back(m.get());
  const auto methods = parse_methods(f.methods, {Method::PcamPlus, Method::PcamMinus, Method::PcamPm});
  const Geometry& g = s.model->info().input;

  std::vector<std::vector<RandomizationTrace>> traces(s.images.size(), std::vector<RandomizationTrace>(methods.size()));
  parallel_for(s.images.size() * methods.size(), [&](std::size_t job) {
    const std::size_t i = job / methods.size();
    const std::size_t m = job % methods.size();
    const ImageTensor x = preprocess_image(s.images[i], g);
    const std::size_t cls = target_class(*s.model, x, s.config);
    traces[i][m] = cascade_check(variants, x, cls, make_procedure(s.config, methods[m]));
    traces[i][m].threshold = s.config.sanity_threshold;
  });

  CsvWriter csv(s.out_dir / ("sanity_" + s.model_id() + ".csv"),
                {"image", "method", "stage_index", "stage", "similarity", "degenerate"});
  nlohmann::ordered_json summary;
  summary["threshold"] = s.config.sanity_threshold;
  summary["measure"] = "spearman";
  summary["trend"] = "not asserted";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::size_t passed = 0;
    double final_sum = 0.0;
    for (std::size_t i = 0; i < s.images.size(); ++i) {
      const auto& t = traces[i][m];
      for (std::size_t k = 0; k < t.stages.size(); ++k) {
        csv.cell(key_of(s.images[i])).cell(method_slug(methods[m])).cell(k).cell(t.stages[k]).cell(t.similarity[k]);
        csv.cell(std::string(t.degenerate[k] ? "true" : "false")).end_row();
      }
      passed += t.passes() ? 1 : 0;
      final_sum += t.similarity.back();
    }
    const double mean_final = final_sum / static_cast<double>(s.images.size());
    summary["methods"][method_slug(methods[m])] = {{"mean_final_similarity", mean_final},
                                                   {"passed", passed},
                                                   {"images", s.images.size()}};
    log_line(out, method_slug(methods[m]) + " mean_final_similarity=" + format_double(mean_final) + " passed=" +
                      std::to_string(passed) + "/" + std::to_string(s.images.size()));
  }
  csv.close();
  std::ofstream(s.out_dir / ("sanity_summary_" + s.model_id() + ".json"), std::ios::trunc) << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_sensitivity(const Flags& f, const OptionIndex& o, std::ostream& out) {
  Session s = open_session(f, o);
  const auto methods = parse_methods(f.methods, {Method::PcamPm, Method::Occlusion});
  const Geometry& g = s.model->info().input;
  for (Method m : methods) {
    if (m == Method::Occlusion && (s.config.occlusion_patch.height > g.height || s.config.occlusion_patch.width > g.width)) {
      throw UsageError("occlusion patch is larger than the model input");
    }
  }
  std::vector<std::vector<double>> values(methods.size(), std::vector<double>(s.images.size()));
  parallel_for(s.images.size() * methods.size(), [&](std::size_t job) {
    const std::size_t i = job / methods.size();
    const std::size_t m = job % methods.size();
    const ImageTensor x = preprocess_image(s.images[i], g);
    const std::size_t cls = target_class(*s.model, x, s.config);
    values[m][i] = sensitivity_max(*s.model, x, cls, make_procedure(s.config, methods[m]), s.config.sensitivity());
  });
  CsvWriter csv(s.out_dir / ("sensitivity_" + s.model_id() + ".csv"), {"image", "method", "sensitivity"});
  CsvWriter summary(s.out_dir / ("sensitivity_summary_" + s.model_id() + ".csv"), {"method", "mean", "images"});
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t i = 0; i < s.images.size(); ++i) {
      csv.cell(key_of(s.images[i])).cell(method_slug(methods[m])).cell(values[m][i]).end_row();
    }
    const auto report = make_sensitivity_report(method_slug(methods[m]), values[m]);
    summary.cell(report.method).cell(report.mean).cell(s.images.size()).end_row();
    log_line(out, report.method + " mean_sensitivity=" + format_double(report.mean));
  }
  csv.close();
  summary.close();
  return kExitOk;
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
  nlohmann::json j{{"error", code}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-free high-resolution class activation maps"};
  app.require_subcommand(1);
  Flags f;
  std::map<CLI::App*, OptionIndex> index;

  auto* explain = app.add_subcommand("explain", "Saliency maps and overlays for images");
  index[explain] = add_common(explain, f);
  explain->add_flag("--all-layers", f.all_layers, "Also archive the intermediate Poly-CAM maps");
  auto* eval = app.add_subcommand("eval", "Insertion, deletion and ins-del over an image list");
  index[eval] = add_common(eval, f);
  auto* ablate = app.add_subcommand("ablate", "Per-layer Poly-CAM versus isolated CAM");
  index[ablate] = add_common(ablate, f);
  auto* sanity = app.add_subcommand("sanity", "Cascading model randomization check");
  index[sanity] = add_common(sanity, f);
  sanity->add_option("--variant", f.variants, "Randomized model variant, in cascade order (repeatable)");
  sanity->add_option("--methods", f.methods, "Comma-separated methods (default: all Poly-CAM variants)");
  auto* sensitivity = app.add_subcommand("sensitivity", "Max-sensitivity robustness metric");
  index[sensitivity] = add_common(sensitivity, f);
  sensitivity->add_option("--methods", f.methods, "Comma-separated methods (default: pcam±,occlusion)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (explain->parsed()) return cmd_explain(f, index[explain], f.all_layers, out);
    if (eval->parsed()) return cmd_eval(f, index[eval], out);
    if (ablate->parsed()) return cmd_ablate(f, index[ablate], out);
    if (sanity->parsed()) return cmd_sanity(f, index[sanity], out);
    if (sensitivity->parsed()) return cmd_sensitivity(f, index[sensitivity], out);
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const LoadError& e) {
    print_error(err, "load", e.what());
    return kExitFailure;
  } catch (const InputError& e) {
    print_error(err, "input", e.what());
    return kExitFailure;
  } catch (const InferenceError& e) {
    print_error(err, "inference", e.what());
    return kExitFailure;
  } catch (const DegenerateExplanationError& e) {
    print_error(err, "degenerate-explanation", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error(err, "failure", e.what());
    return kExitFailure;
  }
  print_error(err, "usage", "no subcommand");
  return kExitUsage;
}

}  // namespace polycam
