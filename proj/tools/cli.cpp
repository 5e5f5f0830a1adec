#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "matrix_import.hpp"
#include "repdyn/coherence.hpp"
#include "repdyn/embstore.hpp"
#include "repdyn/error.hpp"
#include "repdyn/imbalance.hpp"
#include "repdyn/knn.hpp"
#include "repdyn/lowlevel.hpp"
#include "repdyn/probes.hpp"
#include "repdyn/report.hpp"
#include "repdyn/rng.hpp"
#include "repdyn/synth.hpp"

namespace repdyn::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string manifest;
  std::string metric;  // empty: command default
  std::size_t n = 10000;
  std::size_t k = kDefaultK;
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
};

Metric metric_or(const Globals& g, Metric fallback) { return g.metric.empty() ? fallback : parse_metric(g.metric); }

Manifest require_manifest(const Globals& g) {
  if (g.manifest.empty()) throw UsageError("--manifest is required for this command");
  return load_manifest(g.manifest);
}

fs::path out_dir(const Globals& g) {
  fs::path dir = g.out;
  fs::create_directories(dir);
  return dir;
}

Provenance provenance(const std::string& command, const Globals& g, Metric metric, std::size_t n) {
  return Provenance{command, g.seed, std::string(to_string(metric)), n, {}};
}

ordered_json provenance_json(const Provenance& p) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = p.command;
  j["seed"] = p.seed;
  j["metric"] = p.metric;
  j["n"] = p.n;
  for (const auto& [k, v] : p.extra) j[k] = v;
  return j;
}

void save_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

std::string image_id(std::size_t i) {
  std::ostringstream s;
  s << "img" << std::setw(6) << std::setfill('0') << i;
  return s.str();
}

std::vector<std::string> image_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(image_id(i));
  return ids;
}

void require_model(const Manifest& m, const std::string& model) {
  if (!m.has_model(model)) throw UsageError("model \"" + model + "\" is not in the manifest");
}

std::vector<std::string> models_or_all(const Manifest& m, const std::vector<std::string>& requested) {
  if (requested.empty()) return m.model_names();
  for (const auto& r : requested) require_model(m, r);
  return requested;
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::string input;
  std::string model;
  std::size_t layer = 0;
  std::size_t layer_count = 1;
  std::string image_ids_file;
};

int cmd_ingest(const Globals& g, const IngestOptions& o, std::ostream& out) {
  const LayerRef layer{o.model, o.layer, o.layer_count};
  layer.validate();
  EmbeddingMatrix m = import_matrix(o.input, layer);
  const fs::path dir = out_dir(g);
  const fs::path emb = dir / (o.model + "_L" + std::to_string(o.layer) + ".emb");
  write_embeddings(m, emb);
  out << "wrote " << emb.string() << " (" << m.n_points() << " x " << m.dim() << ")\n";

  if (g.manifest.empty()) return kSuccess;
  Manifest manifest;
  if (fs::exists(g.manifest)) {
    manifest = load_manifest(g.manifest);
  } else {
    if (o.image_ids_file.empty()) throw UsageError("--image-ids is required when creating a new manifest");
    std::ifstream in(o.image_ids_file);
    if (!in) throw DataError("cannot open " + o.image_ids_file);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) manifest.image_ids.push_back(line);
    }
  }
  if (manifest.image_ids.size() != m.n_points())
    throw DataError("matrix has " + std::to_string(m.n_points()) + " rows but the manifest lists " +
                    std::to_string(manifest.image_ids.size()) + " image ids");
  std::erase_if(manifest.layers, [&](const ManifestLayer& l) {
    return l.layer.model_name == layer.model_name && l.layer.layer_index == layer.layer_index;
  });
  manifest.layers.push_back({layer, fs::absolute(emb)});
  write_manifest(manifest, g.manifest);
  load_manifest(g.manifest);  // re-validate what was written
  out << "registered in " << g.manifest << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string kind;
  std::size_t dim = 16;
  std::size_t layers = 12;
  std::size_t models = 2;
  double step = 0.3;
  std::size_t clusters = 4;
  double separation = 6.0;
  double sigma = 0.5;
  std::size_t group_size = 100;
  std::size_t image_size = 24;
};

void add_layer(Manifest& manifest, const EmbeddingMatrix& m, const fs::path& dir) {
  const fs::path p = dir / (m.layer().model_name + "_L" + std::to_string(m.layer().layer_index) + ".emb");
  write_embeddings(m, p);
  manifest.layers.push_back({m.layer(), p});
}

void add_model(Manifest& manifest, const std::string& name, const std::string& arch, const std::string& objective) {
  manifest.models.push_back({name, arch, objective, 0.0});
}

ImageRaster textured_image(std::size_t size, Rng& rng) {
  std::array<double, 3> base{};
  for (double& c : base) c = 40.0 + 175.0 * rng.uniform();
  const double amplitude = 120.0 * rng.uniform();
  const std::size_t period = 2 + rng.below(11);
  const double noise = 40.0 * rng.uniform();
  ImageRaster img{size, size, 3, std::vector<std::uint8_t>(size * size * 3)};
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double stripe = (x % period) < period / 2 ? amplitude / 2 : -amplitude / 2;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = base[c] + stripe + noise * rng.normal();
        img.samples[(y * size + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  return img;
}

int cmd_synth(const Globals& g, const SynthOptions& o, std::ostream& out) {
  const fs::path dir = out_dir(g);
  Manifest manifest;
  manifest.image_ids = image_ids(g.n);
  manifest.pooling = "synthetic";

  if (o.kind == "two_process") {
    auto stacks = gen_two_process(g.n, g.seed);
    add_model(manifest, "A", "synthetic", "shape-first");
    add_model(manifest, "B", "synthetic", "color-first");
    for (const auto& m : stacks.a) add_layer(manifest, m, dir);
    for (const auto& m : stacks.b) add_layer(manifest, m, dir);
  } else if (o.kind == "drift") {
    if (o.models < 1) throw UsageError("--models must be at least 1");
    for (std::size_t mi = 0; mi < o.models; ++mi) {
      const std::string name = "m" + std::to_string(mi);
      add_model(manifest, name, "synthetic", "drift");
      for (const auto& m : gen_drift_stack(g.n, o.dim, o.layers, o.step, g.seed, derive_seed(g.seed, {mi}), name))
        add_layer(manifest, m, dir);
    }
  } else if (o.kind == "clusters") {
    if (o.layers < 1 || o.clusters < 1) throw UsageError("--layers and --clusters must be at least 1");
    // Same points at every layer; clusters separate further with depth.
    Rng rng(g.seed);
    std::vector<double> centre(o.clusters * o.dim);
    for (std::size_t c = 0; c < o.clusters; ++c) {
      double norm = 0;
      for (std::size_t j = 0; j < o.dim; ++j) {
        centre[c * o.dim + j] = rng.normal();
        norm += centre[c * o.dim + j] * centre[c * o.dim + j];
      }
      for (std::size_t j = 0; j < o.dim; ++j) centre[c * o.dim + j] /= std::sqrt(norm);
    }
    std::vector<std::size_t> label(g.n);
    std::vector<double> noise(g.n * o.dim);
    for (std::size_t i = 0; i < g.n; ++i) {
      label[i] = i % o.clusters;
      for (std::size_t j = 0; j < o.dim; ++j) noise[i * o.dim + j] = rng.normal();
    }
    add_model(manifest, "clusters", "synthetic", "clusters");
    for (std::size_t l = 0; l < o.layers; ++l) {
      const double sep = o.separation * static_cast<double>(l + 1) / static_cast<double>(o.layers);
      std::vector<float> v(g.n * o.dim);
      for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < o.dim; ++j)
          v[i * o.dim + j] = static_cast<float>(sep * centre[label[i] * o.dim + j] + noise[i * o.dim + j]);
      add_layer(manifest, EmbeddingMatrix(g.n, o.dim, std::move(v), {"clusters", l, o.layers}), dir);
    }
    LabelFile labels;
    for (std::size_t i = 0; i < g.n; ++i) labels[manifest.image_ids[i]] = {"c" + std::to_string(label[i])};
    write_labels(labels, dir / "labels.json");
  } else if (o.kind == "noisy") {
    const EmbeddingMatrix base = gen_gaussian(g.n, o.dim, g.seed, {"base", 0, 1});
    EmbeddingMatrix noisy = gen_noisy_copy(base, o.sigma, derive_seed(g.seed, {2}));
    noisy.set_layer({"noisy", 0, 1});
    add_model(manifest, "base", "synthetic", "gaussian");
    add_model(manifest, "noisy", "synthetic", "noisy-copy");
    add_layer(manifest, base, dir);
    add_layer(manifest, noisy, dir);
  } else if (o.kind == "images") {
    if (g.n < 3 * o.group_size) throw UsageError("--n must be at least 3 * --group-size for image synthesis");
    const fs::path img_dir = dir / "images";
    fs::create_directories(img_dir);
    Rng rng(g.seed);
    std::map<std::string, double> edges, warmth, texture;
    for (std::size_t i = 0; i < g.n; ++i) {
      const ImageRaster img = textured_image(o.image_size, rng);
      encode_image(img, img_dir / (manifest.image_ids[i] + ".ppm"));
      const LowLevelProfile p = low_level_profile(img);
      edges[manifest.image_ids[i]] = p.edge_density;
      warmth[manifest.image_ids[i]] = p.warmth;
      texture[manifest.image_ids[i]] = p.texture;
    }
    std::vector<CategoryAssignment> assignments;
    for (auto [prop, values] : {std::pair{Property::edges, &edges}, {Property::warmth, &warmth}, {Property::texture, &texture}})
      for (auto& a : discretize(*values, prop, o.group_size)) assignments.push_back(std::move(a));
    const auto masks = category_masks(manifest.image_ids, assignments);

    add_model(manifest, "clustered", "synthetic", "low-level clusters");
    add_model(manifest, "random", "synthetic", "gaussian");
    for (std::size_t l = 0; l < 3; ++l) {
      Rng jitter(derive_seed(g.seed, {3, l}));
      std::vector<float> v(g.n * 9);
      for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t b = 0; b < 9; ++b)
          v[i * 9 + b] = static_cast<float>(((masks[i] >> b) & 1u) * 10.0 + 0.1 * jitter.normal());
      add_layer(manifest, EmbeddingMatrix(g.n, 9, std::move(v), {"clustered", l, 3}), dir);
    }
    for (std::size_t l = 0; l < 3; ++l)
      add_layer(manifest, gen_gaussian(g.n, 9, derive_seed(g.seed, {4, l}), {"random", l, 3}), dir);
  } else {
    throw UsageError("unknown synth kind \"" + o.kind + "\" (two_process, drift, clusters, noisy, images)");
  }

  write_manifest(manifest, dir / "manifest.json");
  out << "wrote " << (dir / "manifest.json").string() << " with " << manifest.layers.size() << " layers\n";
  return kSuccess;
}

// ---------------------------------------------------------------- imbalance

struct ImbalanceOptions {
  std::string model_a;
  std::string model_b;
  std::string anchors = "three";
  std::vector<std::size_t> anchor_layers;
};

int cmd_imbalance(const Globals& g, const ImbalanceOptions& o, std::ostream& out) {
  const Manifest manifest = require_manifest(g);
  require_model(manifest, o.model_a);
  require_model(manifest, o.model_b);
  GridOptions go;
  go.anchors = parse_anchor_rule(o.anchors);
  go.anchor_override = o.anchor_layers;
  go.n = g.n;
  go.seed = g.seed;
  go.metric = metric_or(g, Metric::euclidean);
  const ImbalanceGrid grid = layer_grid(manifest, o.model_a, o.model_b, go);

  Provenance prov = provenance("imbalance", g, go.metric, grid.n);
  prov.extra = {{"anchors", o.anchor_layers.empty() ? o.anchors : "explicit"}};
  CsvWriter csv(prov, {"model_a", "layer_a", "model_b", "layer_b", "direction", "delta", "n", "metric", "seed"});
  ordered_json j = provenance_json(prov);
  j["model_a"] = o.model_a;
  j["model_b"] = o.model_b;
  j["anchors"] = ordered_json::array();
  for (const auto& a : grid.anchors) j["anchors"].push_back(a.layer_index);
  j["targets"] = ordered_json::array();
  for (const auto& t : grid.targets) j["targets"].push_back(t.layer_index);
  j["delta_ab"] = ordered_json::array();
  j["delta_ba"] = ordered_json::array();
  j["smoothness_ab"] = ordered_json::array();

  for (std::size_t i = 0; i < grid.anchors.size(); ++i) {
    ordered_json row_ab = ordered_json::array(), row_ba = ordered_json::array();
    std::vector<double> series;
    for (std::size_t t = 0; t < grid.targets.size(); ++t) {
      const ImbalanceResult& r = grid.values[i][t];
      const std::string la = std::to_string(r.layer_a.layer_index), lb = std::to_string(r.layer_b.layer_index);
      const std::string n = std::to_string(grid.n), metric(to_string(grid.metric)), seed = std::to_string(grid.seed);
      csv.add_row({o.model_a, la, o.model_b, lb, "a_to_b", format_number(r.delta_ab), n, metric, seed});
      csv.add_row({o.model_a, la, o.model_b, lb, "b_to_a", format_number(r.delta_ba), n, metric, seed});
      row_ab.push_back(r.delta_ab);
      row_ba.push_back(r.delta_ba);
      series.push_back(r.delta_ab);
    }
    j["delta_ab"].push_back(row_ab);
    j["delta_ba"].push_back(row_ba);
    j["smoothness_ab"].push_back(series.size() >= 3 ? ordered_json(smoothness(series)) : ordered_json(nullptr));
  }
  const fs::path dir = out_dir(g);
  csv.save(dir / "imbalance.csv");
  save_json(dir / "imbalance.json", j);
  out << "wrote " << (dir / "imbalance.csv").string() << " (" << grid.anchors.size() << " x " << grid.targets.size()
      << " grid)\n";
  return kSuccess;
}

// ---------------------------------------------------------------- neighbors

struct NeighborsOptions {
  std::vector<std::string> queries;
  std::vector<std::string> models;
  std::string layers = "three";
};

int cmd_neighbors(const Globals& g, const NeighborsOptions& o, std::ostream& out) {
  const Manifest manifest = require_manifest(g);
  const Metric metric = metric_or(g, Metric::cosine);
  if (o.queries.empty()) throw UsageError("--queries needs at least one image id");
  std::vector<std::size_t> query_rows;
  for (const auto& q : o.queries) {
    auto idx = manifest.index_of(q);
    if (!idx) throw UsageError("unknown query image id \"" + q + "\"");
    query_rows.push_back(*idx);
  }
  check_neighborhood(g.k, manifest.image_ids.size());
  const AnchorRule rule = parse_anchor_rule(o.layers);

  Provenance prov = provenance("neighbors", g, metric, manifest.image_ids.size());
  ordered_json j = provenance_json(prov);
  j["k"] = g.k;
  j["queries"] = ordered_json::array();
  std::vector<ordered_json> per_query(o.queries.size());
  for (std::size_t q = 0; q < o.queries.size(); ++q) {
    per_query[q]["id"] = o.queries[q];
    per_query[q]["results"] = ordered_json::array();
  }
  for (const auto& model : models_or_all(manifest, o.models)) {
    const auto mls = manifest.layers_of(model);
    for (std::size_t li : anchor_layers(mls.size(), rule)) {
      const EmbeddingMatrix layer = manifest.load(*mls[li]);
      const DistanceEngine engine(layer, metric);
      for (std::size_t q = 0; q < o.queries.size(); ++q) {
        const RankArray ra = rank_array(engine, query_rows[q]);
        ordered_json entry;
        entry["model"] = model;
        entry["layer_index"] = layer.layer().layer_index;
        entry["depth_fraction"] = layer.layer().depth_fraction();
        entry["metric"] = to_string(metric);
        entry["neighbors"] = ordered_json::array();
        for (std::size_t r = 0; r < g.k; ++r)
          entry["neighbors"].push_back(
              {{"rank", r + 1}, {"id", manifest.image_ids[ra.ordered[r].index]}, {"distance", ra.ordered[r].distance}});
        per_query[q]["results"].push_back(std::move(entry));
      }
    }
  }
  for (auto& q : per_query) j["queries"].push_back(std::move(q));
  const fs::path dir = out_dir(g);
  save_json(dir / "neighbors.json", j);
  out << "wrote " << (dir / "neighbors.json").string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- lowlevel

struct LowlevelOptions {
  std::string images;
  std::vector<std::string> models;
  std::size_t group_size = 100;
  bool per_property = false;
  CannyParams canny;
  std::size_t baseline_trials = 20;
};

std::optional<fs::path> find_image(const fs::path& dir, const std::string& id) {
  for (const char* ext : {".ppm", ".pgm", ".pnm"}) {
    fs::path p = dir / (id + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

int cmd_lowlevel(const Globals& g, const LowlevelOptions& o, std::ostream& out, std::ostream& err) {
  const Manifest manifest = require_manifest(g);
  const Metric metric = metric_or(g, Metric::cosine);
  o.canny.validate();
  if (o.images.empty() || !fs::is_directory(o.images)) throw DataError("image directory \"" + o.images + "\" not found");
  bool any_file = false;
  for (const auto& e : fs::directory_iterator(o.images)) any_file |= e.is_regular_file();
  if (!any_file) throw DataError("image directory \"" + o.images + "\" is empty");

  // Feature extraction, in manifest order.
  const std::size_t total = manifest.image_ids.size();
  std::vector<std::optional<LowLevelProfile>> profiles(total);
  std::vector<std::size_t> channels(total, 0);
  std::vector<std::string> problems(total);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < total; ++i) {
    const auto path = find_image(o.images, manifest.image_ids[i]);
    if (!path) {
      problems[i] = "no image file";
      continue;
    }
    try {
      const ImageRaster img = decode_image(*path);
      profiles[i] = low_level_profile(img, o.canny);
      channels[i] = img.channels;
    } catch (const std::exception& e) {
      problems[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < total; ++i)
    if (!problems[i].empty()) err << "warning: skipping image " << manifest.image_ids[i] << ": " << problems[i] << "\n";

  std::map<std::string, double> edges, warmth, texture;
  for (std::size_t i = 0; i < total; ++i) {
    if (!profiles[i]) continue;
    const auto& id = manifest.image_ids[i];
    edges[id] = profiles[i]->edge_density;
    texture[id] = profiles[i]->texture;
    if (channels[i] == 3) warmth[id] = profiles[i]->warmth;
  }

  const fs::path dir = out_dir(g);
  Provenance prov = provenance("lowlevel", g, metric, total);
  prov.extra = {{"canny_sigma", format_number(o.canny.gaussian_sigma)},
                {"canny_low", format_number(o.canny.low_threshold)},
                {"canny_high", format_number(o.canny.high_threshold)},
                {"group_size", std::to_string(o.group_size)}};
  {
    CsvWriter csv(prov, {"image_id", "edge_density", "warmth", "texture"});
    for (std::size_t i = 0; i < total; ++i) {
      if (!profiles[i]) continue;
      csv.add_row({manifest.image_ids[i], format_number(profiles[i]->edge_density),
                   channels[i] == 3 ? format_number(profiles[i]->warmth) : std::string{},
                   format_number(profiles[i]->texture)});
    }
    csv.save(dir / "features.csv");
  }

  std::vector<CategoryAssignment> assignments;
  for (auto [prop, values] : {std::pair{Property::edges, &edges}, {Property::warmth, &warmth}, {Property::texture, &texture}}) {
    if (values->size() < 3 * o.group_size)
      throw DataError("only " + std::to_string(values->size()) + " usable images for property " +
                      std::string(to_string(prop)) + " (need " + std::to_string(3 * o.group_size) + ")");
    for (auto& a : discretize(*values, prop, o.group_size)) assignments.push_back(std::move(a));
  }
  {
    ordered_json j = provenance_json(prov);
    j["categories"] = ordered_json::array();
    for (const auto& a : assignments)
      j["categories"].push_back({{"property", to_string(a.property)}, {"level", to_string(a.level)}, {"members", a.members}});
    save_json(dir / "categories.json", j);
  }

  const auto ids = categorized_ids(assignments);
  const auto masks = category_masks(ids, assignments);
  std::vector<std::size_t> rows;
  for (const auto& id : ids) rows.push_back(*manifest.index_of(id));

  Provenance share_prov = prov;
  share_prov.n = ids.size();
  share_prov.extra.push_back({"k", std::to_string(g.k)});
  CsvWriter csv(share_prov, {"model", "layer_index", "depth_fraction", "filter", "share"});
  std::vector<std::pair<std::string, CategoryMask>> filters = {{"all", CategoryMask{0x1FF}}};
  if (o.per_property)
    for (Property p : kProperties) filters.emplace_back(std::string(to_string(p)), property_filter(p));

  for (const auto& model : models_or_all(manifest, o.models)) {
    for (const auto* ml : manifest.layers_of(model)) {
      const EmbeddingMatrix layer = manifest.load(*ml).select_rows(rows);
      for (const auto& [name, filter] : filters) {
        const double share = category_share(std::span<const EmbeddingMatrix>(&layer, 1), masks, g.k, metric, filter).front();
        csv.add_row({model, std::to_string(ml->layer.layer_index), format_number(ml->layer.depth_fraction()), name,
                     format_number(share)});
      }
    }
  }
  for (const auto& [name, filter] : filters) {
    BaselineOptions bo;
    bo.trials = o.baseline_trials;
    bo.k = g.k;
    bo.seed = g.seed;
    bo.filter = filter;
    csv.add_row({"random_baseline", "", "", name, format_number(random_baseline(masks, bo))});
    csv.add_row({"analytic_baseline", "", "", name, format_number(analytic_baseline(masks, filter))});
  }
  csv.save(dir / "share.csv");
  out << "wrote features.csv, categories.json, share.csv to " << dir.string() << " (" << ids.size()
      << " categorized images)\n";
  return kSuccess;
}

// ---------------------------------------------------------------- coherence

struct CoherenceCliOptions {
  std::string labels;
  std::string model;
  std::size_t n_queries = 50;
  std::string aggregation = "query";
};

int cmd_coherence(const Globals& g, const CoherenceCliOptions& o, std::ostream& out) {
  const Manifest manifest = require_manifest(g);
  require_model(manifest, o.model);
  const LabelFile labels = load_labels(o.labels);
  CoherenceOptions co;
  co.n_queries = o.n_queries;
  co.k = g.k;
  co.metric = metric_or(g, Metric::cosine);
  co.seed = g.seed;
  co.aggregation = parse_aggregation(o.aggregation);
  const auto curve = coherence_curve(manifest, o.model, labels, co);

  Provenance prov = provenance("coherence", g, co.metric, manifest.image_ids.size());
  prov.extra = {{"model", o.model}, {"aggregation", o.aggregation}};
  CsvWriter csv(prov, {"layer_index", "depth_fraction", "mean_jaccard", "std_jaccard", "n_queries", "k"});
  for (const auto& p : curve)
    csv.add_row({std::to_string(p.layer.layer_index), format_number(p.layer.depth_fraction()), format_number(p.mean_jaccard),
                 format_number(p.std_jaccard), std::to_string(p.n_queries), std::to_string(p.k)});
  const fs::path dir = out_dir(g);
  csv.save(dir / "coherence.csv");
  out << "wrote " << (dir / "coherence.csv").string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- probe

struct ProbeCliOptions {
  std::string labels;
  std::string mode = "binary";
  std::vector<std::string> models;
  std::vector<std::string> classes;
  ProbeHyperparams hp;
};

const std::set<std::string>& labels_of(const LabelFile& labels, const std::string& id) {
  auto it = labels.find(id);
  if (it == labels.end()) throw DataError("no labels for image \"" + id + "\"");
  return it->second;
}

int cmd_probe(const Globals& g, ProbeCliOptions o, std::ostream& out) {
  const Manifest manifest = require_manifest(g);
  const LabelFile labels = load_labels(o.labels);
  o.hp.seed = g.seed;
  o.hp.validate();
  const auto models = models_or_all(manifest, o.models);
  const std::size_t n = manifest.image_ids.size();

  std::set<std::string> vocabulary;
  for (const auto& id : manifest.image_ids) {
    const auto& set = labels_of(labels, id);
    vocabulary.insert(set.begin(), set.end());
  }
  if (vocabulary.size() < 2) throw DataError("labels contain a single class; probing needs at least two");

  std::vector<Trajectory> trajectories;
  if (o.mode == "binary") {
    std::vector<std::string> classes = o.classes.empty() ? std::vector<std::string>(vocabulary.begin(), vocabulary.end())
                                                         : o.classes;
    for (const auto& model : models) {
      const auto mls = manifest.layers_of(model);
      std::vector<EmbeddingMatrix> layers;
      for (const auto* ml : mls) layers.push_back(manifest.load(*ml));
      for (const auto& cls : classes) {
        std::vector<std::uint8_t> y(n);
        std::size_t positives = 0;
        for (std::size_t i = 0; i < n; ++i) positives += y[i] = labels_of(labels, manifest.image_ids[i]).count(cls) > 0;
        if (positives == 0 || positives == n)
          throw DataError("class \"" + cls + "\" is " + (positives == 0 ? "absent from" : "present in") +
                          " every image; a binary probe needs both outcomes");
        Trajectory t = class_trajectory(layers, y, o.hp, cls);
        t.model = model;
        trajectories.push_back(std::move(t));
      }
    }
  } else if (o.mode == "multiclass") {
    std::vector<std::string> classes(vocabulary.begin(), vocabulary.end());
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& set = labels_of(labels, manifest.image_ids[i]);
      if (set.size() != 1) throw DataError("multiclass mode needs exactly one label for image \"" + manifest.image_ids[i] + "\"");
      y[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), *set.begin()) - classes.begin());
    }
    for (const auto& model : models) {
      Trajectory t;
      t.model = model;
      t.class_id = "__multiclass__";
      t.accuracies = multiclass_trajectory(manifest, model, y, classes.size(), o.hp);
      if (t.accuracies.size() >= 3) t.roughness = roughness(t.accuracies);
      trajectories.push_back(std::move(t));
    }
  } else {
    throw UsageError("unknown probe mode \"" + o.mode + "\" (binary or multiclass)");
  }

  Provenance prov = provenance("probe", g, Metric::euclidean, n);
  prov.metric = "none";
  prov.extra = {{"mode", o.mode},
                {"learning_rate", format_number(o.hp.learning_rate)},
                {"epochs", std::to_string(o.hp.epochs)},
                {"l2_penalty", format_number(o.hp.l2_penalty)},
                {"heldout_fraction", format_number(o.hp.heldout_fraction)}};
  CsvWriter traj(prov, {"model", "class_id", "layer_index", "accuracy"});
  CsvWriter rough(prov, {"model", "class_id", "roughness"});
  for (const auto& t : trajectories) {
    const auto mls = manifest.layers_of(t.model);
    for (std::size_t l = 0; l < t.accuracies.size(); ++l)
      traj.add_row({t.model, t.class_id, std::to_string(mls[l]->layer.layer_index), format_number(t.accuracies[l])});
    rough.add_row({t.model, t.class_id, t.roughness ? format_number(*t.roughness) : std::string{}});
  }
  const fs::path dir = out_dir(g);
  traj.save(dir / "trajectories.csv");
  rough.save(dir / "roughness.csv");

  ordered_json j = provenance_json(prov);
  const bool all_rough = std::all_of(trajectories.begin(), trajectories.end(), [](const Trajectory& t) { return t.roughness.has_value(); });
  if (all_rough) {
    const RoughnessDistribution d = roughness_distribution(trajectories);
    j["bin_width"] = RoughnessDistribution::kBinWidth;
    j["range"] = {0.0, 0.6};
    j["histogram"] = d.histogram;
    j["above_range"] = d.above_range;
    j["per_model"] = ordered_json::object();
    for (const auto& [model, values] : d.per_model)
      j["per_model"][model] = {{"roughness", values}, {"histogram", d.per_model_histogram.at(model)}};
  } else {
    j["histogram"] = nullptr;
    j["note"] = "fewer than 3 layers: roughness undefined";
  }
  save_json(dir / "histogram.json", j);
  out << "wrote trajectories.csv, roughness.csv, histogram.json to " << dir.string() << " (" << trajectories.size()
      << " trajectories)\n";
  return kSuccess;
}

// ---------------------------------------------------------------- subsample

struct SubsampleOptions {
  std::string model_a;
  std::size_t layer_a = 0;
  std::string model_b;
  std::size_t layer_b = 0;
  std::vector<std::size_t> sizes;
  std::size_t trials = 10;
};

const ManifestLayer& find_layer(const Manifest& m, const std::string& model, std::size_t index) {
  require_model(m, model);
  for (const auto* l : m.layers_of(model))
    if (l->layer.layer_index == index) return *l;
  throw UsageError("model \"" + model + "\" has no layer " + std::to_string(index));
}

int cmd_subsample(const Globals& g, const SubsampleOptions& o, std::ostream& out) {
  const Manifest manifest = require_manifest(g);
  const Metric metric = metric_or(g, Metric::euclidean);
  if (o.trials < 2) throw UsageError("--trials must be at least 2 (std across trials)");
  const EmbeddingMatrix a = manifest.load(find_layer(manifest, o.model_a, o.layer_a));
  const EmbeddingMatrix b = manifest.load(find_layer(manifest, o.model_b, o.layer_b));
  const auto stats = subsample_std(a, b, o.sizes, o.trials, metric, g.seed);

  Provenance prov = provenance("subsample", g, metric, manifest.image_ids.size());
  prov.extra = {{"pair", o.model_a + ":" + std::to_string(o.layer_a) + "->" + o.model_b + ":" + std::to_string(o.layer_b)}};
  CsvWriter csv(prov, {"size", "trials", "mean_delta", "std_delta"});
  for (const auto& s : stats)
    csv.add_row({std::to_string(s.size), std::to_string(o.trials), format_number(s.mean), format_number(s.std)});
  const fs::path dir = out_dir(g);
  csv.save(dir / "subsample.csv");
  out << "wrote " << (dir / "subsample.csv").string() << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layerwise representation analysis: information imbalance, neighborhoods, probes"};
  app.name(args.empty() ? "repdyn" : args.front());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--manifest", g.manifest, "Manifest JSON describing layers and image ids");
  app.add_option("--metric", g.metric, "Distance: euclidean or cosine (default depends on command)");
  app.add_option("--n", g.n, "Subsample / point count")->capture_default_str();
  app.add_option("--k", g.k, "Neighborhood size")->capture_default_str();
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  std::function<int()> action;

  IngestOptions ingest;
  auto* sc = app.add_subcommand("ingest", "Convert a .npy or CSV matrix into an EMB1 file (optionally register it)");
  sc->add_option("--input", ingest.input, "Input .npy or .csv")->required();
  sc->add_option("--model", ingest.model, "Model name")->required();
  sc->add_option("--layer", ingest.layer, "Layer index")->required();
  sc->add_option("--layer-count", ingest.layer_count, "Number of layers of the model")->required();
  sc->add_option("--image-ids", ingest.image_ids_file, "Text file with one image id per line (new manifests)");
  sc->callback([&] { action = [&] { return cmd_ingest(g, ingest, out); }; });

  SynthOptions synth;
  sc = app.add_subcommand("synth", "Generate synthetic EMB1 layers plus manifest");
  sc->add_option("--kind", synth.kind, "two_process, drift, clusters, noisy or images")->required();
  sc->add_option("--d", synth.dim, "Embedding dimension")->capture_default_str();
  sc->add_option("--layers", synth.layers, "Layers per model (drift, clusters)")->capture_default_str();
  sc->add_option("--models", synth.models, "Number of models (drift)")->capture_default_str();
  sc->add_option("--step", synth.step, "Random-walk step per layer (drift)")->capture_default_str();
  sc->add_option("--clusters", synth.clusters, "Cluster count (clusters)")->capture_default_str();
  sc->add_option("--separation", synth.separation, "Final-layer cluster separation (clusters)")->capture_default_str();
  sc->add_option("--sigma", synth.sigma, "Noise scale (noisy)")->capture_default_str();
  sc->add_option("--group-size", synth.group_size, "Category size (images)")->capture_default_str();
  sc->add_option("--image-size", synth.image_size, "Image side in pixels (images)")->capture_default_str();
  sc->callback([&] { action = [&] { return cmd_synth(g, synth, out); }; });

  ImbalanceOptions imb;
  sc = app.add_subcommand("imbalance", "Both-direction information imbalance grid between two models");
  sc->add_option("--model-a", imb.model_a, "Anchor model")->required();
  sc->add_option("--model-b", imb.model_b, "Target model")->required();
  sc->add_option("--anchors", imb.anchors, "three (second, middle, penultimate) or all")->capture_default_str();
  sc->add_option("--anchor-layers", imb.anchor_layers, "Explicit anchor layer indices of model A")->delimiter(',');
  sc->callback([&] { action = [&] { return cmd_imbalance(g, imb, out); }; });

  NeighborsOptions nb;
  sc = app.add_subcommand("neighbors", "k nearest neighbor report for query images");
  sc->add_option("--queries", nb.queries, "Query image ids")->required()->delimiter(',');
  sc->add_option("--models", nb.models, "Models (default: all)")->delimiter(',');
  sc->add_option("--layers", nb.layers, "three or all")->capture_default_str();
  sc->callback([&] { action = [&] { return cmd_neighbors(g, nb, out); }; });

  LowlevelOptions ll;
  sc = app.add_subcommand("lowlevel", "Low-level feature categories and neighborhood category share");
  sc->add_option("--images", ll.images, "Directory of <image_id>.ppm / .pgm files")->required();
  sc->add_option("--models", ll.models, "Models (default: all)")->delimiter(',');
  sc->add_option("--group-size", ll.group_size, "Images per category")->capture_default_str();
  sc->add_flag("--per-property", ll.per_property, "Also report the share for each property separately");
  sc->add_option("--canny-sigma", ll.canny.gaussian_sigma, "Gaussian sigma")->capture_default_str();
  sc->add_option("--canny-low", ll.canny.low_threshold, "Low hysteresis threshold")->capture_default_str();
  sc->add_option("--canny-high", ll.canny.high_threshold, "High hysteresis threshold")->capture_default_str();
  sc->add_option("--baseline-trials", ll.baseline_trials, "Monte Carlo trials for the random baseline")->capture_default_str();
  sc->callback([&] { action = [&] { return cmd_lowlevel(g, ll, out, err); }; });

  CoherenceCliOptions coh;
  sc = app.add_subcommand("coherence", "Jaccard label coherence of neighborhoods per layer");
  sc->add_option("--labels", coh.labels, "Label file (JSON map id -> [labels])")->required();
  sc->add_option("--model", coh.model, "Model")->required();
  sc->add_option("--n-queries", coh.n_queries, "Sampled query images")->capture_default_str();
  sc->add_option("--aggregation", coh.aggregation, "query or all-pairs")->capture_default_str();
  sc->callback([&] { action = [&] { return cmd_coherence(g, coh, out); }; });

  ProbeCliOptions pr;
  sc = app.add_subcommand("probe", "Layerwise linear probes and trajectory roughness");
  sc->add_option("--labels", pr.labels, "Label file (JSON map id -> [labels])")->required();
  sc->add_option("--mode", pr.mode, "binary or multiclass")->capture_default_str();
  sc->add_option("--models", pr.models, "Models (default: all)")->delimiter(',');
  sc->add_option("--classes", pr.classes, "Classes for binary mode (default: all)")->delimiter(',');
  sc->add_option("--lr", pr.hp.learning_rate, "Learning rate")->capture_default_str();
  sc->add_option("--epochs", pr.hp.epochs, "Full-batch gradient steps")->capture_default_str();
  sc->add_option("--l2", pr.hp.l2_penalty, "L2 penalty")->capture_default_str();
  sc->add_option("--heldout", pr.hp.heldout_fraction, "Heldout fraction")->capture_default_str();
  sc->callback([&] { action = [&] { return cmd_probe(g, pr, out); }; });

  SubsampleOptions ss;
  sc = app.add_subcommand("subsample", "Std of information imbalance across subsamples of increasing size");
  sc->add_option("--model-a", ss.model_a, "Predicting model")->required();
  sc->add_option("--layer-a", ss.layer_a, "Layer of model A")->required();
  sc->add_option("--model-b", ss.model_b, "Predicted model")->required();
  sc->add_option("--layer-b", ss.layer_b, "Layer of model B")->required();
  sc->add_option("--sizes", ss.sizes, "Subsample sizes")->required()->delimiter(',');
  sc->add_option("--trials", ss.trials, "Subsamples per size")->capture_default_str();
  sc->callback([&] { action = [&] { return cmd_subsample(g, ss, out); }; });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kUsage;
  }

  try {
    set_num_threads(g.threads);
    return action ? action() : kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace repdyn::cli
