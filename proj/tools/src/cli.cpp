#include "ramk_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>

#include "ramk/binary_io.hpp"
#include "ramk/codebook.hpp"
#include "ramk/error.hpp"
#include "ramk/eval.hpp"
#include "ramk/features_io.hpp"
#include "ramk/ground_truth.hpp"
#include "ramk/index.hpp"
#include "ramk/parallel.hpp"
#include "ramk/ranking.hpp"
#include "ramk/rerank.hpp"
#include "ramk/rng.hpp"
#include "ramk/synthetic.hpp"
#include "ramk/text_format.hpp"

namespace ramk::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kToolName = "ramk";

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {}
  void set_quiet(bool q) { quiet_ = q; }
  void info(const std::string& msg) {
    if (!quiet_) write("info", msg);
  }
  void warn(const std::string& msg) { write("warning", msg); }
  void error(const std::string& msg) { write("error", msg); }

 private:
  void write(const char* level, const std::string& msg) {
    std::lock_guard lock(mutex_);
    err_ << kToolName << ": " << level << ": " << msg << '\n';
  }
  std::ostream& err_;
  std::mutex mutex_;
  bool quiet_ = false;
};

// Provenance: every setting that influences an output, in key:value form.
// Thread count and the config path are excluded because outputs never
// depend on them.
struct RunConfig {
  std::string command;
  std::vector<std::pair<std::string, std::string>> values;

  void set(std::string key, std::string value) { values.emplace_back(std::move(key), std::move(value)); }

  std::string header() const {
    std::string h = std::string("# ") + kToolName + " " + RAMK_VERSION + " " + command + '\n';
    for (const auto& [k, v] : values) {
      if (!v.empty()) h += "# " + k + ":" + v + '\n';
    }
    return h;
  }
};

void write_sidecar(const fs::path& output, const RunConfig& rc) {
  write_file_text(fs::path(output.string() + ".provenance"), rc.header());
}

// Config files hold key:value records whose keys are long flag names. A
// provenance header ("# ramk <version> <command>" followed by "# key:value"
// lines) is accepted as a config file too.
std::vector<std::pair<std::string, std::string>> load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  std::string text = read_file_text(path);
  if (text.starts_with(std::string("# ") + kToolName + " ")) {
    std::string stripped;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        continue;
      }
      if (line.starts_with("# ")) stripped += line.substr(2) + '\n';
    }
    text = std::move(stripped);
  }
  std::vector<std::pair<std::string, std::string>> out;
  try {
    for (const auto& rec : parse_records(text, path.string())) {
      for (const auto& kv : rec.fields) out.push_back(kv);
    }
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

Aggregation parse_mode(const std::string& s) {
  const auto m = parse_aggregation(s);
  if (!m) throw ConfigError("unknown mode '" + s + "'");
  return *m;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("--" + key + " expects true or false, got '" + s + "'");
}

std::vector<double> parse_bins(const std::string& s) {
  std::vector<double> edges;
  for (const auto& tok : split(s, ',')) {
    const auto v = parse_double(tok);
    if (!v || !std::isfinite(*v)) throw ConfigError("bad bin edge '" + tok + "'");
    edges.push_back(*v);
  }
  return edges;
}

ImageFeatures load_image(const DatasetManifest& m, std::size_t i, float min_attention) {
  auto f = load_manifest_image(m, i);
  return min_attention > 0 ? filter_by_attention(f, min_attention) : f;
}

std::string fmt(double v) { return format_number(v); }

// ---------------------------------------------------------------------------

struct Common {
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  std::string config;
  float min_attention = 0;
};

void add_threads(CLI::App* sub, Common& c) {
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores); never changes outputs");
  sub->add_option("--config", c.config, "key:value config file; command-line flags override it");
}

struct TrainOpts {
  Common common;
  std::string manifest;
  std::string output;
  std::uint32_t words = 1024;
  std::uint32_t max_iters = 25;
  std::size_t sample = 2'000'000;
};

int cmd_train(const TrainOpts& o, Logger& log) {
  RunConfig rc{"train-codebook", {}};
  rc.set("manifest", o.manifest);
  rc.set("output", o.output);
  rc.set("c", std::to_string(o.words));
  rc.set("max-iters", std::to_string(o.max_iters));
  rc.set("sample", std::to_string(o.sample));
  rc.set("min-attention", fmt(o.common.min_attention));
  rc.set("seed", std::to_string(o.common.seed));
  if (o.words == 0) throw ConfigError("--c must be at least 1");
  if (o.max_iters == 0) throw ConfigError("--max-iters must be at least 1");

  const auto manifest = load_manifest(o.manifest);
  std::vector<ImageFeatures> images(manifest.images.size());
  parallel_for(images.size(), o.common.threads,
               [&](std::size_t i) { images[i] = load_image(manifest, i, o.common.min_attention); });
  std::vector<float> all;
  for (const auto& img : images) all.insert(all.end(), img.descriptors.begin(), img.descriptors.end());
  const std::size_t d = manifest.dim;
  std::size_t rows = all.size() / d;
  log.info("collected " + std::to_string(rows) + " descriptors from " + std::to_string(images.size()) + " images");

  std::vector<float> sample;
  if (o.sample > 0 && rows > o.sample) {
    std::vector<std::size_t> idx(rows);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng(o.common.seed).split(0x5A4D);
    for (std::size_t i = 0; i < o.sample; ++i) std::swap(idx[i], idx[i + rng.below(rows - i)]);
    idx.resize(o.sample);
    std::sort(idx.begin(), idx.end());
    sample.reserve(o.sample * d);
    for (auto r : idx) sample.insert(sample.end(), all.begin() + r * d, all.begin() + (r + 1) * d);
    rows = o.sample;
    log.info("sampled " + std::to_string(rows) + " descriptors for training");
  } else {
    sample = std::move(all);
  }

  KMeansOptions km;
  km.num_words = o.words;
  km.max_iterations = o.max_iters;
  km.seed = o.common.seed;
  km.threads = o.common.threads;
  const auto cb = train_codebook({sample, d}, km);
  for (std::size_t i = 0; i < cb.distortion_trace.size(); ++i) {
    log.info("iteration " + std::to_string(i + 1) + " distortion " + fmt(cb.distortion_trace[i]));
  }
  save_codebook(cb, o.output);
  write_sidecar(o.output, rc);
  log.info("wrote codebook C=" + std::to_string(cb.size()) + " D=" + std::to_string(cb.dim()) + " to " + o.output);
  return kExitOk;
}

struct BuildOpts {
  Common common;
  std::string manifest;
  std::string codebook;
  std::string output;
  std::string mode = "asmk-star";
  std::string regions = "whole";
  double alpha = 3;
  double tau = 0;
  std::string global_norm = "true";
};

int cmd_build(const BuildOpts& o, Logger& log) {
  RunConfig rc{"build-index", {}};
  rc.set("manifest", o.manifest);
  rc.set("codebook", o.codebook);
  rc.set("output", o.output);
  rc.set("mode", o.mode);
  rc.set("regions", o.regions);
  rc.set("alpha", fmt(o.alpha));
  rc.set("tau", fmt(o.tau));
  rc.set("global-norm", o.global_norm);
  rc.set("min-attention", fmt(o.common.min_attention));

  IndexConfig cfg;
  cfg.mode = parse_mode(o.mode);
  cfg.regions = RegionStrategy::parse(o.regions);
  cfg.selectivity = {o.alpha, o.tau};
  cfg.selectivity.validate();
  cfg.global_normalization = parse_bool("global-norm", o.global_norm);
  cfg.threads = o.common.threads;

  const auto cb = load_codebook(o.codebook);
  const auto manifest = load_manifest(o.manifest);
  if (manifest.dim != cb.dim()) {
    throw DimensionError("manifest declares D=" + std::to_string(manifest.dim) + ", codebook has D=" +
                         std::to_string(cb.dim()));
  }
  std::vector<ImageFeatures> images(manifest.images.size());
  parallel_for(images.size(), o.common.threads,
               [&](std::size_t i) { images[i] = load_image(manifest, i, o.common.min_attention); });
  const auto index = RetrievalIndex::build(images, cb, cfg);
  const auto bytes = index.encode();
  write_file_bytes(o.output, bytes);
  write_sidecar(o.output, rc);
  const double n = static_cast<double>(index.images().size());
  log.info("images:" + std::to_string(index.images().size()) + " entries:" + std::to_string(index.entries().size()) +
           " entries_per_image:" + fmt(n > 0 ? static_cast<double>(index.entries().size()) / n : 0.0) +
           " postings:" + std::to_string(index.total_postings()) + " bytes:" + std::to_string(bytes.size()));
  return kExitOk;
}

struct SearchOpts {
  Common common;
  std::string index;
  std::string codebook;
  std::string queries;
  std::string database;
  std::string output;
  std::string pooling = "max";
  std::size_t top_n = kDefaultTopN;
  bool sp = false;
  std::size_t sp_depth = 100;
  std::uint32_t sp_iters = 1000;
  double sp_tol = 0;
  std::uint64_t sp_seed = 0;
  double sp_max_distance = kDefaultMatchDistance;
};

int cmd_search(const SearchOpts& o, Logger& log) {
  RunConfig rc{"search", {}};
  rc.set("index", o.index);
  rc.set("codebook", o.codebook);
  rc.set("queries", o.queries);
  rc.set("database", o.database);
  rc.set("output", o.output);
  rc.set("pooling", o.pooling);
  rc.set("top-n", std::to_string(o.top_n));
  rc.set("min-attention", fmt(o.common.min_attention));
  rc.set("sp", o.sp ? "true" : "false");
  if (o.sp) {
    rc.set("sp-depth", std::to_string(o.sp_depth));
    rc.set("sp-iters", std::to_string(o.sp_iters));
    rc.set("sp-tol", fmt(o.sp_tol));
    rc.set("sp-seed", std::to_string(o.sp_seed));
    rc.set("sp-max-distance", fmt(o.sp_max_distance));
  }

  Pooling pooling;
  if (o.pooling == "max") {
    pooling = Pooling::kMax;
  } else if (o.pooling == "avg") {
    pooling = Pooling::kAvg;
  } else {
    throw ConfigError("--pooling must be max or avg, got '" + o.pooling + "'");
  }
  if (o.sp && o.database.empty()) throw ConfigError("--sp needs --database to load candidate features");
  if (o.sp && o.sp_tol < 0) throw ConfigError("--sp-tol must be non-negative");

  const auto index = load_index(o.index);
  const auto cb = load_codebook(o.codebook);
  if (cb.content_hash() != index.codebook_hash()) {
    throw CompatibilityError("codebook '" + o.codebook + "' is not the one index '" + o.index + "' was built with");
  }
  const auto queries = load_manifest(o.queries);
  std::optional<DatasetManifest> database;
  if (o.sp) database = load_manifest(o.database);

  const std::size_t nq = queries.images.size();
  std::vector<RankedResult> results(nq);
  std::vector<std::size_t> missing(nq, 0);
  std::vector<char> empty(nq, 0);
  parallel_for(nq, o.common.threads, [&](std::size_t q) {
    const auto query = load_image(queries, q, o.common.min_attention);
    // Keep the full ranking for re-ranking depth beyond top-n, then cut.
    const std::size_t depth = o.sp ? std::max(o.top_n, o.sp_depth) : o.top_n;
    auto ranked = index.query(query, cb, pooling, o.top_n == 0 ? 0 : depth);
    empty[q] = ranked.empty_query;
    if (o.sp && !ranked.empty_query) {
      RerankParams rp;
      rp.depth = o.sp_depth;
      rp.max_distance = o.sp_max_distance;
      rp.ransac.iterations = o.sp_iters;
      rp.ransac.inlier_tolerance = o.sp_tol;
      rp.ransac.seed = o.sp_seed;
      rp.threads = 1;
      const FeatureAccessor accessor = [&](const std::string& id) -> std::optional<ImageFeatures> {
        const auto pos = database->find(id);
        if (!pos) return std::nullopt;
        try {
          return load_image(*database, *pos, o.common.min_attention);
        } catch (const Error&) {
          return std::nullopt;
        }
      };
      auto report = spatial_rerank(ranked, query, accessor, rp);
      missing[q] = report.missing.size();
      ranked = std::move(report.result);
    }
    if (o.top_n > 0 && ranked.items.size() > o.top_n) ranked.items.resize(o.top_n);
    results[q] = std::move(ranked);
  });
  for (std::size_t q = 0; q < nq; ++q) {
    if (empty[q]) log.warn("query '" + results[q].query_id + "' has no descriptors; empty ranking");
    if (missing[q]) {
      log.warn("query '" + results[q].query_id + "': " + std::to_string(missing[q]) +
               " candidates had no loadable features and kept their kernel scores");
    }
  }
  write_file_text(o.output, rc.header() + format_results(results));
  log.info("wrote " + std::to_string(nq) + " rankings to " + o.output);
  return kExitOk;
}

struct EvalOpts {
  Common common;
  std::string results;
  std::string ground_truth;
  std::string protocol = "both";
  std::size_t corpus_size = 0;
  std::string output;
};

int cmd_evaluate(const EvalOpts& o, Logger& log, std::ostream& out) {
  RunConfig rc{"evaluate", {}};
  rc.set("results", o.results);
  rc.set("ground-truth", o.ground_truth);
  rc.set("protocol", o.protocol);
  rc.set("corpus-size", std::to_string(o.corpus_size));
  rc.set("output", o.output);

  std::vector<Protocol> protocols;
  if (o.protocol == "both") {
    protocols = {Protocol::kMedium, Protocol::kHard};
  } else if (const auto p = parse_protocol(o.protocol)) {
    protocols = {*p};
  } else {
    throw ConfigError("--protocol must be medium, hard or both, got '" + o.protocol + "'");
  }
  const auto results = load_results(o.results);
  const auto gt = load_ground_truth(o.ground_truth);
  std::vector<Metrics> metrics;
  for (auto p : protocols) {
    auto m = evaluate(results, gt, p, o.corpus_size);
    for (const auto& w : m.warnings) log.warn(w);
    if (!m.excluded.empty()) {
      log.info(std::string(to_string(p)) + ": " + std::to_string(m.excluded.size()) +
               " queries without positives excluded");
    }
    log.info(std::string(to_string(p)) + ": mAP " + fmt(100 * m.map) + "  mP@10 " + fmt(100 * m.mp10) + "  (" +
             std::to_string(m.per_query.size()) + " queries)");
    metrics.push_back(std::move(m));
  }
  const auto text = rc.header() + format_metrics(metrics);
  if (o.output.empty()) {
    out << text;
  } else {
    write_file_text(o.output, text);
  }
  return kExitOk;
}

struct RelevanceOpts {
  Common common;
  std::string manifest;
  std::string pairs;
  std::string output;
  std::string bins = "0,50,100,150,200,250,300";
  double box_threshold = 0.5;
  double max_distance = kDefaultMatchDistance;
  std::uint32_t iters = 1000;
  double tol = 0;
};

int cmd_relevance(const RelevanceOpts& o, Logger& log) {
  RunConfig rc{"analyze-relevance", {}};
  rc.set("manifest", o.manifest);
  rc.set("pairs", o.pairs);
  rc.set("output", o.output);
  rc.set("bins", o.bins);
  rc.set("box-threshold", fmt(o.box_threshold));
  rc.set("max-distance", fmt(o.max_distance));
  rc.set("iters", std::to_string(o.iters));
  rc.set("tol", fmt(o.tol));
  rc.set("seed", std::to_string(o.common.seed));
  rc.set("min-attention", fmt(o.common.min_attention));

  RelevanceParams params;
  params.bin_edges = parse_bins(o.bins);
  params.box_score_threshold = o.box_threshold;
  params.max_distance = o.max_distance;
  params.ransac.iterations = o.iters;
  params.ransac.inlier_tolerance = o.tol;
  params.ransac.seed = o.common.seed;
  params.threads = o.common.threads;
  if (o.tol < 0) throw ConfigError("--tol must be non-negative");

  const auto manifest = load_manifest(o.manifest);
  const auto pair_list = load_pairs(o.pairs);
  std::vector<std::pair<ImageFeatures, ImageFeatures>> pairs(pair_list.size());
  parallel_for(pairs.size(), o.common.threads, [&](std::size_t i) {
    auto load = [&](const std::string& id) {
      const auto pos = manifest.find(id);
      if (!pos) throw ValidationError("pair refers to image '" + id + "' absent from " + o.manifest);
      return load_image(manifest, *pos, o.common.min_attention);
    };
    pairs[i] = {load(pair_list[i].first), load(pair_list[i].second)};
  });

  std::string csv;
  if (pairs.empty()) {
    log.warn("pair list is empty; writing an empty table");
    csv = format_relevance_csv({});
  } else {
    const auto table = analyze_relevance(pairs, params);
    if (table.pairs_without_model) {
      log.warn(std::to_string(table.pairs_without_model) + " of " + std::to_string(table.pairs) +
               " pairs had no geometric model; their features count as non-relevant");
    }
    csv = format_relevance_csv(table);
  }
  write_file_text(o.output, rc.header() + csv);
  log.info("wrote relevance table to " + o.output);
  return kExitOk;
}

struct SynthOpts {
  Common common;
  SyntheticConfig config;
  std::string output_dir;
  double clutter_fraction = -1;
};

int cmd_synthetic(SynthOpts o, Logger& log) {
  if (o.clutter_fraction >= 0) {
    if (o.clutter_fraction >= 1) throw ConfigError("--clutter-fraction must be below 1");
    o.config.clutter_descriptors =
        SyntheticConfig::clutter_for_fraction(o.config.descriptors_per_instance, o.clutter_fraction);
  }
  const auto& c = o.config;
  RunConfig rc{"gen-synthetic", {}};
  rc.set("output-dir", o.output_dir);
  rc.set("name", c.name);
  rc.set("landmarks", std::to_string(c.landmarks));
  rc.set("images-per-landmark", std::to_string(c.images_per_landmark));
  rc.set("descriptors", std::to_string(c.descriptors_per_instance));
  rc.set("clutter", std::to_string(c.clutter_descriptors));
  rc.set("dim", std::to_string(c.dim));
  rc.set("box-noise", fmt(c.box_noise));
  rc.set("descriptor-noise", fmt(c.descriptor_noise));
  rc.set("patterns", std::to_string(c.background_patterns));
  rc.set("landmark-boxes", std::to_string(c.landmark_boxes));
  rc.set("distractor-boxes", std::to_string(c.distractor_boxes));
  rc.set("distractor-spread", std::to_string(c.distractor_box_spread));
  rc.set("confusers", std::to_string(c.confuser_descriptors));
  rc.set("detection-rate", fmt(c.detection_rate));
  rc.set("part-sharing", fmt(c.part_sharing));
  rc.set("shared-parts", std::to_string(c.shared_parts));
  rc.set("width", std::to_string(c.image_width));
  rc.set("height", std::to_string(c.image_height));
  rc.set("seed", std::to_string(o.common.seed));

  const auto manifest = generate_synthetic_dataset(c, o.common.seed, o.output_dir);
  write_file_text(fs::path(o.output_dir) / "provenance.txt", rc.header());
  log.info("generated " + std::to_string(manifest.images.size()) + " database images in " + o.output_dir);
  return kExitOk;
}

// Inserts config-file values right after the subcommand name so that later
// command-line flags win under the take-last policy.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty()) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::optional<std::string> config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  if (!config) return args;
  std::vector<std::string> out{args[0]};
  for (const auto& [key, value] : load_config(*config)) {
    if (key == "config" || key == "threads") continue;
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw ConfigError("config key '" + key + "' is not an option of " + args[0]);
    if (opt->get_expected_min() == 0) {
      if (parse_bool(key, value)) out.push_back("--" + key);
    } else {
      out.push_back("--" + key);
      out.push_back(value);
    }
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Logger log(err);
  CLI::App app{"Regional aggregated match kernels for image retrieval", kToolName};
  app.set_version_flag("--version", std::string(kToolName) + " " + RAMK_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "Only log warnings and errors");

  TrainOpts train;
  auto* t = app.add_subcommand("train-codebook", "Train a k-means visual-word codebook");
  t->add_option("--manifest", train.manifest, "Dataset manifest to sample descriptors from")->required();
  t->add_option("--output", train.output, "Codebook file to write")->required();
  t->add_option("--c", train.words, "Number of visual words")->capture_default_str();
  t->add_option("--max-iters", train.max_iters, "Maximum Lloyd iterations")->capture_default_str();
  t->add_option("--sample", train.sample, "Maximum descriptors used for training (0 = all)")->capture_default_str();
  t->add_option("--seed", train.common.seed, "Random seed")->capture_default_str();
  t->add_option("--min-attention", train.common.min_attention, "Drop descriptors below this attention score");
  add_threads(t, train.common);

  BuildOpts build;
  auto* b = app.add_subcommand("build-index", "Aggregate a database and build its inverted index");
  b->add_option("--manifest", build.manifest, "Database manifest")->required();
  b->add_option("--codebook", build.codebook, "Codebook file")->required();
  b->add_option("--output", build.output, "Index file to write")->required();
  b->add_option("--mode", build.mode,
                "vlad, asmk, asmk-star, r-vlad, naive-r-asmk, r-asmk or r-asmk-star")
      ->capture_default_str();
  b->add_option("--regions", build.regions, "whole, detector:<t>, rmac:<levels> or topk:<k>")->capture_default_str();
  b->add_option("--alpha", build.alpha, "Selectivity exponent")->capture_default_str();
  b->add_option("--tau", build.tau, "Selectivity threshold")->capture_default_str();
  b->add_option("--global-norm", build.global_norm, "Global normalization of regional ASMK kernels (true/false)")
      ->capture_default_str();
  b->add_option("--min-attention", build.common.min_attention, "Drop descriptors below this attention score");
  add_threads(b, build.common);

  SearchOpts search;
  auto* s = app.add_subcommand("search", "Rank database images for every query");
  s->add_option("--index", search.index, "Index file")->required();
  s->add_option("--codebook", search.codebook, "Codebook the index was built with")->required();
  s->add_option("--queries", search.queries, "Query manifest")->required();
  s->add_option("--output", search.output, "Results file to write")->required();
  s->add_option("--database", search.database, "Database manifest (needed for --sp)");
  s->add_option("--pooling", search.pooling, "Regional-search pooling: max or avg")->capture_default_str();
  s->add_option("--top-n", search.top_n, "Results per query (0 = all)")->capture_default_str();
  s->add_flag("--sp", search.sp, "Spatially verify and re-rank the head of each ranking");
  s->add_option("--sp-depth", search.sp_depth, "Images re-ranked by spatial verification")->capture_default_str();
  s->add_option("--sp-iters", search.sp_iters, "RANSAC iterations")->capture_default_str();
  s->add_option("--sp-tol", search.sp_tol, "Inlier tolerance in pixels (0 = 5% of the larger image side)");
  s->add_option("--sp-seed", search.sp_seed, "RANSAC seed")->capture_default_str();
  s->add_option("--sp-max-distance", search.sp_max_distance, "Descriptor matching radius")->capture_default_str();
  s->add_option("--min-attention", search.common.min_attention, "Drop descriptors below this attention score");
  add_threads(s, search.common);

  EvalOpts ev;
  auto* e = app.add_subcommand("evaluate", "Compute mAP and mP@10 against ground truth");
  e->add_option("--results", ev.results, "Results file from search")->required();
  e->add_option("--ground-truth", ev.ground_truth, "Ground-truth file")->required();
  e->add_option("--protocol", ev.protocol, "medium, hard or both")->capture_default_str();
  e->add_option("--corpus-size", ev.corpus_size, "Warn when rankings are shorter than this");
  e->add_option("--output", ev.output, "Metrics file (stdout when omitted)");
  add_threads(e, ev.common);

  RelevanceOpts rel;
  auto* r = app.add_subcommand("analyze-relevance", "Inside/outside-box feature relevance by attention bin");
  r->add_option("--manifest", rel.manifest, "Manifest holding the paired images")->required();
  r->add_option("--pairs", rel.pairs, "Pair list (pair:<a> with:<b>)")->required();
  r->add_option("--output", rel.output, "CSV file to write")->required();
  r->add_option("--bins", rel.bins, "Comma-separated attention bin edges")->capture_default_str();
  r->add_option("--box-threshold", rel.box_threshold, "Minimum box score defining 'inside'")->capture_default_str();
  r->add_option("--max-distance", rel.max_distance, "Descriptor matching radius")->capture_default_str();
  r->add_option("--iters", rel.iters, "RANSAC iterations")->capture_default_str();
  r->add_option("--tol", rel.tol, "Inlier tolerance in pixels (0 = 5% of the larger image side)");
  r->add_option("--seed", rel.common.seed, "RANSAC seed")->capture_default_str();
  r->add_option("--min-attention", rel.common.min_attention, "Drop descriptors below this attention score");
  add_threads(r, rel.common);

  SynthOpts syn;
  auto* g = app.add_subcommand("gen-synthetic", "Write a synthetic cluttered landmark dataset");
  g->add_option("--output-dir", syn.output_dir, "Directory to write")->required();
  g->add_option("--name", syn.config.name, "Dataset name")->capture_default_str();
  g->add_option("--landmarks", syn.config.landmarks)->capture_default_str();
  g->add_option("--images-per-landmark", syn.config.images_per_landmark)->capture_default_str();
  g->add_option("--descriptors", syn.config.descriptors_per_instance, "Planted descriptors per image")
      ->capture_default_str();
  g->add_option("--clutter", syn.config.clutter_descriptors, "Clutter descriptors per image")->capture_default_str();
  g->add_option("--clutter-fraction", syn.clutter_fraction, "Set --clutter so clutter is this fraction of features");
  g->add_option("--dim", syn.config.dim)->capture_default_str();
  g->add_option("--box-noise", syn.config.box_noise)->capture_default_str();
  g->add_option("--descriptor-noise", syn.config.descriptor_noise)->capture_default_str();
  g->add_option("--patterns", syn.config.background_patterns, "Background patterns (0 = random clutter directions)")
      ->capture_default_str();
  g->add_option("--landmark-boxes", syn.config.landmark_boxes)->capture_default_str();
  g->add_option("--distractor-boxes", syn.config.distractor_boxes, "Mean low-score distractor boxes per image")
      ->capture_default_str();
  g->add_option("--distractor-spread", syn.config.distractor_box_spread, "Per-image distractor count varies by +- this")
      ->capture_default_str();
  g->add_option("--confusers", syn.config.confuser_descriptors,
                "Clutter descriptors copied from another landmark into one small box")
      ->capture_default_str();
  g->add_option("--detection-rate", syn.config.detection_rate, "Probability the landmark is boxed")
      ->capture_default_str();
  g->add_option("--part-sharing", syn.config.part_sharing, "Similarity of parts across landmarks, in [0, 1]")
      ->capture_default_str();
  g->add_option("--shared-parts", syn.config.shared_parts, "Size of the cross-landmark part pool")
      ->capture_default_str();
  g->add_option("--width", syn.config.image_width)->capture_default_str();
  g->add_option("--height", syn.config.image_height)->capture_default_str();
  g->add_option("--seed", syn.common.seed, "Random seed")->capture_default_str();
  add_threads(g, syn.common);

  try {
    auto expanded = expand_config(args, app);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const Error& ex) {
    log.error(ex.what());
    return ex.kind() == ErrorKind::kConfig ? kExitConfig : kExitData;
  }
  log.set_quiet(quiet);

  try {
    if (*t) return cmd_train(train, log);
    if (*b) return cmd_build(build, log);
    if (*s) return cmd_search(search, log);
    if (*e) return cmd_evaluate(ev, log, out);
    if (*r) return cmd_relevance(rel, log);
    if (*g) return cmd_synthetic(syn, log);
  } catch (const Error& ex) {
    log.error(ex.what());
    switch (ex.kind()) {
      case ErrorKind::kConfig:
        return kExitConfig;
      case ErrorKind::kData:
        return kExitData;
      case ErrorKind::kInternal:
        return kExitInternal;
    }
  } catch (const std::exception& ex) {
    log.error(std::string("internal error: ") + ex.what());
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace ramk::cli
