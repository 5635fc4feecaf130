#include "ramk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ramk/binary_io.hpp"
#include "ramk/error.hpp"
#include "ramk/rng.hpp"

namespace ramk {

std::uint32_t SyntheticConfig::clutter_for_fraction(std::uint32_t planted, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("clutter fraction must lie in [0, 1)");
  return static_cast<std::uint32_t>(std::llround(planted * fraction / (1.0 - fraction)));
}

void validate(const SyntheticConfig& c) {
  if (c.landmarks == 0) throw ConfigError("synthetic config: zero landmarks");
  if (c.images_per_landmark == 0) throw ConfigError("synthetic config: zero images per landmark");
  if (c.dim == 0) throw ConfigError("synthetic config: D=0");
  if (c.descriptors_per_instance == 0) throw ConfigError("synthetic config: zero descriptors per instance");
  if (c.image_width < 16 || c.image_height < 16) throw ConfigError("synthetic config: image smaller than 16x16");
  if (!(c.detection_rate >= 0 && c.detection_rate <= 1)) throw ConfigError("synthetic config: detection rate outside [0, 1]");
  if (!(c.part_sharing >= 0 && c.part_sharing <= 1)) throw ConfigError("synthetic config: part sharing outside [0, 1]");
  if (c.part_sharing > 0 && c.shared_parts == 0) throw ConfigError("synthetic config: part sharing with zero shared parts");
  if (!(c.box_noise >= 0) || !(c.descriptor_noise >= 0)) throw ConfigError("synthetic config: negative noise level");
}

namespace {

// Stream ids for Rng::split. Each logical quantity draws from its own
// stream so that changing one count does not reshuffle unrelated draws.
constexpr std::uint64_t kArchetypeStream = 1;
constexpr std::uint64_t kBackgroundStream = 2;
constexpr std::uint64_t kImageStream = 1u << 20;
constexpr std::uint64_t kExtraStream = 7;
constexpr std::uint64_t kSharedPartStream = 3;

std::vector<float> random_unit(Rng& rng, std::uint16_t dim) {
  std::vector<double> v(dim);
  double norm2 = 0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

std::vector<float> perturb(Rng& rng, std::span<const float> base, double noise) {
  const double sd = noise / std::sqrt(static_cast<double>(base.size()));
  std::vector<double> v(base.size());
  double norm2 = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    v[i] = base[i] + sd * rng.normal();
    norm2 += v[i] * v[i];
  }
  const double inv = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
  std::vector<float> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

float clampf(double v, double lo, double hi) { return static_cast<float>(std::clamp(v, lo, hi)); }

RegionBox make_box(double x0, double y0, double x1, double y1, double w, double h, float score) {
  RegionBox b{clampf(x0, 0, w), clampf(y0, 0, h), clampf(x1, 0, w), clampf(y1, 0, h), score};
  // Keep at least a 2 pixel extent after clamping.
  if (b.xmax - b.xmin < 2.0f) {
    b.xmin = clampf(std::min<double>(b.xmin, w - 2.0), 0, w);
    b.xmax = b.xmin + 2.0f;
  }
  if (b.ymax - b.ymin < 2.0f) {
    b.ymin = clampf(std::min<double>(b.ymin, h - 2.0), 0, h);
    b.ymax = b.ymin + 2.0f;
  }
  return b;
}

std::string image_name(std::uint32_t landmark, std::uint32_t instance) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "lm%03u_img%02u", landmark, instance);
  return buf;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& c, std::uint64_t seed) {
  validate(c);
  const Rng root(seed);
  const double width = c.image_width;
  const double height = c.image_height;
  const std::uint32_t parts = c.descriptors_per_instance;
  const std::uint32_t confusers = c.landmarks < 2 ? 0 : std::min(c.confuser_descriptors, c.clutter_descriptors);
  const std::uint32_t spread = std::min(c.distractor_box_spread, c.distractor_boxes);

  // Landmark archetypes and their layout inside the landmark frame.
  std::vector<std::vector<std::vector<float>>> archetypes(c.landmarks);
  std::vector<std::vector<std::pair<double, double>>> layout(c.landmarks);
  {
    Rng rng = root.split(kArchetypeStream);
    Rng shared_rng = root.split(kSharedPartStream);
    std::vector<std::vector<float>> shared;
    if (c.part_sharing > 0) {
      for (std::uint32_t g = 0; g < c.shared_parts; ++g) shared.push_back(random_unit(shared_rng, c.dim));
    }
    for (std::uint32_t l = 0; l < c.landmarks; ++l) {
      for (std::uint32_t j = 0; j < parts; ++j) {
        auto own = random_unit(rng, c.dim);
        if (!shared.empty()) {
          const auto& base = shared[shared_rng.below(shared.size())];
          double norm2 = 0;
          std::vector<double> mix(c.dim);
          for (std::size_t i = 0; i < c.dim; ++i) {
            mix[i] = c.part_sharing * base[i] + (1.0 - c.part_sharing) * own[i];
            norm2 += mix[i] * mix[i];
          }
          const double inv = 1.0 / std::sqrt(norm2);
          for (std::size_t i = 0; i < c.dim; ++i) own[i] = static_cast<float>(mix[i] * inv);
        }
        archetypes[l].push_back(std::move(own));
        const double u = rng.uniform(0.05, 0.95);
        const double v = rng.uniform(0.05, 0.95);
        layout[l].emplace_back(u, v);
      }
    }
  }
  std::vector<std::vector<float>> background;
  {
    Rng rng = root.split(kBackgroundStream);
    for (std::uint32_t g = 0; g < c.background_patterns; ++g) background.push_back(random_unit(rng, c.dim));
  }

  SyntheticCorpus corpus;
  const std::uint32_t n = c.landmarks * c.images_per_landmark;
  corpus.database.reserve(n);
  corpus.queries.reserve(n);
  std::vector<double> area_fraction;

  for (std::uint32_t l = 0; l < c.landmarks; ++l) {
    for (std::uint32_t k = 0; k < c.images_per_landmark; ++k) {
      const std::uint32_t index = l * c.images_per_landmark + k;
      Rng rng = root.split(kImageStream + index);

      ImageFeatures img;
      img.image_id = image_name(l, k);
      img.width = c.image_width;
      img.height = c.image_height;
      img.dim = c.dim;

      const double bw = width * rng.uniform(0.3, 0.6);
      const double bh = height * rng.uniform(0.3, 0.6);
      const double bx = rng.uniform(0.0, width - bw);
      const double by = rng.uniform(0.0, height - bh);
      const RegionBox truth{static_cast<float>(bx), static_cast<float>(by), static_cast<float>(bx + bw),
                            static_cast<float>(by + bh), 1.0f};

      ImageFeatures query;
      query.image_id = "q_" + img.image_id;
      query.width = static_cast<std::uint32_t>(std::ceil(truth.xmax - truth.xmin));
      query.height = static_cast<std::uint32_t>(std::ceil(truth.ymax - truth.ymin));
      query.dim = c.dim;

      for (std::uint32_t j = 0; j < parts; ++j) {
        const auto [u, v] = layout[l][j];
        const double x = bx + u * bw + 0.01 * bw * rng.normal();
        const double y = by + v * bh + 0.01 * bh * rng.normal();
        Keypoint kp;
        kp.x = clampf(x, truth.xmin, std::nextafter(truth.xmax, truth.xmin));
        kp.y = clampf(y, truth.ymin, std::nextafter(truth.ymax, truth.ymin));
        kp.scale = static_cast<float>(1.0 + 2.0 * rng.uniform());
        kp.attention = static_cast<float>(40.0 + 260.0 * rng.uniform());
        const auto desc = perturb(rng, archetypes[l][j], c.descriptor_noise);
        img.add(kp, desc);

        Keypoint qkp = kp;
        qkp.x = clampf(static_cast<double>(kp.x) - truth.xmin, 0.0, query.width);
        qkp.y = clampf(static_cast<double>(kp.y) - truth.ymin, 0.0, query.height);
        query.add(qkp, desc);
      }
      for (std::uint32_t j = confusers; j < c.clutter_descriptors; ++j) {
        Keypoint kp;
        kp.x = static_cast<float>(rng.uniform(0.0, width));
        kp.y = static_cast<float>(rng.uniform(0.0, height));
        kp.scale = static_cast<float>(1.0 + 2.0 * rng.uniform());
        kp.attention = static_cast<float>(220.0 * rng.uniform());
        if (c.background_patterns == 0) {
          img.add(kp, random_unit(rng, c.dim));
        } else {
          img.add(kp, perturb(rng, background[rng.below(c.background_patterns)], c.descriptor_noise));
        }
      }

      // Confusers and the distractor count draw from their own stream.
      Rng extra = rng.split(kExtraStream);
      std::optional<RegionBox> confuser_box;
      if (confusers > 0) {
        auto other = static_cast<std::uint32_t>(extra.below(c.landmarks - 1));
        if (other >= l) ++other;
        const double cw = width * extra.uniform(0.1, 0.2);
        const double ch = height * extra.uniform(0.1, 0.2);
        const double cx = extra.uniform(0.0, width - cw);
        const double cy = extra.uniform(0.0, height - ch);
        confuser_box = RegionBox{static_cast<float>(cx), static_cast<float>(cy), static_cast<float>(cx + cw),
                                 static_cast<float>(cy + ch), static_cast<float>(extra.uniform(0.01, 0.3))};
        // A contiguous run of the other landmark's parts, in its own layout.
        const auto start = static_cast<std::uint32_t>(extra.below(parts));
        for (std::uint32_t j = 0; j < confusers; ++j) {
          const std::uint32_t part = (start + j) % parts;
          const auto [u, v] = layout[other][part];
          Keypoint kp;
          kp.x = clampf(cx + u * cw, confuser_box->xmin, std::nextafter(confuser_box->xmax, confuser_box->xmin));
          kp.y = clampf(cy + v * ch, confuser_box->ymin, std::nextafter(confuser_box->ymax, confuser_box->ymin));
          kp.scale = static_cast<float>(1.0 + 2.0 * extra.uniform());
          kp.attention = static_cast<float>(220.0 * extra.uniform());
          img.add(kp, perturb(extra, archetypes[other][part], c.descriptor_noise));
        }
      }
      std::uint32_t distractors = c.distractor_boxes;
      if (spread > 0) {
        distractors = c.distractor_boxes - spread + static_cast<std::uint32_t>(extra.below(2 * std::uint64_t{spread} + 1));
      }

      const bool detected = c.detection_rate >= 1.0 || extra.uniform() < c.detection_rate;

      // Detector output. Landmark boxes are drawn even when missed so the
      // remaining draws do not depend on the detection outcome.
      const double jx = c.box_noise * bw;
      const double jy = c.box_noise * bh;
      const std::size_t landmark_start = img.boxes.size();
      img.boxes.push_back(make_box(bx + jx * rng.normal(), by + jy * rng.normal(), bx + bw + jx * rng.normal(),
                                   by + bh + jy * rng.normal(), width, height,
                                   static_cast<float>(rng.uniform(0.8, 1.0))));
      for (std::uint32_t b = 0; b < c.landmark_boxes; ++b) {
        const double pw = bw * rng.uniform(0.4, 0.7);
        const double ph = bh * rng.uniform(0.4, 0.7);
        const double px = bx + rng.uniform(0.0, bw - pw);
        const double py = by + rng.uniform(0.0, bh - ph);
        img.boxes.push_back(make_box(px + jx * rng.normal(), py + jy * rng.normal(), px + pw + jx * rng.normal(),
                                     py + ph + jy * rng.normal(), width, height,
                                     static_cast<float>(rng.uniform(0.35, 0.75))));
      }
      if (!detected) img.boxes.resize(landmark_start);
      if (confuser_box && distractors > 0) {
        img.boxes.push_back(*confuser_box);
        --distractors;
      }
      for (std::uint32_t b = 0; b < distractors; ++b) {
        const double dw = width * rng.uniform(0.1, 0.3);
        const double dh = height * rng.uniform(0.1, 0.3);
        const double dx = rng.uniform(0.0, width - dw);
        const double dy = rng.uniform(0.0, height - dh);
        img.boxes.push_back(
            make_box(dx, dy, dx + dw, dy + dh, width, height, static_cast<float>(rng.uniform(0.01, 0.3))));
      }

      area_fraction.push_back(bw * bh / (width * height));
      corpus.database.push_back(std::move(img));
      corpus.queries.push_back(std::move(query));
      corpus.landmark_of.push_back(l);
      corpus.true_boxes.push_back(truth);
    }
  }

  for (std::uint32_t i = 0; i < n; ++i) {
    QueryTruth q;
    q.query_id = corpus.queries[i].image_id;
    for (std::uint32_t j = 0; j < n; ++j) {
      if (corpus.landmark_of[j] != corpus.landmark_of[i]) continue;
      if (j == i) {
        q.junk.push_back(corpus.database[j].image_id);
      } else if (area_fraction[j] >= 0.2) {
        q.easy.push_back(corpus.database[j].image_id);
      } else {
        q.hard.push_back(corpus.database[j].image_id);
      }
    }
    corpus.ground_truth.queries.push_back(std::move(q));
  }
  for (std::uint32_t l = 0; l < c.landmarks; ++l) {
    for (std::uint32_t k = 0; k + 1 < c.images_per_landmark; ++k) {
      corpus.pairs.push_back({image_name(l, k), image_name(l, k + 1)});
    }
  }
  return corpus;
}

SyntheticFiles write_synthetic_corpus(const SyntheticCorpus& corpus, const std::string& name,
                                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  SyntheticFiles files{dir / "database.txt", dir / "queries.txt", dir / "ground_truth.txt", dir / "pairs.txt"};

  auto write_set = [&](const std::vector<ImageFeatures>& images, const std::string& set_name) {
    DatasetManifest m;
    m.name = set_name;
    m.dim = images.empty() ? kDefaultDescriptorDim : images.front().dim;
    for (const auto& img : images) {
      const auto path = dir / "features" / (img.image_id + ".dtrf");
      save_image_features(img, path);
      m.images.push_back({img.image_id, path, img.width, img.height});
    }
    m.ground_truth = files.ground_truth;
    return m;
  };

  auto database = write_set(corpus.database, name);
  auto queries = write_set(corpus.queries, name + "_queries");
  save_manifest(database, files.database_manifest);
  save_manifest(queries, files.query_manifest);
  save_ground_truth(corpus.ground_truth, files.ground_truth);
  write_file_text(files.pairs, format_pairs(corpus.pairs));
  return files;
}

DatasetManifest generate_synthetic_dataset(const SyntheticConfig& config, std::uint64_t seed,
                                           const std::filesystem::path& dir) {
  const auto corpus = make_synthetic_corpus(config, seed);
  const auto files = write_synthetic_corpus(corpus, config.name, dir);
  return load_manifest(files.database_manifest);
}

}  // namespace ramk
