#include "ramk/regional.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ramk/error.hpp"
#include "ramk/text_format.hpp"

namespace ramk {

RegionStrategy RegionStrategy::parse(std::string_view text) {
  if (text == "whole") return whole();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("unknown region strategy '" + std::string(text) + "'");
  const auto kind = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (kind == "detector") {
    const auto t = parse_double(arg);
    if (!t || *t < 0 || *t > 1) throw ConfigError("detector threshold must be a number in [0,1]: '" + std::string(text) + "'");
    return detector(*t);
  }
  if (kind == "rmac") {
    const auto l = parse_uint(arg);
    if (!l || *l < 1 || *l > 3) throw ConfigError("rmac levels must be 1, 2 or 3: '" + std::string(text) + "'");
    return rmac(static_cast<std::uint32_t>(*l));
  }
  if (kind == "topk") {
    const auto k = parse_uint(arg);
    if (!k || *k > 0xFFFFFFFFull) throw ConfigError("topk needs a non-negative integer: '" + std::string(text) + "'");
    return top_k(static_cast<std::uint32_t>(*k));
  }
  throw ConfigError("unknown region strategy '" + std::string(text) + "'");
}

std::string RegionStrategy::to_string() const {
  switch (kind) {
    case Kind::kWhole:
      return "whole";
    case Kind::kDetectorThreshold:
      return "detector:" + format_number(threshold);
    case Kind::kRmacGrid:
      return "rmac:" + std::to_string(levels);
    case Kind::kTopK:
      return "topk:" + std::to_string(k);
  }
  return "whole";
}

RegionBox whole_image_box(const ImageFeatures& f) {
  if (f.has_dimensions()) return {0, 0, static_cast<float>(f.width), static_cast<float>(f.height), 1.0f};
  float w = 1;
  float h = 1;
  for (const auto& kp : f.keypoints) {
    w = std::max(w, kp.x);
    h = std::max(h, kp.y);
  }
  return {0, 0, w, h, 1.0f};
}

namespace {

std::uint32_t grid_count(double length, double side) {
  const double slack = length - side;
  if (slack <= 1e-9 * length) return 1;
  return 1 + static_cast<std::uint32_t>(std::ceil(slack / (0.6 * side) - 1e-9));
}

bool covers(const RegionBox& box, const RegionBox& extent) {
  return box.xmin <= extent.xmin && box.ymin <= extent.ymin && box.xmax >= extent.xmax && box.ymax >= extent.ymax;
}

}  // namespace

std::vector<RegionBox> rmac_grid(double width, double height, std::uint32_t levels) {
  std::vector<RegionBox> out;
  const double shorter = std::min(width, height);
  for (std::uint32_t l = 1; l <= levels; ++l) {
    const double side = 2.0 * shorter / (l + 1);
    const auto nx = grid_count(width, side);
    const auto ny = grid_count(height, side);
    const double step_x = nx > 1 ? (width - side) / (nx - 1) : 0.0;
    const double step_y = ny > 1 ? (height - side) / (ny - 1) : 0.0;
    // A single region along an axis is centred on it.
    const double x_offset = nx > 1 ? 0.0 : (width - side) / 2;
    const double y_offset = ny > 1 ? 0.0 : (height - side) / 2;
    for (std::uint32_t iy = 0; iy < ny; ++iy) {
      for (std::uint32_t ix = 0; ix < nx; ++ix) {
        const double x0 = x_offset + ix * step_x;
        const double y0 = y_offset + iy * step_y;
        out.push_back({static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x0 + side),
                       static_cast<float>(y0 + side), 1.0f});
      }
    }
  }
  return out;
}

RegionSet select_regions(const ImageFeatures& features, const RegionStrategy& strategy) {
  RegionSet set;
  const RegionBox extent = whole_image_box(features);
  set.regions.push_back(extent);

  auto detector_boxes = [&] {
    std::vector<RegionBox> boxes;
    for (auto b : features.boxes) {
      b.xmin = std::max(b.xmin, extent.xmin);
      b.ymin = std::max(b.ymin, extent.ymin);
      b.xmax = std::min(b.xmax, extent.xmax);
      b.ymax = std::min(b.ymax, extent.ymax);
      if (b.xmin < b.xmax && b.ymin < b.ymax) boxes.push_back(b);
    }
    std::stable_sort(boxes.begin(), boxes.end(), [](const RegionBox& a, const RegionBox& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.area() > b.area();
    });
    return boxes;
  };

  switch (strategy.kind) {
    case RegionStrategy::Kind::kWhole:
      break;
    case RegionStrategy::Kind::kDetectorThreshold:
      for (const auto& b : detector_boxes()) {
        if (b.score >= strategy.threshold) set.regions.push_back(b);
      }
      break;
    case RegionStrategy::Kind::kTopK: {
      const auto boxes = detector_boxes();
      const auto n = std::min<std::size_t>(boxes.size(), strategy.k);
      set.regions.insert(set.regions.end(), boxes.begin(), boxes.begin() + static_cast<std::ptrdiff_t>(n));
      break;
    }
    case RegionStrategy::Kind::kRmacGrid: {
      const auto grid = rmac_grid(extent.width(), extent.height(), strategy.levels);
      set.regions.insert(set.regions.end(), grid.begin(), grid.end());
      break;
    }
  }
  return set;
}

std::vector<std::uint32_t> assign_to_region(const ImageFeatures& features, const RegionBox& box) {
  std::vector<std::uint32_t> out;
  if (covers(box, whole_image_box(features))) {
    out.resize(features.size());
    std::iota(out.begin(), out.end(), 0u);
    return out;
  }
  for (std::uint32_t i = 0; i < features.size(); ++i) {
    const auto& kp = features.keypoints[i];
    if (box.contains(kp.x, kp.y)) out.push_back(i);
  }
  return out;
}

AggregatedRepresentation aggregate_regional(const ImageFeatures& features, std::span<const WordId> assignment,
                                            const RegionSet& regions, const Codebook& codebook, Aggregation mode,
                                            const SelectivityParams& params) {
  if (!is_regional(mode)) {
    throw ConfigError("aggregate_regional() needs a regional mode, got " + std::string(to_string(mode)));
  }
  if (regions.regions.empty()) throw ConfigError("region set is empty");
  if (assignment.size() != features.size()) throw ConfigError("word assignment does not cover every descriptor");

  const std::size_t dim = codebook.dim();
  const bool vlad = mode == Aggregation::kRVlad;

  // Sparse accumulator keyed by word, kept in ascending word order.
  std::vector<WordId> words;
  std::vector<std::vector<double>> sums;
  auto slot = [&](WordId c) -> std::vector<double>& {
    auto it = std::lower_bound(words.begin(), words.end(), c);
    const auto pos = static_cast<std::size_t>(it - words.begin());
    if (it == words.end() || *it != c) {
      words.insert(it, c);
      sums.insert(sums.begin() + static_cast<std::ptrdiff_t>(pos), std::vector<double>(dim, 0.0));
    }
    return sums[pos];
  };

  for (const auto& box : regions.regions) {
    const auto members = assign_to_region(features, box);
    if (members.empty()) continue;
    std::vector<WordId> region_assignment(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) region_assignment[i] = assignment[members[i]];
    const auto part = partition_assigned(region_assignment, members);

    // Per-region residuals (raw for VLAD, unit for ASMK) and the region's gamma,
    // computed exactly as the whole-image aggregation would.
    std::vector<std::pair<WordId, std::vector<double>>> residuals;
    double gamma_sum = 0;
    for (std::size_t k = 0; k < part.words.size(); ++k) {
      auto v = vlad_residual(features, part.members[k], codebook.centroid(part.words[k]));
      if (vlad) {
        double self = 0;
        bool nonzero = false;
        for (double x : v) {
          const auto xf = static_cast<double>(static_cast<float>(x));
          self += xf * xf;
          nonzero |= (x != 0);
        }
        if (!nonzero) continue;
        gamma_sum += self;
        residuals.emplace_back(part.words[k], std::move(v));
      } else {
        auto unit = normalize_residual(v);
        if (!unit) continue;
        gamma_sum += 1.0;
        residuals.emplace_back(part.words[k], std::move(*unit));
      }
    }
    if (residuals.empty() || gamma_sum <= 0) continue;
    const double gamma = 1.0 / std::sqrt(gamma_sum);
    for (const auto& [c, v] : residuals) {
      auto& acc = slot(c);
      for (std::size_t j = 0; j < dim; ++j) acc[j] += gamma * v[j];
    }
  }

  AggregatedRepresentation rep;
  rep.mode = mode;
  rep.dim = codebook.dim();
  rep.regions = static_cast<std::uint32_t>(regions.size());
  const double inv_r = 1.0 / static_cast<double>(regions.size());
  double self_sum = 0;
  for (std::size_t k = 0; k < words.size(); ++k) {
    auto& acc = sums[k];
    switch (mode) {
      case Aggregation::kRVlad:
      case Aggregation::kNaiveRAsmk: {
        bool nonzero = false;
        double norm2 = 0;
        std::vector<float> stored(dim);
        for (std::size_t j = 0; j < dim; ++j) {
          stored[j] = static_cast<float>(acc[j] * inv_r);
          nonzero |= (stored[j] != 0);
          norm2 += static_cast<double>(stored[j]) * stored[j];
        }
        if (!nonzero) continue;
        rep.words.push_back(words[k]);
        rep.residuals.insert(rep.residuals.end(), stored.begin(), stored.end());
        self_sum += selectivity(norm2, params);
        break;
      }
      case Aggregation::kRAsmk:
      case Aggregation::kRAsmkBinary: {
        const auto unit = normalize_residual(acc);
        if (!unit) continue;
        rep.words.push_back(words[k]);
        if (mode == Aggregation::kRAsmk) {
          for (double x : *unit) rep.residuals.push_back(static_cast<float>(x));
        } else {
          const auto code = binarize(*unit);
          rep.codes.insert(rep.codes.end(), code.begin(), code.end());
        }
        self_sum += 1.0;
        break;
      }
      default:
        break;
    }
  }
  if (mode == Aggregation::kRVlad) {
    rep.gamma = rep.empty() ? 0.0 : 1.0;
  } else {
    rep.gamma = self_sum > 0 ? 1.0 / std::sqrt(self_sum) : 0.0;
  }
  return rep;
}

AggregatedRepresentation aggregate_regional(const ImageFeatures& features, const RegionSet& regions,
                                            const Codebook& codebook, Aggregation mode,
                                            const SelectivityParams& params) {
  std::vector<WordId> assignment(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) assignment[i] = codebook.quantize(features.descriptor(i));
  return aggregate_regional(features, assignment, regions, codebook, mode, params);
}

double regional_similarity(const AggregatedRepresentation& query, const AggregatedRepresentation& database,
                           const SelectivityParams& params, bool global_normalization) {
  if (!is_regional(database.mode)) {
    throw CompatibilityError("regional_similarity() needs a regional database representation, got " +
                             std::string(to_string(database.mode)));
  }
  const bool asymmetric = query.mode == query_mode(database.mode);
  if (!asymmetric && query.mode != database.mode) {
    throw CompatibilityError(std::string("cannot compare query mode ") + std::string(to_string(query.mode)) +
                             " with database mode " + std::string(to_string(database.mode)));
  }
  const double sum = kernel_sum(query, database, params);
  if (database.mode == Aggregation::kRVlad) return query.gamma * database.gamma * sum;
  return global_normalization ? query.gamma * database.gamma * sum : sum;
}

}  // namespace ramk
