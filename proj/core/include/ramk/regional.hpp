#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ramk/codebook.hpp"
#include "ramk/features_io.hpp"
#include "ramk/kernels.hpp"

namespace ramk {

/// How regions are chosen for a database image. Textual forms:
/// "whole", "detector:<threshold>", "rmac:<levels>", "topk:<k>".
struct RegionStrategy {
  enum class Kind : std::uint8_t { kWhole, kDetectorThreshold, kRmacGrid, kTopK };

  Kind kind = Kind::kWhole;
  double threshold = 0;     // kDetectorThreshold, in [0, 1]
  std::uint32_t levels = 0;  // kRmacGrid, in {1, 2, 3}
  std::uint32_t k = 0;       // kTopK

  static RegionStrategy whole() { return {}; }
  static RegionStrategy detector(double threshold) { return {Kind::kDetectorThreshold, threshold, 0, 0}; }
  static RegionStrategy rmac(std::uint32_t levels) { return {Kind::kRmacGrid, 0, levels, 0}; }
  static RegionStrategy top_k(std::uint32_t k) { return {Kind::kTopK, 0, 0, k}; }

  /// Throws ConfigError on unknown or out-of-range input.
  static RegionStrategy parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const RegionStrategy&, const RegionStrategy&) = default;
};

/// Regions of one image; regions[0] always spans the whole image.
struct RegionSet {
  std::vector<RegionBox> regions;

  std::size_t size() const noexcept { return regions.size(); }
};

/// Image extent: declared dimensions, or the keypoint bounding extent when undeclared.
RegionBox whole_image_box(const ImageFeatures& features);

/// Multi-scale square grid. Level l in [1, levels] uses side
/// s = 2 min(W, H) / (l + 1); along an axis of length L the region count is
/// the smallest n with consecutive overlap (s - step) / s >= 0.4, where
/// step = (L - s) / (n - 1). Regions are emitted level by level, row-major.
std::vector<RegionBox> rmac_grid(double width, double height, std::uint32_t levels);

/// Whole-image region first, then the strategy's regions. Detector boxes are
/// clipped to the image and ordered by score (descending), then area
/// (descending), then input order.
RegionSet select_regions(const ImageFeatures& features, const RegionStrategy& strategy);

/// Indices of descriptors whose keypoint lies in the box (closed min edges,
/// open max edges). A box covering the whole image extent takes every
/// descriptor, including those on the far image border.
std::vector<std::uint32_t> assign_to_region(const ImageFeatures& features, const RegionBox& box);

/// Folds every region of `regions` into one representation.
///
///   R-VLAD        V_R(c) = (1/R) sum_r gamma(r) V(r, c)
///   Naive-R-ASMK  same with V(r, c) replaced by its unit-norm version
///   R-ASMK        Naive-R-ASMK residual renormalized per word
///   R-ASMK*       binarized R-ASMK residual
///
/// Regions without descriptors contribute nothing but still count in R.
/// `gamma` holds the global factor (sum_c sigma(Phi_R^T Phi_R))^(-1/2) for the
/// ASMK family and 1 for R-VLAD, whose region factors are already folded in
/// (0 for an empty representation in every mode).
AggregatedRepresentation aggregate_regional(const ImageFeatures& features, const RegionSet& regions,
                                            const Codebook& codebook, Aggregation mode,
                                            const SelectivityParams& params);

/// Same, reusing precomputed word assignments (one per descriptor of `features`).
AggregatedRepresentation aggregate_regional(const ImageFeatures& features, std::span<const WordId> assignment,
                                            const RegionSet& regions, const Codebook& codebook, Aggregation mode,
                                            const SelectivityParams& params);

/// Regional kernel between a query and a database representation.
///
/// The query may be a whole-image representation (asymmetric case, query
/// mode = query_mode(database mode)) or a regional one of the same mode
/// (symmetric case). For the R-ASMK family with `global_normalization`, both
/// sides' gamma factors scale the sum; without it the raw kernel sum is
/// returned. R-VLAD always uses gamma(query) times the raw sum.
/// Throws CompatibilityError for other pairings.
double regional_similarity(const AggregatedRepresentation& query, const AggregatedRepresentation& database,
                           const SelectivityParams& params, bool global_normalization = true);

}  // namespace ramk
