#pragma once

// Spatial verification: nearest-neighbour descriptor matching followed by
// RANSAC over an affine model mapping query coordinates to candidate
// coordinates.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ramk/features_io.hpp"
#include "ramk/ranking.hpp"

namespace ramk {

/// Default matching radius for unit-norm descriptors (orthogonal unit vectors
/// are sqrt(2) apart).
inline constexpr double kDefaultMatchDistance = 0.8;

struct Correspondence {
  std::uint32_t query_index = 0;
  std::uint32_t candidate_index = 0;
  double distance = 0;

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// For each query descriptor, its nearest candidate descriptor (Euclidean;
/// lowest index on ties) if within `max_distance`. Several query descriptors
/// may share a candidate. Throws DimensionError when D differs.
std::vector<Correspondence> match_features(const ImageFeatures& query, const ImageFeatures& candidate,
                                           double max_distance = kDefaultMatchDistance);

struct Point2 {
  double x = 0;
  double y = 0;
};

/// A matched coordinate pair: `from` on the query, `to` on the candidate.
struct PointMatch {
  Point2 from;
  Point2 to;
};

std::vector<PointMatch> to_point_matches(const std::vector<Correspondence>& matches, const ImageFeatures& query,
                                         const ImageFeatures& candidate);

/// to = A from + t, A row-major.
struct AffineModel {
  std::array<double, 4> a{1, 0, 0, 1};
  std::array<double, 2> t{0, 0};

  double det() const noexcept { return a[0] * a[3] - a[1] * a[2]; }
  Point2 apply(Point2 p) const noexcept { return {a[0] * p.x + a[1] * p.y + t[0], a[2] * p.x + a[3] * p.y + t[1]}; }
  double error(const PointMatch& m) const noexcept;
};

inline constexpr double kMinAffineDet = 1e-9;

struct RansacParams {
  std::uint32_t iterations = 1000;
  double inlier_tolerance = 0;  // pixels; must be > 0 when calling ransac_affine
  std::uint64_t seed = 0;
  /// Minimal samples whose query-side triangle area is <= 1e-6 of this are
  /// rejected as collinear. 0 = use the bounding-box area of the query points.
  double reference_area = 0;
};

struct RansacResult {
  std::optional<AffineModel> model;
  std::vector<std::uint32_t> inliers;  // ascending indices into the input
};

/// Best model by inlier count over `iterations` minimal samples, refit by
/// least squares on its inliers (the refit is kept only if it does not lose
/// inliers). No model when there are fewer than 3 matches or fewer than 3
/// inliers. Throws ConfigError if the tolerance is not positive.
RansacResult ransac_affine(const std::vector<PointMatch>& matches, const RansacParams& params);

/// Source of candidate features during re-ranking; nullopt when unavailable.
using FeatureAccessor = std::function<std::optional<ImageFeatures>(const std::string& image_id)>;

struct RerankParams {
  std::size_t depth = 100;
  double max_distance = kDefaultMatchDistance;
  RansacParams ransac;       // tolerance 0 = 0.05 max(W, H) of each candidate
  std::size_t threads = 0;
};

struct RerankReport {
  RankedResult result;
  std::vector<std::uint32_t> inliers;  // per re-ranked head item, in output order
  std::vector<std::string> missing;    // candidates whose features could not be loaded
};

/// Re-orders the first `depth` items by (inlier count, kernel score, image id);
/// the tail keeps its order. Items keep their kernel scores, so the head is a
/// permutation rather than a re-scoring. Missing candidates count 0 inliers.
RerankReport spatial_rerank(const RankedResult& ranked, const ImageFeatures& query, const FeatureAccessor& accessor,
                            const RerankParams& params);

}  // namespace ramk
