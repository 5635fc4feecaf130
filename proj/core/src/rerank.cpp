#include "ramk/rerank.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ramk/codebook.hpp"
#include "ramk/error.hpp"
#include "ramk/parallel.hpp"
#include "ramk/regional.hpp"
#include "ramk/rng.hpp"

namespace ramk {

std::vector<Correspondence> match_features(const ImageFeatures& query, const ImageFeatures& candidate,
                                           double max_distance) {
  std::vector<Correspondence> out;
  if (query.empty() || candidate.empty()) return out;
  if (query.dim != candidate.dim) {
    throw DimensionError("cannot match D=" + std::to_string(query.dim) + " against D=" +
                         std::to_string(candidate.dim));
  }
  const double limit = max_distance * max_distance;
  for (std::uint32_t i = 0; i < query.size(); ++i) {
    const auto q = query.descriptor(i);
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_j = 0;
    for (std::uint32_t j = 0; j < candidate.size(); ++j) {
      const double d = squared_distance(q, candidate.descriptor(j));
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    if (best <= limit) out.push_back({i, best_j, std::sqrt(best)});
  }
  return out;
}

std::vector<PointMatch> to_point_matches(const std::vector<Correspondence>& matches, const ImageFeatures& query,
                                         const ImageFeatures& candidate) {
  std::vector<PointMatch> out;
  out.reserve(matches.size());
  for (const auto& m : matches) {
    const auto& a = query.keypoints.at(m.query_index);
    const auto& b = candidate.keypoints.at(m.candidate_index);
    out.push_back({{a.x, a.y}, {b.x, b.y}});
  }
  return out;
}

double AffineModel::error(const PointMatch& m) const noexcept {
  const auto p = apply(m.from);
  return std::hypot(p.x - m.to.x, p.y - m.to.y);
}

namespace {

double triangle_area(Point2 a, Point2 b, Point2 c) {
  return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

// Exact affine map through three correspondences (Cramer's rule).
std::optional<AffineModel> solve_exact(const PointMatch& m0, const PointMatch& m1, const PointMatch& m2) {
  const Point2 p[3] = {m0.from, m1.from, m2.from};
  const double det = p[0].x * (p[1].y - p[2].y) - p[0].y * (p[1].x - p[2].x) + (p[1].x * p[2].y - p[2].x * p[1].y);
  if (det == 0) return std::nullopt;
  auto solve = [&](double r0, double r1, double r2) {
    const double a = (r0 * (p[1].y - p[2].y) - p[0].y * (r1 - r2) + (r1 * p[2].y - r2 * p[1].y)) / det;
    const double b = (p[0].x * (r1 - r2) - r0 * (p[1].x - p[2].x) + (p[1].x * r2 - p[2].x * r1)) / det;
    const double c = (p[0].x * (p[1].y * r2 - p[2].y * r1) - p[0].y * (p[1].x * r2 - p[2].x * r1) +
                      r0 * (p[1].x * p[2].y - p[2].x * p[1].y)) /
                     det;
    return std::array<double, 3>{a, b, c};
  };
  const auto x = solve(m0.to.x, m1.to.x, m2.to.x);
  const auto y = solve(m0.to.y, m1.to.y, m2.to.y);
  AffineModel model;
  model.a = {x[0], x[1], y[0], y[1]};
  model.t = {x[2], y[2]};
  if (!std::isfinite(model.det()) || std::abs(model.det()) <= kMinAffineDet) return std::nullopt;
  return model;
}

std::optional<AffineModel> least_squares(const std::vector<PointMatch>& matches, const std::vector<std::uint32_t>& idx) {
  Eigen::MatrixXd m(idx.size(), 3);
  Eigen::MatrixXd rhs(idx.size(), 2);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& pm = matches[idx[static_cast<std::size_t>(r)]];
    m.row(r) << pm.from.x, pm.from.y, 1.0;
    rhs.row(r) << pm.to.x, pm.to.y;
  }
  const Eigen::MatrixXd sol = m.colPivHouseholderQr().solve(rhs);
  AffineModel model;
  model.a = {sol(0, 0), sol(1, 0), sol(0, 1), sol(1, 1)};
  model.t = {sol(2, 0), sol(2, 1)};
  if (!sol.allFinite() || std::abs(model.det()) <= kMinAffineDet) return std::nullopt;
  return model;
}

std::vector<std::uint32_t> inliers_of(const AffineModel& model, const std::vector<PointMatch>& matches, double tol) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < matches.size(); ++i) {
    if (model.error(matches[i]) <= tol) out.push_back(i);
  }
  return out;
}

}  // namespace

RansacResult ransac_affine(const std::vector<PointMatch>& matches, const RansacParams& params) {
  if (!(params.inlier_tolerance > 0)) throw ConfigError("RANSAC inlier tolerance must be positive");
  RansacResult result;
  if (matches.size() < 3) return result;

  double area = params.reference_area;
  if (area <= 0) {
    double x0 = matches[0].from.x, x1 = x0, y0 = matches[0].from.y, y1 = y0;
    for (const auto& m : matches) {
      x0 = std::min(x0, m.from.x);
      x1 = std::max(x1, m.from.x);
      y0 = std::min(y0, m.from.y);
      y1 = std::max(y1, m.from.y);
    }
    area = (x1 - x0) * (y1 - y0);
  }
  const double min_area = 1e-6 * area;

  Rng rng(params.seed);
  const auto n = matches.size();
  std::optional<AffineModel> best;
  std::vector<std::uint32_t> best_inliers;
  for (std::uint32_t it = 0; it < params.iterations; ++it) {
    const auto i = rng.below(n);
    auto j = rng.below(n - 1);
    if (j >= i) ++j;
    auto k = rng.below(n - 2);
    for (auto lo = std::min(i, j), hi = std::max(i, j); auto skip : {lo, hi}) {
      if (k >= skip) ++k;
    }
    if (triangle_area(matches[i].from, matches[j].from, matches[k].from) <= min_area) continue;
    const auto model = solve_exact(matches[i], matches[j], matches[k]);
    if (!model) continue;
    auto inl = inliers_of(*model, matches, params.inlier_tolerance);
    if (inl.size() > best_inliers.size()) {
      best = model;
      best_inliers = std::move(inl);
    }
  }
  if (!best || best_inliers.size() < 3) return result;

  if (const auto refit = least_squares(matches, best_inliers)) {
    auto inl = inliers_of(*refit, matches, params.inlier_tolerance);
    if (inl.size() >= best_inliers.size()) {
      best = refit;
      best_inliers = std::move(inl);
    }
  }
  result.model = best;
  result.inliers = std::move(best_inliers);
  return result;
}

RerankReport spatial_rerank(const RankedResult& ranked, const ImageFeatures& query, const FeatureAccessor& accessor,
                            const RerankParams& params) {
  RerankReport report;
  report.result = ranked;
  const std::size_t depth = std::min(params.depth, ranked.items.size());
  if (depth == 0 || query.empty()) return report;

  std::vector<std::uint32_t> inliers(depth, 0);
  std::vector<char> missing(depth, 0);
  parallel_for(depth, params.threads, [&](std::size_t i) {
    const auto candidate = accessor(ranked.items[i].image_id);
    if (!candidate) {
      missing[i] = 1;
      return;
    }
    RansacParams rp = params.ransac;
    if (rp.inlier_tolerance <= 0) {
      const auto box = whole_image_box(*candidate);
      rp.inlier_tolerance = 0.05 * std::max(box.width(), box.height());
    }
    const auto matches = to_point_matches(match_features(query, *candidate, params.max_distance), query, *candidate);
    inliers[i] = static_cast<std::uint32_t>(ransac_affine(matches, rp).inliers.size());
  });

  std::vector<std::size_t> order(depth);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (inliers[a] != inliers[b]) return inliers[a] > inliers[b];
    const auto& ia = ranked.items[a];
    const auto& ib = ranked.items[b];
    if (ia.score != ib.score) return ia.score > ib.score;
    return ia.image_id < ib.image_id;
  });
  for (std::size_t i = 0; i < depth; ++i) {
    report.result.items[i] = ranked.items[order[i]];
    report.inliers.push_back(inliers[order[i]]);
    if (missing[i]) report.missing.push_back(ranked.items[i].image_id);
  }
  return report;
}

}  // namespace ramk
