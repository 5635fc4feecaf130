#include "ramk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ramk/error.hpp"
#include "ramk/parallel.hpp"
#include "ramk/regional.hpp"
#include "ramk/text_format.hpp"

namespace ramk {

std::optional<double> average_precision(const std::vector<std::string>& ranked, const IdSet& positives,
                                        const IdSet& junk) {
  if (positives.empty()) return std::nullopt;
  double sum = 0;
  std::size_t rank = 0;
  std::size_t hits = 0;
  for (const auto& id : ranked) {
    if (junk.contains(id)) continue;
    ++rank;
    if (positives.contains(id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(positives.size());
}

double precision_at(const std::vector<std::string>& ranked, const IdSet& positives, const IdSet& junk,
                    std::size_t k) {
  if (k == 0) return 0;
  std::size_t seen = 0;
  std::size_t hits = 0;
  for (const auto& id : ranked) {
    if (seen == k) break;
    if (junk.contains(id)) continue;
    ++seen;
    if (positives.contains(id)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::string_view to_string(Protocol p) noexcept { return p == Protocol::kMedium ? "medium" : "hard"; }

std::optional<Protocol> parse_protocol(std::string_view name) noexcept {
  if (name == "medium") return Protocol::kMedium;
  if (name == "hard") return Protocol::kHard;
  return std::nullopt;
}

Metrics evaluate(const std::vector<RankedResult>& results, const GroundTruth& gt, Protocol protocol,
                 std::size_t corpus_size) {
  Metrics m;
  m.protocol = protocol;
  for (const auto& r : results) {
    const QueryTruth* truth = gt.find(r.query_id);
    if (!truth) throw ValidationError("results contain query '" + r.query_id + "' with no ground-truth record");
    IdSet positives(truth->hard.begin(), truth->hard.end());
    IdSet junk(truth->junk.begin(), truth->junk.end());
    if (protocol == Protocol::kMedium) {
      positives.insert(truth->easy.begin(), truth->easy.end());
    } else {
      junk.insert(truth->easy.begin(), truth->easy.end());
    }
    const auto ids = r.image_ids();
    const auto ap = average_precision(ids, positives, junk);
    if (!ap) {
      m.excluded.push_back(r.query_id);
      continue;
    }
    if (corpus_size > 0 && ids.size() < corpus_size) {
      m.warnings.push_back("query '" + r.query_id + "' ranks " + std::to_string(ids.size()) + " of " +
                           std::to_string(corpus_size) + " images; AP is a lower bound");
    }
    m.per_query.push_back({r.query_id, *ap, precision_at(ids, positives, junk, 10), positives.size()});
  }
  if (!m.per_query.empty()) {
    for (const auto& q : m.per_query) {
      m.map += q.ap;
      m.mp10 += q.precision_at_10;
    }
    m.map /= static_cast<double>(m.per_query.size());
    m.mp10 /= static_cast<double>(m.per_query.size());
  } else {
    m.warnings.push_back(std::string("no query has positives under the ") + std::string(to_string(protocol)) +
                         " protocol");
  }
  return m;
}

std::string format_metrics(const std::vector<Metrics>& metrics) {
  std::string out;
  for (const auto& m : metrics) {
    out += "protocol:" + std::string(to_string(m.protocol)) + " mAP:" + format_number(m.map) +
           " mP@10:" + format_number(m.mp10) + " queries:" + std::to_string(m.per_query.size()) +
           " excluded:" + std::to_string(m.excluded.size()) + '\n';
  }
  for (const auto& m : metrics) {
    for (const auto& q : m.per_query) {
      out += "query:" + q.query_id + " protocol:" + std::string(to_string(m.protocol)) + " ap:" + format_number(q.ap) +
             " p@10:" + format_number(q.precision_at_10) + " positives:" + std::to_string(q.positives) + '\n';
    }
    for (const auto& id : m.excluded) {
      out += "query:" + id + " protocol:" + std::string(to_string(m.protocol)) + " excluded:no-positives\n";
    }
  }
  return out;
}

namespace {

double ratio_or_nan(std::size_t num, std::size_t den) {
  return den == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double RelevanceBin::inside_probability() const noexcept { return ratio_or_nan(inside_relevant, inside_total); }
double RelevanceBin::outside_probability() const noexcept { return ratio_or_nan(outside_relevant, outside_total); }

double RelevanceBin::ratio() const noexcept {
  const double in = inside_probability();
  const double out = outside_probability();
  if (std::isnan(in) || std::isnan(out)) return std::numeric_limits<double>::quiet_NaN();
  if (out == 0) return in > 0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
  return in / out;
}

RelevanceTable analyze_relevance(const std::vector<std::pair<ImageFeatures, ImageFeatures>>& pairs,
                                 const RelevanceParams& params) {
  const auto& edges = params.bin_edges;
  if (edges.size() < 2) throw ConfigError("relevance analysis needs at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ConfigError("bin edges must be strictly increasing");
  }

  RelevanceTable table;
  table.pairs = pairs.size();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) table.bins.push_back({edges[i], edges[i + 1]});

  // Per pair: feature labels, gathered afterwards in pair order.
  struct PairLabels {
    std::vector<char> relevant;
    bool has_model = false;
  };
  std::vector<PairLabels> labels(pairs.size());
  parallel_for(pairs.size(), params.threads, [&](std::size_t p) {
    const auto& [first, second] = pairs[p];
    auto& out = labels[p];
    out.relevant.assign(first.size(), 0);
    RansacParams rp = params.ransac;
    if (rp.inlier_tolerance <= 0) {
      const auto box = whole_image_box(second);
      rp.inlier_tolerance = 0.05 * std::max(box.width(), box.height());
    }
    const auto matches = match_features(first, second, params.max_distance);
    const auto fit = ransac_affine(to_point_matches(matches, first, second), rp);
    out.has_model = fit.model.has_value();
    for (auto i : fit.inliers) out.relevant[matches[i].query_index] = 1;
  });

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& first = pairs[p].first;
    if (!labels[p].has_model) ++table.pairs_without_model;
    for (std::size_t i = 0; i < first.size(); ++i) {
      const auto& kp = first.keypoints[i];
      const double att = kp.attention;
      if (att < edges.front() || att > edges.back()) continue;
      auto it = std::upper_bound(edges.begin(), edges.end(), att);
      std::size_t bin = static_cast<std::size_t>(it - edges.begin());
      bin = bin == 0 ? 0 : bin - 1;
      bin = std::min(bin, table.bins.size() - 1);
      const bool inside = std::any_of(first.boxes.begin(), first.boxes.end(), [&](const RegionBox& b) {
        return b.score >= params.box_score_threshold && b.contains(kp.x, kp.y);
      });
      auto& b = table.bins[bin];
      const bool rel = labels[p].relevant[i] != 0;
      if (inside) {
        ++b.inside_total;
        b.inside_relevant += rel;
      } else {
        ++b.outside_total;
        b.outside_relevant += rel;
      }
    }
  }
  return table;
}

std::string format_relevance_csv(const RelevanceTable& table) {
  std::string out =
      "bin_low,bin_high,inside_prob,outside_prob,ratio,inside_relevant,inside_total,outside_relevant,outside_total\n";
  for (const auto& b : table.bins) {
    out += format_number(b.low) + ',' + format_number(b.high) + ',' + format_number(b.inside_probability()) + ',' +
           format_number(b.outside_probability()) + ',' + format_number(b.ratio()) + ',' +
           std::to_string(b.inside_relevant) + ',' + std::to_string(b.inside_total) + ',' +
           std::to_string(b.outside_relevant) + ',' + std::to_string(b.outside_total) + '\n';
  }
  return out;
}

}  // namespace ramk
