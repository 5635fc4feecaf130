#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ramk/features_io.hpp"
#include "ramk/ground_truth.hpp"
#include "ramk/ranking.hpp"
#include "ramk/rerank.hpp"

namespace ramk {

using IdSet = std::unordered_set<std::string>;

/// Non-interpolated AP after removing junk ids from the ranking: the mean,
/// over all positives, of the precision at each positive's rank. Positives
/// missing from the ranking contribute 0. nullopt when there are no positives.
std::optional<double> average_precision(const std::vector<std::string>& ranked, const IdSet& positives,
                                        const IdSet& junk);

/// Positives among the first k non-junk results, divided by k.
double precision_at(const std::vector<std::string>& ranked, const IdSet& positives, const IdSet& junk,
                    std::size_t k);

/// Medium: positives = easy + hard. Hard: positives = hard, easy joins junk.
enum class Protocol : std::uint8_t { kMedium, kHard };

std::string_view to_string(Protocol p) noexcept;
std::optional<Protocol> parse_protocol(std::string_view name) noexcept;

struct QueryMetrics {
  std::string query_id;
  double ap = 0;
  double precision_at_10 = 0;
  std::size_t positives = 0;
};

struct Metrics {
  Protocol protocol = Protocol::kMedium;
  double map = 0;                         // mean AP over evaluated queries (0 if none)
  double mp10 = 0;                        // mean precision@10 over the same queries
  std::vector<QueryMetrics> per_query;    // result order
  std::vector<std::string> excluded;      // queries without positives under this protocol
  std::vector<std::string> warnings;
};

/// Throws ValidationError when a result names a query absent from `gt`.
/// `corpus_size` > 0 enables a warning for rankings shorter than the corpus.
Metrics evaluate(const std::vector<RankedResult>& results, const GroundTruth& gt, Protocol protocol,
                 std::size_t corpus_size = 0);

/// key:value report, one summary record per protocol followed by per-query records.
std::string format_metrics(const std::vector<Metrics>& metrics);

struct RelevanceParams {
  std::vector<double> bin_edges{0, 50, 100, 150, 200, 250, 300};
  double box_score_threshold = 0.5;  // query-side boxes at or above this define "inside"
  double max_distance = kDefaultMatchDistance;
  RansacParams ransac;  // tolerance 0 = 0.05 max(W, H) of the second image
  std::size_t threads = 0;
};

struct RelevanceBin {
  double low = 0;
  double high = 0;
  std::size_t inside_relevant = 0;
  std::size_t inside_total = 0;
  std::size_t outside_relevant = 0;
  std::size_t outside_total = 0;

  double inside_probability() const noexcept;   // NaN when empty
  double outside_probability() const noexcept;  // NaN when empty
  double ratio() const noexcept;                // inside / outside probability
  bool populated() const noexcept { return inside_total > 0 && outside_total > 0; }
};

struct RelevanceTable {
  std::vector<RelevanceBin> bins;
  std::size_t pairs = 0;
  std::size_t pairs_without_model = 0;
};

/// For each (first, second) pair: match first -> second, fit RANSAC, and label
/// each feature of `first` relevant iff it is an inlier. Features are binned by
/// attention ([low, high), the last bin closed) and by whether they fall inside
/// any qualifying box of `first`. A pair without a model counts all its
/// features as non-relevant. Throws ConfigError on fewer than 2 or unsorted edges.
RelevanceTable analyze_relevance(const std::vector<std::pair<ImageFeatures, ImageFeatures>>& pairs,
                                 const RelevanceParams& params);

/// CSV: bin_low,bin_high,inside_prob,outside_prob,ratio,inside_relevant,inside_total,outside_relevant,outside_total
std::string format_relevance_csv(const RelevanceTable& table);

}  // namespace ramk
