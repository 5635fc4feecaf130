#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ramk {

/// Relevance judgements for one query, in the easy/hard/junk style of the
/// revisited Oxford/Paris protocol.
struct QueryTruth {
  std::string query_id;
  std::vector<std::string> easy;
  std::vector<std::string> hard;
  std::vector<std::string> junk;

  friend bool operator==(const QueryTruth&, const QueryTruth&) = default;
};

/// Text format, one query per line:
///
///   query:<id> easy:<id,id,...> hard:<id,...> junk:<id,...>
///
/// Empty lists are written as `easy:`. The three sets must be disjoint.
struct GroundTruth {
  std::vector<QueryTruth> queries;

  const QueryTruth* find(std::string_view query_id) const noexcept;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

void validate(const GroundTruth& gt);
GroundTruth parse_ground_truth(std::string_view text, const std::string& context);
GroundTruth load_ground_truth(const std::filesystem::path& path);
std::string format_ground_truth(const GroundTruth& gt);
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);

}  // namespace ramk

namespace ramk {

/// Two images known to show the same landmark (input to relevance analysis).
/// Text format, one pair per line: `pair:<query_id> with:<other_id>`.
struct ImagePair {
  std::string first;
  std::string second;

  friend bool operator==(const ImagePair&, const ImagePair&) = default;
};

std::vector<ImagePair> parse_pairs(std::string_view text, const std::string& context);
std::vector<ImagePair> load_pairs(const std::filesystem::path& path);
std::string format_pairs(const std::vector<ImagePair>& pairs);

}  // namespace ramk
