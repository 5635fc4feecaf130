#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ramk {

struct RankedItem {
  std::string image_id;
  float score = 0;

  friend bool operator==(const RankedItem&, const RankedItem&) = default;
};

/// Scores are non-increasing, ties ordered by image id; ids are unique.
struct RankedResult {
  std::string query_id;
  std::vector<RankedItem> items;
  bool empty_query = false;  // query had no descriptors

  std::vector<std::string> image_ids() const;

  friend bool operator==(const RankedResult&, const RankedResult&) = default;
};

/// Sorts by score descending, then image id ascending.
void sort_ranking(std::vector<RankedItem>& items);

// Results file: optional '#' header lines, then one record per query:
//
//   query:<id> ranked:<image>=<score>,<image>=<score>,...
//
// An empty ranking is written as `ranked:`. Scores use the shortest decimal
// form that round-trips the stored float.
std::string format_results(const std::vector<RankedResult>& results);
std::vector<RankedResult> parse_results(std::string_view text, const std::string& context);
std::vector<RankedResult> load_results(const std::filesystem::path& path);

}  // namespace ramk
