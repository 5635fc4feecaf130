#include "ramk/ranking.hpp"

#include <algorithm>
#include <set>

#include "ramk/binary_io.hpp"
#include "ramk/error.hpp"
#include "ramk/text_format.hpp"

namespace ramk {

std::vector<std::string> RankedResult::image_ids() const {
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (const auto& it : items) ids.push_back(it.image_id);
  return ids;
}

void sort_ranking(std::vector<RankedItem>& items) {
  std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image_id < b.image_id;
  });
}

std::string format_results(const std::vector<RankedResult>& results) {
  std::string out;
  for (const auto& r : results) {
    out += "query:" + r.query_id + " ranked:";
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      if (i) out += ',';
      out += r.items[i].image_id + '=' + format_number(r.items[i].score);
    }
    out += '\n';
  }
  return out;
}

std::vector<RankedResult> parse_results(std::string_view text, const std::string& context) {
  std::vector<RankedResult> results;
  for (const auto& rec : parse_records(text, context)) {
    if (rec.first_key() != "query") {
      throw FormatError(context + ":" + std::to_string(rec.line) + ": expected a 'query:' record");
    }
    RankedResult r;
    r.query_id = rec.require("query", context);
    std::set<std::string> seen;
    for (const auto& token : split(rec.require("ranked", context), ',')) {
      const auto eq = token.rfind('=');
      const auto score = eq == std::string::npos ? std::nullopt : parse_double(std::string_view(token).substr(eq + 1));
      if (!score) {
        throw FormatError(context + ":" + std::to_string(rec.line) + ": malformed ranked entry '" + token + "'");
      }
      RankedItem item{token.substr(0, eq), static_cast<float>(*score)};
      if (!seen.insert(item.image_id).second) {
        throw FormatError(context + ":" + std::to_string(rec.line) + ": image '" + item.image_id +
                          "' ranked twice");
      }
      r.items.push_back(std::move(item));
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<RankedResult> load_results(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("results file '" + path.string() + "' does not exist");
  return parse_results(read_file_text(path), path.string());
}

}  // namespace ramk
