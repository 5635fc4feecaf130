#include "ramk/ground_truth.hpp"

#include <set>

#include "ramk/binary_io.hpp"
#include "ramk/error.hpp"
#include "ramk/text_format.hpp"

namespace ramk {

const QueryTruth* GroundTruth::find(std::string_view query_id) const noexcept {
  for (const auto& q : queries) {
    if (q.query_id == query_id) return &q;
  }
  return nullptr;
}

void validate(const GroundTruth& gt) {
  std::set<std::string_view> query_ids;
  for (const auto& q : gt.queries) {
    if (!query_ids.insert(q.query_id).second) throw ValidationError("duplicate ground-truth query '" + q.query_id + "'");
    std::set<std::string_view> seen;
    for (const auto* list : {&q.easy, &q.hard, &q.junk}) {
      for (const auto& id : *list) {
        if (!seen.insert(id).second) {
          throw ValidationError("ground truth for query '" + q.query_id + "' lists '" + id +
                                "' more than once across easy/hard/junk");
        }
      }
    }
  }
}

GroundTruth parse_ground_truth(std::string_view text, const std::string& context) {
  GroundTruth gt;
  for (const auto& rec : parse_records(text, context)) {
    if (rec.first_key() != "query") {
      throw FormatError(context + ":" + std::to_string(rec.line) + ": expected a 'query:' record");
    }
    QueryTruth q;
    q.query_id = rec.require("query", context);
    if (const auto* v = rec.find("easy")) q.easy = split(*v, ',');
    if (const auto* v = rec.find("hard")) q.hard = split(*v, ',');
    if (const auto* v = rec.find("junk")) q.junk = split(*v, ',');
    gt.queries.push_back(std::move(q));
  }
  validate(gt);
  return gt;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("ground truth '" + path.string() + "' does not exist");
  return parse_ground_truth(read_file_text(path), path.string());
}

std::string format_ground_truth(const GroundTruth& gt) {
  std::string out;
  for (const auto& q : gt.queries) {
    out += "query:" + q.query_id + " easy:" + join(q.easy, ',') + " hard:" + join(q.hard, ',') +
           " junk:" + join(q.junk, ',') + '\n';
  }
  return out;
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  validate(gt);
  write_file_text(path, format_ground_truth(gt));
}

}  // namespace ramk

namespace ramk {

std::vector<ImagePair> parse_pairs(std::string_view text, const std::string& context) {
  std::vector<ImagePair> pairs;
  for (const auto& rec : parse_records(text, context)) {
    if (rec.first_key() != "pair") {
      throw FormatError(context + ":" + std::to_string(rec.line) + ": expected a 'pair:' record");
    }
    pairs.push_back({rec.require("pair", context), rec.require("with", context)});
  }
  return pairs;
}

std::vector<ImagePair> load_pairs(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("pair list '" + path.string() + "' does not exist");
  return parse_pairs(read_file_text(path), path.string());
}

std::string format_pairs(const std::vector<ImagePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) out += "pair:" + p.first + " with:" + p.second + '\n';
  return out;
}

}  // namespace ramk
