#pragma once

// Inverted-file retrieval index.
//
// DTRI layout (little-endian):
//
//   magic "DTRI" | version u16 | mode u8 | flags u8 | codebook hash u64
//   C u32 | D u16 | alpha f64 | tau f64 | region strategy (u16 length + bytes)
//   image count u32, per image: id (u16 length + bytes) | first entry u32 | entry count u32
//   entry count u32, per entry: image u32 | region u32 | gamma f64
//   C posting lists, per word: length u32 | length x entry id u32 | payload
//
// Payload per posting is D x f32 for dense modes or ceil(D/64) x u64 for
// binary modes. Flags: bit 0 = global normalization, bit 1 = regional search.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ramk/codebook.hpp"
#include "ramk/features_io.hpp"
#include "ramk/kernels.hpp"
#include "ramk/ranking.hpp"
#include "ramk/regional.hpp"

namespace ramk {

inline constexpr std::uint16_t kIndexFormatVersion = 1;
inline constexpr std::size_t kDefaultTopN = 100;

enum class Pooling : std::uint8_t { kMax, kAvg };

struct IndexConfig {
  Aggregation mode = Aggregation::kAsmkBinary;
  RegionStrategy regions;
  SelectivityParams selectivity;
  bool global_normalization = true;
  std::size_t threads = 0;  // build parallelism only; never changes the index
};

/// True when `config` stores one entry per selected region (plain modes with
/// a strategy other than whole-image).
bool is_regional_search(const IndexConfig& config) noexcept;

struct IndexEntry {
  std::uint32_t image = 0;   // position in the image table
  std::uint32_t region = 0;  // 0 = whole image

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct IndexedImage {
  std::string image_id;
  std::uint32_t first_entry = 0;
  std::uint32_t entry_count = 0;

  friend bool operator==(const IndexedImage&, const IndexedImage&) = default;
};

struct PostingList {
  std::vector<std::uint32_t> entries;  // ascending
  std::vector<float> residuals;        // dense modes, entries.size() x D
  std::vector<std::uint64_t> codes;    // binary modes, entries.size() x ceil(D/64)

  friend bool operator==(const PostingList&, const PostingList&) = default;
};

/// Per-query diagnostics.
struct QueryStats {
  std::size_t postings_scanned = 0;
  std::size_t words_touched = 0;
};

class RetrievalIndex {
 public:
  /// Builds from in-memory images. Entry numbering follows image order, then
  /// region order. Throws ValidationError on duplicate ids, DimensionError on
  /// a descriptor/codebook D mismatch.
  static RetrievalIndex build(const std::vector<ImageFeatures>& images, const Codebook& codebook,
                              const IndexConfig& config);

  /// Scores every database image against the query (whole-image aggregation
  /// on the query side) and returns the best `top_n` (0 = all). Regional
  /// entries pool to their image by max or by mean over the image's entries.
  /// Throws CompatibilityError if `codebook` is not the one the index was
  /// built with.
  RankedResult query(const ImageFeatures& query, const Codebook& codebook, Pooling pooling,
                     std::size_t top_n = kDefaultTopN, QueryStats* stats = nullptr) const;

  /// Per-entry kernel scores (before pooling) for an already aggregated query.
  std::vector<double> score_entries(const AggregatedRepresentation& query, QueryStats* stats = nullptr) const;

  Aggregation mode() const noexcept { return mode_; }
  bool regional_search() const noexcept { return regional_search_; }
  bool global_normalization() const noexcept { return global_normalization_; }
  const SelectivityParams& selectivity() const noexcept { return selectivity_; }
  const RegionStrategy& regions() const noexcept { return strategy_; }
  std::uint64_t codebook_hash() const noexcept { return codebook_hash_; }
  std::uint32_t num_words() const noexcept { return static_cast<std::uint32_t>(postings_.size()); }
  std::uint16_t dim() const noexcept { return dim_; }

  const std::vector<IndexedImage>& images() const noexcept { return images_; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  const std::vector<double>& gammas() const noexcept { return gammas_; }
  const PostingList& postings(WordId c) const { return postings_.at(c); }
  std::size_t total_postings() const noexcept;

  std::vector<std::uint8_t> encode() const;
  /// Throws CorruptIndexError on any structural problem; never returns a partial index.
  static RetrievalIndex decode(std::span<const std::uint8_t> data, const std::string& context);

  friend bool operator==(const RetrievalIndex&, const RetrievalIndex&) = default;

 private:
  Aggregation mode_ = Aggregation::kAsmkBinary;
  bool regional_search_ = false;
  bool global_normalization_ = true;
  SelectivityParams selectivity_;
  RegionStrategy strategy_;
  std::uint64_t codebook_hash_ = 0;
  std::uint16_t dim_ = 0;
  std::vector<IndexedImage> images_;
  std::vector<IndexEntry> entries_;
  std::vector<double> gammas_;
  std::vector<PostingList> postings_;
};

/// Representations stored for one image: one per selected region in
/// regional-search configurations, otherwise exactly one.
std::vector<AggregatedRepresentation> represent_image(const ImageFeatures& image, const Codebook& codebook,
                                                      const IndexConfig& config);

/// Loads every image of the manifest (in parallel) and builds the index.
/// Throws DimensionError when the manifest D differs from the codebook D.
RetrievalIndex build_index(const DatasetManifest& manifest, const Codebook& codebook, const IndexConfig& config);

void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);

/// Pools per-entry scores to images (max, or sum / entry count) and ranks them.
RankedResult pool_scores(const std::vector<IndexedImage>& images, const std::vector<double>& entry_scores,
                         Pooling pooling, std::size_t top_n);

}  // namespace ramk
