#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ramk/features_io.hpp"

namespace ramk {

inline constexpr std::uint16_t kCodebookFormatVersion = 1;

/// Visual-word index.
using WordId = std::uint32_t;

/// A row-major set of n descriptors of dimension dim (non-owning).
struct DescriptorMatrix {
  std::span<const float> values;
  std::size_t dim = 0;

  std::size_t rows() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::size_t i) const noexcept { return values.subspan(i * dim, dim); }
};

struct KMeansOptions {
  std::uint32_t num_words = 1024;
  std::uint32_t max_iterations = 25;
  double tolerance = 1e-6;  // stop when relative distortion change falls below this
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = all cores; never changes the result
};

/// Visual-word codebook with the exact nearest-centroid quantizer.
///
/// Distances are squared Euclidean, accumulated in double in component
/// order; ties resolve to the lowest word index. An early-exit partial
/// distance scan keeps the result identical to a full linear scan.
class Codebook {
 public:
  Codebook() = default;
  /// Throws ValidationError if the centroids are non-finite or duplicated.
  Codebook(std::uint16_t dim, std::vector<float> centroids);

  std::uint32_t size() const noexcept { return num_words_; }
  std::uint16_t dim() const noexcept { return dim_; }
  std::span<const float> centroid(WordId c) const noexcept { return {centroids_.data() + std::size_t{c} * dim_, dim_}; }
  const std::vector<float>& centroids() const noexcept { return centroids_; }

  /// Throws DimensionError when the descriptor length differs from dim().
  WordId quantize(std::span<const float> descriptor) const;

  /// Content hash of the serialized codebook; indexes record it.
  std::uint64_t content_hash() const;

  // Training metadata; zero for codebooks loaded from disk.
  std::uint32_t iterations_run = 0;
  double final_distortion = 0;
  std::vector<double> distortion_trace;

  friend bool operator==(const Codebook& a, const Codebook& b) {
    return a.dim_ == b.dim_ && a.centroids_ == b.centroids_;
  }

 private:
  std::uint16_t dim_ = 0;
  std::uint32_t num_words_ = 0;
  std::vector<float> centroids_;
};

/// Squared Euclidean distance in double, summed in component order.
double squared_distance(std::span<const float> a, std::span<const float> b) noexcept;

/// Lloyd's k-means with k-means++ seeding.
///
/// Assignments run in parallel. Each new centroid is the sum of its members
/// taken in ascending point order, so the result is bit-identical for any
/// thread count. Empty clusters are reseeded at the point farthest from its
/// assigned centroid. Throws TrainingError when the sample has fewer
/// distinct points than requested words.
Codebook train_codebook(DescriptorMatrix sample, const KMeansOptions& options);

/// Descriptor indices per visual word (single assignment).
struct WordPartition {
  std::vector<WordId> words;                       // nonempty words, ascending
  std::vector<std::vector<std::uint32_t>> members;  // members[k] belongs to words[k], ascending

  std::size_t total() const noexcept;
};

/// Quantizes every descriptor and groups them by word.
WordPartition partition(const Codebook& codebook, const ImageFeatures& features);
/// Same, restricted to the listed descriptor indices.
WordPartition partition(const Codebook& codebook, const ImageFeatures& features,
                        std::span<const std::uint32_t> subset);
/// Groups precomputed word assignments (one per descriptor of `subset`).
WordPartition partition_assigned(std::span<const WordId> assignment, std::span<const std::uint32_t> subset);

// DTRC layout: magic "DTRC" | version u16 | C u32 | D u16 | C x D f32, little-endian.
std::vector<std::uint8_t> encode_codebook(const Codebook& codebook);
Codebook decode_codebook(std::span<const std::uint8_t> data, const std::string& context);
Codebook load_codebook(const std::filesystem::path& path);
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);

}  // namespace ramk
