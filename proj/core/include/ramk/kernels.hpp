#pragma once

// Aggregated match kernels.
//
//   K(X, Y) = gamma(X) gamma(Y) sum_c sigma(Phi(X_c)^T Phi(Y_c))
//
// with per-word residual aggregates Phi and the selectivity function sigma.
// VLAD uses raw residual sums and the identity for sigma; ASMK uses unit
// residuals and the thresholded polynomial sigma; ASMK* binarizes them.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ramk/codebook.hpp"
#include "ramk/features_io.hpp"

namespace ramk {

/// Representation family. The first three are whole-image (or per-region)
/// aggregations; the R- modes fold all regions of an image into one.
enum class Aggregation : std::uint8_t {
  kVlad = 0,
  kAsmk = 1,
  kAsmkBinary = 2,
  kRVlad = 3,
  kNaiveRAsmk = 4,
  kRAsmk = 5,
  kRAsmkBinary = 6,
};

/// CLI names: vlad, asmk, asmk-star, r-vlad, naive-r-asmk, r-asmk, r-asmk-star.
std::string_view to_string(Aggregation mode) noexcept;
std::optional<Aggregation> parse_aggregation(std::string_view name) noexcept;

constexpr bool is_binary(Aggregation m) noexcept {
  return m == Aggregation::kAsmkBinary || m == Aggregation::kRAsmkBinary;
}
constexpr bool is_regional(Aggregation m) noexcept { return static_cast<std::uint8_t>(m) >= 3; }
constexpr bool is_vlad_family(Aggregation m) noexcept { return m == Aggregation::kVlad || m == Aggregation::kRVlad; }
/// Whole-image mode used for the query side of an asymmetric comparison.
Aggregation query_mode(Aggregation m) noexcept;

struct SelectivityParams {
  double alpha = 3.0;
  double tau = 0.0;

  /// Requires alpha >= 1 and tau < 1 (so that a unit self-match survives).
  void validate() const;

  friend bool operator==(const SelectivityParams&, const SelectivityParams&) = default;
};

/// sign(u)|u|^alpha when u > tau, else 0.
double selectivity(double u, const SelectivityParams& params) noexcept;

/// Packed +-1 vector: bit j set means component j is +1.
using BinaryCode = std::vector<std::uint64_t>;

constexpr std::size_t code_words(std::size_t dim) noexcept { return (dim + 63) / 64; }

/// b(x) = +1 if x > 0, -1 otherwise (so b(0) = -1).
BinaryCode binarize(std::span<const double> v);
int code_sign(std::span<const std::uint64_t> code, std::size_t j) noexcept;
std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) noexcept;
/// (1/D) <b(x), b(y)> = 1 - 2 hamming / D.
double binary_similarity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t dim) noexcept;

/// Sparse per-word aggregate of one image, region, or region set.
///
/// `words` is strictly ascending. Dense modes keep `dim` floats per word in
/// `residuals`; binary modes keep code_words(dim) words per entry in `codes`.
/// Words whose aggregated residual is exactly zero are absent.
struct AggregatedRepresentation {
  Aggregation mode = Aggregation::kAsmk;
  std::uint16_t dim = 0;
  std::vector<WordId> words;
  std::vector<float> residuals;
  std::vector<std::uint64_t> codes;
  double gamma = 0;           // 0 for an empty representation
  std::uint32_t regions = 1;  // regions folded in (R- modes)

  std::size_t size() const noexcept { return words.size(); }
  bool empty() const noexcept { return words.empty(); }
  std::span<const float> residual(std::size_t k) const noexcept {
    return {residuals.data() + k * dim, dim};
  }
  std::span<const std::uint64_t> code(std::size_t k) const noexcept {
    const auto w = code_words(dim);
    return {codes.data() + k * w, w};
  }

  friend bool operator==(const AggregatedRepresentation&, const AggregatedRepresentation&) = default;
};

/// V = sum over members of (x - centroid), in double. Empty input gives zeros.
std::vector<double> vlad_residual(const ImageFeatures& features, std::span<const std::uint32_t> members,
                                  std::span<const float> centroid);
std::vector<double> vlad_residual(DescriptorMatrix descriptors, std::span<const float> centroid);

/// Unit-norm copy, or nullopt for the zero vector (the word is then dropped).
std::optional<std::vector<double>> normalize_residual(std::span<const double> v);

/// Whole-image aggregation in one of the non-regional modes.
AggregatedRepresentation aggregate(const ImageFeatures& features, const WordPartition& partition,
                                   const Codebook& codebook, Aggregation mode);
AggregatedRepresentation aggregate(const ImageFeatures& features, const Codebook& codebook, Aggregation mode);

/// sigma applied to a per-word similarity; identity for the VLAD family.
double word_selectivity(Aggregation mode, double u, const SelectivityParams& params) noexcept;

/// Unnormalized kernel sum over common words: sum_c sigma(Phi(X_c)^T Phi(Y_c)).
double kernel_sum(const AggregatedRepresentation& x, const AggregatedRepresentation& y,
                  const SelectivityParams& params);

/// K(X, Y) for two representations of the same non-regional mode.
/// Throws CompatibilityError on mode or dimension mismatch.
double kernel_similarity(const AggregatedRepresentation& x, const AggregatedRepresentation& y,
                         const SelectivityParams& params);

}  // namespace ramk
