#pragma once

// Shared helpers for unit and acceptance tests: temporary directories,
// random instance builders, and reference oracles written directly from the
// kernel definitions (dense loops over every word, no library aggregation).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ramk/codebook.hpp"
#include "ramk/features_io.hpp"
#include "ramk/kernels.hpp"
#include "ramk/regional.hpp"
#include "ramk/rng.hpp"

namespace ramk::test {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Restores the working directory on scope exit.
class ScopedCwd {
 public:
  explicit ScopedCwd(const std::filesystem::path& dir);
  ~ScopedCwd();

 private:
  std::filesystem::path previous_;
};

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path);

/// Random image: descriptors uniform in [-1, 1]^d, keypoints uniform in the image.
ImageFeatures random_image(Rng& rng, std::size_t m, std::uint16_t d, std::uint32_t w = 100, std::uint32_t h = 80,
                           std::size_t boxes = 0, const std::string& id = "img");

/// Distinct random centroids in [-1, 1]^d.
Codebook random_codebook(Rng& rng, std::uint32_t c, std::uint16_t d);

/// Descriptors clustered around `c` centroids so words get several members.
ImageFeatures clustered_image(Rng& rng, const Codebook& cb, std::size_t m, double spread, std::uint32_t w,
                              std::uint32_t h, std::size_t boxes, const std::string& id);

namespace oracle {

using Dense = std::map<WordId, std::vector<double>>;  // word -> residual (or +-1 code)

WordId quantize(const Codebook& cb, std::span<const float> x);

struct Rep {
  Dense words;
  double gamma = 0;
};

double sigma(double u, double alpha, double tau);

/// Whole-image aggregation straight from the definitions.
Rep aggregate(const ImageFeatures& f, const Codebook& cb, Aggregation mode);

/// Descriptors inside a box (closed min, open max; a box covering the image takes all).
std::vector<std::size_t> members(const ImageFeatures& f, const RegionBox& box);

/// Regional aggregation of the given regions, straight from the definitions.
Rep aggregate_regional(const ImageFeatures& f, const std::vector<RegionBox>& regions, const Codebook& cb,
                       Aggregation mode, double alpha = 3, double tau = 0);

/// gamma(x) gamma(y) sum over all C words; absent words are zero rows.
double kernel(const Rep& x, const Rep& y, Aggregation mode, std::uint32_t num_words, std::uint16_t dim,
              double alpha = 3, double tau = 0);

/// Asymmetric regional kernel: whole-image query against a regional database rep.
double regional_kernel(const Rep& q, const Rep& db, Aggregation db_mode, std::uint32_t num_words,
                       std::uint16_t dim, bool global_norm, double alpha = 3, double tau = 0);

/// AP by definition with O(n^2) prefix counting.
std::optional<double> average_precision(const std::vector<std::string>& ranked,
                                        const std::vector<std::string>& positives,
                                        const std::vector<std::string>& junk);

}  // namespace oracle
}  // namespace ramk::test
