#include "ramk/kernels.hpp"

#include <bit>
#include <cmath>

#include "ramk/error.hpp"

namespace ramk {

namespace {

struct ModeName {
  Aggregation mode;
  std::string_view name;
};

constexpr ModeName kModeNames[] = {
    {Aggregation::kVlad, "vlad"},
    {Aggregation::kAsmk, "asmk"},
    {Aggregation::kAsmkBinary, "asmk-star"},
    {Aggregation::kRVlad, "r-vlad"},
    {Aggregation::kNaiveRAsmk, "naive-r-asmk"},
    {Aggregation::kRAsmk, "r-asmk"},
    {Aggregation::kRAsmkBinary, "r-asmk-star"},
};

}  // namespace

std::string_view to_string(Aggregation mode) noexcept {
  for (const auto& m : kModeNames) {
    if (m.mode == mode) return m.name;
  }
  return "unknown";
}

std::optional<Aggregation> parse_aggregation(std::string_view name) noexcept {
  for (const auto& m : kModeNames) {
    if (m.name == name) return m.mode;
  }
  return std::nullopt;
}

Aggregation query_mode(Aggregation m) noexcept {
  switch (m) {
    case Aggregation::kRVlad:
      return Aggregation::kVlad;
    case Aggregation::kNaiveRAsmk:
    case Aggregation::kRAsmk:
      return Aggregation::kAsmk;
    case Aggregation::kRAsmkBinary:
      return Aggregation::kAsmkBinary;
    default:
      return m;
  }
}

void SelectivityParams::validate() const {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw ConfigError("selectivity alpha must be >= 1");
  if (!(tau < 1.0) || std::isnan(tau)) throw ConfigError("selectivity tau must be < 1");
}

double selectivity(double u, const SelectivityParams& params) noexcept {
  if (!(u > params.tau)) return 0.0;
  const double mag = std::pow(std::abs(u), params.alpha);
  return u < 0 ? -mag : mag;
}

BinaryCode binarize(std::span<const double> v) {
  BinaryCode code(code_words(v.size()), 0);
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] > 0) code[j / 64] |= std::uint64_t{1} << (j % 64);
  }
  return code;
}

int code_sign(std::span<const std::uint64_t> code, std::size_t j) noexcept {
  return (code[j / 64] >> (j % 64)) & 1u ? 1 : -1;
}

std::size_t hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) noexcept {
  std::size_t h = 0;
  for (std::size_t i = 0; i < a.size(); ++i) h += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
  return h;
}

double binary_similarity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                         std::size_t dim) noexcept {
  // Padding bits above dim are zero on both sides and never differ.
  const auto h = static_cast<double>(hamming_distance(a, b));
  return 1.0 - 2.0 * h / static_cast<double>(dim);
}

std::vector<double> vlad_residual(const ImageFeatures& features, std::span<const std::uint32_t> members,
                                  std::span<const float> centroid) {
  if (!members.empty() && features.dim != centroid.size()) {
    throw DimensionError("residual of D=" + std::to_string(features.dim) + " descriptors against a centroid of D=" +
                         std::to_string(centroid.size()));
  }
  std::vector<double> v(centroid.size(), 0.0);
  for (auto i : members) {
    auto x = features.descriptor(i);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += static_cast<double>(x[j]) - static_cast<double>(centroid[j]);
  }
  return v;
}

std::vector<double> vlad_residual(DescriptorMatrix descriptors, std::span<const float> centroid) {
  if (descriptors.rows() > 0 && descriptors.dim != centroid.size()) {
    throw DimensionError("residual of D=" + std::to_string(descriptors.dim) + " descriptors against a centroid of D=" +
                         std::to_string(centroid.size()));
  }
  std::vector<double> v(centroid.size(), 0.0);
  for (std::size_t i = 0; i < descriptors.rows(); ++i) {
    auto x = descriptors.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += static_cast<double>(x[j]) - static_cast<double>(centroid[j]);
  }
  return v;
}

std::optional<std::vector<double>> normalize_residual(std::span<const double> v) {
  double norm2 = 0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0) return std::nullopt;
  const double norm = std::sqrt(norm2);
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x /= norm;
  return out;
}

AggregatedRepresentation aggregate(const ImageFeatures& features, const WordPartition& partition,
                                   const Codebook& codebook, Aggregation mode) {
  if (is_regional(mode)) {
    throw ConfigError("aggregate() handles whole-image modes; use aggregate_regional() for " +
                      std::string(to_string(mode)));
  }
  AggregatedRepresentation rep;
  rep.mode = mode;
  rep.dim = codebook.dim();
  for (std::size_t k = 0; k < partition.words.size(); ++k) {
    const WordId c = partition.words[k];
    const auto v = vlad_residual(features, partition.members[k], codebook.centroid(c));
    if (mode == Aggregation::kVlad) {
      bool nonzero = false;
      for (double x : v) nonzero |= (x != 0);
      if (!nonzero) continue;
      rep.words.push_back(c);
      for (double x : v) rep.residuals.push_back(static_cast<float>(x));
      continue;
    }
    const auto unit = normalize_residual(v);
    if (!unit) continue;
    rep.words.push_back(c);
    if (mode == Aggregation::kAsmk) {
      for (double x : *unit) rep.residuals.push_back(static_cast<float>(x));
    } else {
      const auto code = binarize(*unit);
      rep.codes.insert(rep.codes.end(), code.begin(), code.end());
    }
  }
  if (rep.empty()) {
    rep.gamma = 0;
  } else if (mode == Aggregation::kVlad) {
    double self = 0;
    for (float x : rep.residuals) self += static_cast<double>(x) * x;
    rep.gamma = self > 0 ? 1.0 / std::sqrt(self) : 0.0;
  } else {
    // Every stored word matches itself with similarity 1 and sigma(1) = 1.
    rep.gamma = 1.0 / std::sqrt(static_cast<double>(rep.size()));
  }
  return rep;
}

AggregatedRepresentation aggregate(const ImageFeatures& features, const Codebook& codebook, Aggregation mode) {
  return aggregate(features, partition(codebook, features), codebook, mode);
}

double word_selectivity(Aggregation mode, double u, const SelectivityParams& params) noexcept {
  return is_vlad_family(mode) ? u : selectivity(u, params);
}

double kernel_sum(const AggregatedRepresentation& x, const AggregatedRepresentation& y,
                  const SelectivityParams& params) {
  if (x.dim != y.dim && !x.empty() && !y.empty()) {
    throw CompatibilityError("representations have different dimensions");
  }
  if (is_binary(x.mode) != is_binary(y.mode) || is_vlad_family(x.mode) != is_vlad_family(y.mode)) {
    throw CompatibilityError(std::string("cannot compare ") + std::string(to_string(x.mode)) + " with " +
                             std::string(to_string(y.mode)));
  }
  const bool binary = is_binary(x.mode);
  double sum = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < x.words.size() && j < y.words.size()) {
    if (x.words[i] < y.words[j]) {
      ++i;
    } else if (y.words[j] < x.words[i]) {
      ++j;
    } else {
      double u;
      if (binary) {
        u = binary_similarity(x.code(i), y.code(j), x.dim);
      } else {
        u = 0;
        auto a = x.residual(i);
        auto b = y.residual(j);
        for (std::size_t d = 0; d < a.size(); ++d) u += static_cast<double>(a[d]) * b[d];
      }
      sum += word_selectivity(x.mode, u, params);
      ++i;
      ++j;
    }
  }
  return sum;
}

double kernel_similarity(const AggregatedRepresentation& x, const AggregatedRepresentation& y,
                         const SelectivityParams& params) {
  if (x.mode != y.mode) {
    throw CompatibilityError(std::string("kernel mode mismatch: ") + std::string(to_string(x.mode)) + " vs " +
                             std::string(to_string(y.mode)));
  }
  if (is_regional(x.mode)) throw CompatibilityError("kernel_similarity() needs whole-image representations");
  return x.gamma * y.gamma * kernel_sum(x, y, params);
}

}  // namespace ramk
