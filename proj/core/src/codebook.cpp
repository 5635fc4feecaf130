#include "ramk/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "ramk/binary_io.hpp"
#include "ramk/error.hpp"
#include "ramk/parallel.hpp"
#include "ramk/rng.hpp"

namespace ramk {

namespace {

// Nearest row of `centroids` (k rows of length dim) to x. Partial sums only
// grow, so a row is abandoned once its partial sum exceeds the best distance;
// the winner and its distance equal those of a full scan.
template <typename T>
std::pair<std::uint32_t, double> nearest(std::span<const float> x, const T* centroids, std::size_t k,
                                         std::size_t dim) noexcept {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const T* row = centroids + c * dim;
    double d = 0;
    std::size_t j = 0;
    for (; j < dim; ++j) {
      const double diff = static_cast<double>(x[j]) - static_cast<double>(row[j]);
      d += diff * diff;
      if (d > best_d) break;
    }
    if (j == dim && d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return {best, best_d};
}

std::size_t count_distinct_rows(DescriptorMatrix m, std::size_t stop_at) {
  const std::size_t n = m.rows();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto less = [&](std::uint32_t a, std::uint32_t b) {
    auto ra = m.row(a);
    auto rb = m.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = n == 0 ? 0 : 1;
  for (std::size_t i = 1; i < n && distinct < stop_at; ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

}  // namespace

double squared_distance(std::span<const float> a, std::span<const float> b) noexcept {
  double d = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    d += diff * diff;
  }
  return d;
}

Codebook::Codebook(std::uint16_t dim, std::vector<float> centroids)
    : dim_(dim), centroids_(std::move(centroids)) {
  if (dim_ == 0) throw ValidationError("codebook dimension is 0");
  if (centroids_.empty() || centroids_.size() % dim_ != 0) {
    throw ValidationError("codebook payload is not a positive multiple of D=" + std::to_string(dim_));
  }
  num_words_ = static_cast<std::uint32_t>(centroids_.size() / dim_);
  for (float v : centroids_) {
    if (!std::isfinite(v)) throw ValidationError("codebook has a non-finite centroid component");
  }
  std::unordered_set<std::string_view> seen;
  const auto* bytes = reinterpret_cast<const char*>(centroids_.data());
  const std::size_t row_bytes = std::size_t{dim_} * sizeof(float);
  for (std::uint32_t c = 0; c < num_words_; ++c) {
    if (!seen.emplace(bytes + c * row_bytes, row_bytes).second) {
      throw ValidationError("codebook has duplicate centroid at word " + std::to_string(c));
    }
  }
}

WordId Codebook::quantize(std::span<const float> descriptor) const {
  if (descriptor.size() != dim_) {
    throw DimensionError("descriptor of length " + std::to_string(descriptor.size()) +
                         " quantized against codebook with D=" + std::to_string(dim_));
  }
  return nearest(descriptor, centroids_.data(), num_words_, dim_).first;
}

std::uint64_t Codebook::content_hash() const { return fnv1a64(encode_codebook(*this)); }

Codebook train_codebook(DescriptorMatrix sample, const KMeansOptions& options) {
  const std::size_t k = options.num_words;
  const std::size_t dim = sample.dim;
  const std::size_t n = sample.rows();
  if (k == 0) throw ConfigError("k-means needs at least one word");
  if (dim == 0 || dim > 0xFFFF) throw ConfigError("k-means sample has invalid dimension");
  if (count_distinct_rows(sample, k) < k) {
    throw TrainingError("training sample has fewer than " + std::to_string(k) + " distinct descriptors");
  }
  for (float v : sample.values) {
    if (!std::isfinite(v)) throw TrainingError("training sample contains a non-finite value");
  }

  Rng rng(options.seed);
  std::vector<double> centroids(k * dim);
  auto set_centroid = [&](std::size_t c, std::size_t point) {
    auto row = sample.row(point);
    std::copy(row.begin(), row.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
  };

  // k-means++ seeding.
  std::vector<double> dist(n);
  set_centroid(0, rng.below(n));
  parallel_for(n, options.threads, [&](std::size_t i) {
    dist[i] = nearest(sample.row(i), centroids.data(), 1, dim).second;
  });
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const double target = rng.uniform() * total;
    double cumulative = 0;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] <= 0) continue;
      cumulative += dist[i];
      chosen = i;
      if (cumulative > target) break;
    }
    set_centroid(c, chosen);
    const double* row = centroids.data() + c * dim;
    parallel_for(n, options.threads, [&](std::size_t i) {
      dist[i] = std::min(dist[i], nearest(sample.row(i), row, 1, dim).second);
    });
  }

  std::vector<std::uint32_t> assign(n);
  std::vector<double> trace;
  auto assignment_pass = [&] {
    parallel_for(n, options.threads, [&](std::size_t i) {
      const auto [c, d] = nearest(sample.row(i), centroids.data(), k, dim);
      assign[i] = c;
      dist[i] = d;
    });
    const double distortion = std::accumulate(dist.begin(), dist.end(), 0.0);
    trace.push_back(distortion);
    return distortion;
  };

  std::uint32_t updates = 0;
  bool converged = false;
  double previous = assignment_pass();
  while (updates < options.max_iterations) {
    // Members of each cluster in ascending point order; each centroid is
    // summed independently in that order, so threads never share a sum.
    std::vector<std::uint32_t> offsets(k + 1, 0);
    for (auto c : assign) ++offsets[c + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<std::uint32_t> members(n);
    {
      auto cursor = offsets;
      for (std::uint32_t i = 0; i < n; ++i) members[cursor[assign[i]]++] = i;
    }
    parallel_for(k, options.threads, [&](std::size_t c) {
      const auto begin = offsets[c];
      const auto end = offsets[c + 1];
      if (begin == end) return;
      double* row = centroids.data() + c * dim;
      std::fill(row, row + dim, 0.0);
      for (auto m = begin; m < end; ++m) {
        auto x = sample.row(members[m]);
        for (std::size_t j = 0; j < dim; ++j) row[j] += x[j];
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t j = 0; j < dim; ++j) row[j] *= inv;
    });
    for (std::size_t c = 0; c < k; ++c) {
      if (offsets[c] != offsets[c + 1]) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      set_centroid(c, far);
      dist[far] = 0;
    }
    ++updates;

    const double current = assignment_pass();
    const double change = previous > 0 ? (previous - current) / previous : 0.0;
    previous = current;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  (void)converged;

  std::vector<float> out(centroids.size());
  std::transform(centroids.begin(), centroids.end(), out.begin(), [](double v) { return static_cast<float>(v); });
  Codebook cb = [&] {
    try {
      return Codebook(static_cast<std::uint16_t>(dim), std::move(out));
    } catch (const ValidationError& e) {
      throw TrainingError(std::string("k-means produced an invalid codebook: ") + e.what());
    }
  }();
  cb.iterations_run = updates;
  cb.final_distortion = trace.back();
  cb.distortion_trace = std::move(trace);
  return cb;
}

std::size_t WordPartition::total() const noexcept {
  std::size_t t = 0;
  for (const auto& m : members) t += m.size();
  return t;
}

WordPartition partition_assigned(std::span<const WordId> assignment, std::span<const std::uint32_t> subset) {
  std::vector<std::pair<WordId, std::uint32_t>> pairs;
  pairs.reserve(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) pairs.emplace_back(assignment[i], subset[i]);
  std::sort(pairs.begin(), pairs.end());
  WordPartition p;
  for (const auto& [w, idx] : pairs) {
    if (p.words.empty() || p.words.back() != w) {
      p.words.push_back(w);
      p.members.emplace_back();
    }
    p.members.back().push_back(idx);
  }
  return p;
}

WordPartition partition(const Codebook& codebook, const ImageFeatures& features,
                        std::span<const std::uint32_t> subset) {
  if (!features.empty() && features.dim != codebook.dim()) {
    throw DimensionError("features of '" + features.image_id + "' have D=" + std::to_string(features.dim) +
                         ", codebook has D=" + std::to_string(codebook.dim()));
  }
  std::vector<WordId> assignment(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) assignment[i] = codebook.quantize(features.descriptor(subset[i]));
  return partition_assigned(assignment, subset);
}

WordPartition partition(const Codebook& codebook, const ImageFeatures& features) {
  std::vector<std::uint32_t> all(features.size());
  std::iota(all.begin(), all.end(), 0u);
  return partition(codebook, features, all);
}

std::vector<std::uint8_t> encode_codebook(const Codebook& cb) {
  ByteWriter w;
  w.magic("DTRC");
  w.u16(kCodebookFormatVersion);
  w.u32(cb.size());
  w.u16(cb.dim());
  for (float v : cb.centroids()) w.f32(v);
  return w.take();
}

Codebook decode_codebook(std::span<const std::uint8_t> data, const std::string& context) {
  ByteReader r(data, context);
  r.expect_magic("DTRC");
  const auto version = r.u16("version");
  if (version != kCodebookFormatVersion) r.fail("unsupported version " + std::to_string(version));
  const auto c = r.u32("C");
  const auto d = r.u16("D");
  if (c == 0) r.fail("field 'C' is 0");
  if (d == 0) r.fail("field 'D' is 0");
  const std::size_t count = std::size_t{c} * d;
  if (r.remaining() != count * 4) {
    r.fail("payload has " + std::to_string(r.remaining()) + " bytes, fields 'C'/'D' require " +
           std::to_string(count * 4));
  }
  std::vector<float> centroids(count);
  for (auto& v : centroids) v = r.f32("centroid");
  r.expect_end();
  try {
    return Codebook(d, std::move(centroids));
  } catch (const ValidationError& e) {
    throw FormatError(context + ": " + e.what());
  }
}

Codebook load_codebook(const std::filesystem::path& path) {
  return decode_codebook(read_file_bytes(path), path.string());
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  write_file_bytes(path, encode_codebook(codebook));
}

}  // namespace ramk
