#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>
#include <unistd.h>

namespace ramk::test {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  const auto base = fs::temp_directory_path();
  for (;;) {
    auto candidate = base / ("ramk-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ScopedCwd::ScopedCwd(const fs::path& dir) : previous_(fs::current_path()) { fs::current_path(dir); }
ScopedCwd::~ScopedCwd() {
  std::error_code ec;
  fs::current_path(previous_, ec);
}

std::vector<std::uint8_t> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageFeatures random_image(Rng& rng, std::size_t m, std::uint16_t d, std::uint32_t w, std::uint32_t h,
                           std::size_t boxes, const std::string& id) {
  ImageFeatures f;
  f.image_id = id;
  f.width = w;
  f.height = h;
  f.dim = d;
  std::vector<float> v(d);
  for (std::size_t i = 0; i < m; ++i) {
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    Keypoint kp;
    kp.x = static_cast<float>(rng.uniform(0, w));
    kp.y = static_cast<float>(rng.uniform(0, h));
    kp.scale = static_cast<float>(rng.uniform(1, 4));
    kp.attention = static_cast<float>(rng.uniform(0, 300));
    f.add(kp, v);
  }
  for (std::size_t b = 0; b < boxes; ++b) {
    const double x0 = rng.uniform(0, w * 0.7);
    const double y0 = rng.uniform(0, h * 0.7);
    RegionBox box;
    box.xmin = static_cast<float>(x0);
    box.ymin = static_cast<float>(y0);
    box.xmax = static_cast<float>(rng.uniform(x0 + 1, w));
    box.ymax = static_cast<float>(rng.uniform(y0 + 1, h));
    box.score = static_cast<float>(rng.uniform());
    f.boxes.push_back(box);
  }
  return f;
}

Codebook random_codebook(Rng& rng, std::uint32_t c, std::uint16_t d) {
  std::vector<float> centroids(std::size_t{c} * d);
  for (auto& x : centroids) x = static_cast<float>(rng.uniform(-1, 1));
  return Codebook(d, std::move(centroids));
}

ImageFeatures clustered_image(Rng& rng, const Codebook& cb, std::size_t m, double spread, std::uint32_t w,
                              std::uint32_t h, std::size_t boxes, const std::string& id) {
  ImageFeatures f = random_image(rng, 0, cb.dim(), w, h, boxes, id);
  std::vector<float> v(cb.dim());
  for (std::size_t i = 0; i < m; ++i) {
    const auto c = cb.centroid(static_cast<WordId>(rng.below(cb.size())));
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = static_cast<float>(c[j] + spread * rng.normal());
    Keypoint kp;
    kp.x = static_cast<float>(rng.uniform(0, w));
    kp.y = static_cast<float>(rng.uniform(0, h));
    kp.attention = static_cast<float>(rng.uniform(0, 300));
    f.add(kp, v);
  }
  return f;
}

namespace oracle {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> unit(const std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

std::vector<double> signs(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? 1.0 : -1.0;
  return out;
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0; });
}

// Word -> raw residual sum over the given descriptors.
Dense raw_residuals(const ImageFeatures& f, const std::vector<std::size_t>& idx, const Codebook& cb) {
  Dense out;
  for (auto i : idx) {
    const auto x = f.descriptor(i);
    const WordId w = quantize(cb, x);
    auto& acc = out[w];
    acc.resize(cb.dim(), 0.0);
    const auto c = cb.centroid(w);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += static_cast<double>(x[j]) - c[j];
  }
  std::erase_if(out, [](const auto& kv) { return all_zero(kv.second); });
  return out;
}

double word_sim(const std::vector<double>& a, const std::vector<double>& b, Aggregation mode, std::uint16_t dim) {
  const double u = dot(a, b);
  return is_binary(mode) ? u / dim : u;
}

bool vlad_like(Aggregation m) { return m == Aggregation::kVlad || m == Aggregation::kRVlad; }

}  // namespace

WordId quantize(const Codebook& cb, std::span<const float> x) {
  WordId best = 0;
  double best_d = 0;
  for (WordId c = 0; c < cb.size(); ++c) {
    double d = 0;
    const auto y = cb.centroid(c);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double t = static_cast<double>(x[j]) - y[j];
      d += t * t;
    }
    if (c == 0 || d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

double sigma(double u, double alpha, double tau) {
  if (!(u > tau)) return 0;
  return (u > 0 ? 1.0 : -1.0) * std::pow(std::abs(u), alpha);
}

Rep aggregate(const ImageFeatures& f, const Codebook& cb, Aggregation mode) {
  std::vector<std::size_t> all(f.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Rep rep;
  rep.words = raw_residuals(f, all, cb);
  if (rep.words.empty()) return rep;
  if (mode == Aggregation::kVlad) {
    double s = 0;
    for (const auto& [w, v] : rep.words) s += dot(v, v);
    rep.gamma = 1 / std::sqrt(s);
    return rep;
  }
  for (auto& [w, v] : rep.words) v = mode == Aggregation::kAsmkBinary ? signs(unit(v)) : unit(v);
  rep.gamma = 1 / std::sqrt(static_cast<double>(rep.words.size()));
  return rep;
}

std::vector<std::size_t> members(const ImageFeatures& f, const RegionBox& box) {
  double x0 = 0, y0 = 0, x1 = f.width, y1 = f.height;
  if (!f.has_dimensions()) {
    x1 = y1 = 1;
    for (const auto& kp : f.keypoints) {
      x1 = std::max<double>(x1, kp.x);
      y1 = std::max<double>(y1, kp.y);
    }
  }
  const bool whole = box.xmin <= x0 && box.ymin <= y0 && box.xmax >= x1 && box.ymax >= y1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& kp = f.keypoints[i];
    if (whole || (kp.x >= box.xmin && kp.x < box.xmax && kp.y >= box.ymin && kp.y < box.ymax)) out.push_back(i);
  }
  return out;
}

Rep aggregate_regional(const ImageFeatures& f, const std::vector<RegionBox>& regions, const Codebook& cb,
                       Aggregation mode, double alpha, double tau) {
  const double r_count = static_cast<double>(regions.size());
  std::map<WordId, std::vector<double>> acc;
  for (const auto& box : regions) {
    auto words = raw_residuals(f, members(f, box), cb);
    if (words.empty()) continue;
    double gamma = 0;
    if (mode == Aggregation::kRVlad) {
      double s = 0;
      for (const auto& [w, v] : words) s += dot(v, v);
      gamma = 1 / std::sqrt(s);
    } else {
      gamma = 1 / std::sqrt(static_cast<double>(words.size()));
      for (auto& [w, v] : words) v = unit(v);
    }
    for (const auto& [w, v] : words) {
      auto& a = acc[w];
      a.resize(cb.dim(), 0.0);
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += gamma * v[j] / r_count;
    }
  }
  std::erase_if(acc, [](const auto& kv) { return all_zero(kv.second); });
  Rep rep;
  rep.words = std::move(acc);
  if (rep.words.empty()) return rep;
  if (mode == Aggregation::kRVlad) {
    rep.gamma = 1;
    return rep;
  }
  if (mode == Aggregation::kRAsmk || mode == Aggregation::kRAsmkBinary) {
    for (auto& [w, v] : rep.words) v = mode == Aggregation::kRAsmkBinary ? signs(unit(v)) : unit(v);
  }
  double self = 0;
  for (const auto& [w, v] : rep.words) self += sigma(word_sim(v, v, mode, cb.dim()), alpha, tau);
  rep.gamma = self > 0 ? 1 / std::sqrt(self) : 0;
  return rep;
}

double kernel(const Rep& x, const Rep& y, Aggregation mode, std::uint32_t num_words, std::uint16_t dim,
              double alpha, double tau) {
  // Dense sum over every word; absent words are zero rows and contribute
  // sigma(0) = 0 (or 0 directly for VLAD).
  double total = 0;
  const std::vector<double> zero(dim, 0.0);
  for (WordId c = 0; c < num_words; ++c) {
    const auto ix = x.words.find(c);
    const auto iy = y.words.find(c);
    const auto& a = ix == x.words.end() ? zero : ix->second;
    const auto& b = iy == y.words.end() ? zero : iy->second;
    const double u = word_sim(a, b, mode, dim);
    total += vlad_like(mode) ? u : sigma(u, alpha, tau);
  }
  return x.gamma * y.gamma * total;
}

double regional_kernel(const Rep& q, const Rep& db, Aggregation db_mode, std::uint32_t num_words,
                       std::uint16_t dim, bool global_norm, double alpha, double tau) {
  double total = 0;
  const std::vector<double> zero(dim, 0.0);
  for (WordId c = 0; c < num_words; ++c) {
    const auto ix = q.words.find(c);
    const auto iy = db.words.find(c);
    const auto& a = ix == q.words.end() ? zero : ix->second;
    const auto& b = iy == db.words.end() ? zero : iy->second;
    const double u = word_sim(a, b, db_mode, dim);
    total += vlad_like(db_mode) ? u : sigma(u, alpha, tau);
  }
  if (db_mode == Aggregation::kRVlad) return q.gamma * total;
  return global_norm ? q.gamma * db.gamma * total : total;
}

std::optional<double> average_precision(const std::vector<std::string>& ranked,
                                        const std::vector<std::string>& positives,
                                        const std::vector<std::string>& junk) {
  const std::set<std::string> pos(positives.begin(), positives.end());
  const std::set<std::string> jnk(junk.begin(), junk.end());
  if (pos.empty()) return std::nullopt;
  std::vector<std::string> clean;
  for (const auto& id : ranked) {
    if (!jnk.contains(id)) clean.push_back(id);
  }
  double sum = 0;
  for (const auto& p : pos) {
    auto it = std::find(clean.begin(), clean.end(), p);
    if (it == clean.end()) continue;
    const auto k = static_cast<std::size_t>(it - clean.begin()) + 1;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += pos.contains(clean[i]) ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(k);
  }
  return sum / static_cast<double>(pos.size());
}

}  // namespace oracle
}  // namespace ramk::test
