#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "ramk/codebook.hpp"
#include "ramk/index.hpp"
#include "ramk/kernels.hpp"
#include "ramk/regional.hpp"
#include "ramk/synthetic.hpp"

using namespace ramk;

namespace {

struct Fixture {
  SyntheticCorpus corpus;
  Codebook codebook;
};

const Fixture& fixture(std::uint32_t words) {
  static std::map<std::uint32_t, Fixture> cache;
  auto it = cache.find(words);
  if (it != cache.end()) return it->second;
  SyntheticConfig cfg;
  cfg.landmarks = 20;
  cfg.images_per_landmark = 5;
  cfg.dim = 128;
  Fixture f{make_synthetic_corpus(cfg, 42), {}};
  std::vector<float> all;
  for (const auto& img : f.corpus.database) all.insert(all.end(), img.descriptors.begin(), img.descriptors.end());
  KMeansOptions ko;
  ko.num_words = words;
  ko.seed = 1;
  ko.max_iterations = 5;
  f.codebook = train_codebook({all, cfg.dim}, ko);
  return cache.emplace(words, std::move(f)).first->second;
}

void BM_Quantize(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::uint32_t>(state.range(0)));
  const auto& img = f.corpus.database.front();
  for (auto _ : state) {
    for (std::size_t i = 0; i < img.size(); ++i) benchmark::DoNotOptimize(f.codebook.quantize(img.descriptor(i)));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * img.size()));
}
BENCHMARK(BM_Quantize)->Arg(256)->Arg(1024);

void BM_Aggregate(benchmark::State& state) {
  const auto& f = fixture(256);
  const auto mode = static_cast<Aggregation>(state.range(0));
  const auto& img = f.corpus.database.front();
  const auto regions = select_regions(img, RegionStrategy::detector(0.3));
  const SelectivityParams p;
  for (auto _ : state) {
    if (is_regional(mode)) benchmark::DoNotOptimize(aggregate_regional(img, regions, f.codebook, mode, p));
    else benchmark::DoNotOptimize(aggregate(img, f.codebook, mode));
  }
  state.SetLabel(std::string(to_string(mode)));
}
BENCHMARK(BM_Aggregate)->DenseRange(0, 6);

void BM_Query(benchmark::State& state) {
  const auto& f = fixture(256);
  IndexConfig cfg;
  cfg.mode = static_cast<Aggregation>(state.range(0));
  cfg.regions = state.range(1) ? RegionStrategy::detector(0.3) : RegionStrategy::whole();
  const auto index = RetrievalIndex::build(f.corpus.database, f.codebook, cfg);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query(f.corpus.queries[q], f.codebook, Pooling::kMax, 0));
    q = (q + 1) % f.corpus.queries.size();
  }
  state.SetLabel(std::string(to_string(cfg.mode)) + (state.range(1) ? " detector:0.3" : " whole"));
}
BENCHMARK(BM_Query)->Args({2, 0})->Args({2, 1})->Args({6, 1})->Args({3, 1});

}  // namespace

BENCHMARK_MAIN();
