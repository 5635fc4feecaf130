#include "ramk/index.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ramk/binary_io.hpp"
#include "ramk/error.hpp"
#include "ramk/parallel.hpp"

namespace ramk {

bool is_regional_search(const IndexConfig& config) noexcept {
  return !is_regional(config.mode) && config.regions.kind != RegionStrategy::Kind::kWhole;
}

std::size_t RetrievalIndex::total_postings() const noexcept {
  std::size_t n = 0;
  for (const auto& p : postings_) n += p.entries.size();
  return n;
}

std::vector<AggregatedRepresentation> represent_image(const ImageFeatures& image, const Codebook& codebook,
                                                      const IndexConfig& config) {
  if (!image.empty() && image.dim != codebook.dim()) {
    throw DimensionError("image '" + image.image_id + "' has D=" + std::to_string(image.dim) +
                         ", codebook has D=" + std::to_string(codebook.dim()));
  }
  std::vector<WordId> assignment(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) assignment[i] = codebook.quantize(image.descriptor(i));

  std::vector<AggregatedRepresentation> reps;
  if (is_regional(config.mode)) {
    const auto regions = select_regions(image, config.regions);
    reps.push_back(aggregate_regional(image, assignment, regions, codebook, config.mode, config.selectivity));
    return reps;
  }
  const RegionSet regions =
      is_regional_search(config) ? select_regions(image, config.regions) : RegionSet{{whole_image_box(image)}};
  for (const auto& box : regions.regions) {
    const auto members = assign_to_region(image, box);
    std::vector<WordId> sub(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) sub[i] = assignment[members[i]];
    reps.push_back(aggregate(image, partition_assigned(sub, members), codebook, config.mode));
  }
  return reps;
}

RetrievalIndex RetrievalIndex::build(const std::vector<ImageFeatures>& images, const Codebook& codebook,
                                     const IndexConfig& config) {
  config.selectivity.validate();
  {
    std::set<std::string_view> ids;
    for (const auto& img : images) {
      if (!ids.insert(img.image_id).second) throw ValidationError("duplicate image id '" + img.image_id + "'");
    }
  }

  std::vector<std::vector<AggregatedRepresentation>> reps(images.size());
  parallel_for(images.size(), config.threads,
               [&](std::size_t i) { reps[i] = represent_image(images[i], codebook, config); });

  RetrievalIndex index;
  index.mode_ = config.mode;
  index.regional_search_ = is_regional_search(config);
  index.global_normalization_ = config.global_normalization;
  index.selectivity_ = config.selectivity;
  index.strategy_ = config.regions;
  index.codebook_hash_ = codebook.content_hash();
  index.dim_ = codebook.dim();
  index.postings_.resize(codebook.size());

  const bool binary = is_binary(config.mode);
  for (std::size_t i = 0; i < images.size(); ++i) {
    IndexedImage image{images[i].image_id, static_cast<std::uint32_t>(index.entries_.size()),
                       static_cast<std::uint32_t>(reps[i].size())};
    for (std::size_t r = 0; r < reps[i].size(); ++r) {
      const auto entry_id = static_cast<std::uint32_t>(index.entries_.size());
      const auto& rep = reps[i][r];
      index.entries_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(r)});
      index.gammas_.push_back(rep.gamma);
      for (std::size_t k = 0; k < rep.size(); ++k) {
        auto& list = index.postings_[rep.words[k]];
        list.entries.push_back(entry_id);
        if (binary) {
          const auto code = rep.code(k);
          list.codes.insert(list.codes.end(), code.begin(), code.end());
        } else {
          const auto res = rep.residual(k);
          list.residuals.insert(list.residuals.end(), res.begin(), res.end());
        }
      }
    }
    index.images_.push_back(std::move(image));
  }
  return index;
}

std::vector<double> RetrievalIndex::score_entries(const AggregatedRepresentation& query, QueryStats* stats) const {
  const Aggregation expected = regional_search_ || !is_regional(mode_) ? mode_ : query_mode(mode_);
  if (query.mode != expected) {
    throw CompatibilityError("query representation is " + std::string(to_string(query.mode)) + ", index expects " +
                             std::string(to_string(expected)));
  }
  std::vector<double> raw(entries_.size(), 0.0);
  const bool binary = is_binary(mode_);
  const std::size_t code_len = code_words(dim_);
  QueryStats local;
  for (std::size_t k = 0; k < query.size(); ++k) {
    const WordId c = query.words[k];
    if (c >= postings_.size()) continue;
    const auto& list = postings_[c];
    if (list.entries.empty()) continue;
    ++local.words_touched;
    local.postings_scanned += list.entries.size();
    if (binary) {
      const auto q = query.code(k);
      for (std::size_t p = 0; p < list.entries.size(); ++p) {
        const std::span<const std::uint64_t> code(list.codes.data() + p * code_len, code_len);
        raw[list.entries[p]] += word_selectivity(mode_, binary_similarity(q, code, dim_), selectivity_);
      }
    } else {
      const auto q = query.residual(k);
      for (std::size_t p = 0; p < list.entries.size(); ++p) {
        const float* r = list.residuals.data() + p * dim_;
        double u = 0;
        for (std::size_t d = 0; d < dim_; ++d) u += static_cast<double>(q[d]) * r[d];
        raw[list.entries[p]] += word_selectivity(mode_, u, selectivity_);
      }
    }
  }
  const bool use_gamma = !is_regional(mode_) || mode_ == Aggregation::kRVlad || global_normalization_;
  if (use_gamma) {
    for (std::size_t e = 0; e < raw.size(); ++e) raw[e] *= query.gamma * gammas_[e];
  }
  if (stats) *stats = local;
  return raw;
}

RankedResult pool_scores(const std::vector<IndexedImage>& images, const std::vector<double>& entry_scores,
                         Pooling pooling, std::size_t top_n) {
  RankedResult result;
  result.items.reserve(images.size());
  for (const auto& img : images) {
    double score = 0;
    if (img.entry_count > 0) {
      if (pooling == Pooling::kMax) {
        score = entry_scores[img.first_entry];
        for (std::uint32_t e = 1; e < img.entry_count; ++e) score = std::max(score, entry_scores[img.first_entry + e]);
      } else {
        for (std::uint32_t e = 0; e < img.entry_count; ++e) score += entry_scores[img.first_entry + e];
        score /= img.entry_count;
      }
    }
    result.items.push_back({img.image_id, static_cast<float>(score)});
  }
  sort_ranking(result.items);
  if (top_n > 0 && result.items.size() > top_n) result.items.resize(top_n);
  return result;
}

RankedResult RetrievalIndex::query(const ImageFeatures& query, const Codebook& codebook, Pooling pooling,
                                   std::size_t top_n, QueryStats* stats) const {
  if (codebook.content_hash() != codebook_hash_ || codebook.dim() != dim_) {
    throw CompatibilityError("codebook does not match the one this index was built with");
  }
  RankedResult result;
  result.query_id = query.image_id;
  if (query.empty()) {
    result.empty_query = true;
    if (stats) *stats = {};
    return result;
  }
  const Aggregation qmode = regional_search_ || !is_regional(mode_) ? mode_ : query_mode(mode_);
  const auto rep = aggregate(query, codebook, qmode);
  auto ranked = pool_scores(images_, score_entries(rep, stats), pooling, top_n);
  ranked.query_id = query.image_id;
  return ranked;
}

std::vector<std::uint8_t> RetrievalIndex::encode() const {
  ByteWriter w;
  w.magic("DTRI");
  w.u16(kIndexFormatVersion);
  w.u8(static_cast<std::uint8_t>(mode_));
  w.u8(static_cast<std::uint8_t>((global_normalization_ ? 1 : 0) | (regional_search_ ? 2 : 0)));
  w.u64(codebook_hash_);
  w.u32(num_words());
  w.u16(dim_);
  w.f64(selectivity_.alpha);
  w.f64(selectivity_.tau);
  w.str(strategy_.to_string());
  w.u32(static_cast<std::uint32_t>(images_.size()));
  for (const auto& img : images_) {
    w.str(img.image_id);
    w.u32(img.first_entry);
    w.u32(img.entry_count);
  }
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    w.u32(entries_[e].image);
    w.u32(entries_[e].region);
    w.f64(gammas_[e]);
  }
  for (const auto& list : postings_) {
    w.u32(static_cast<std::uint32_t>(list.entries.size()));
    for (auto id : list.entries) w.u32(id);
    for (float v : list.residuals) w.f32(v);
    for (auto v : list.codes) w.u64(v);
  }
  return w.take();
}

RetrievalIndex RetrievalIndex::decode(std::span<const std::uint8_t> data, const std::string& context) {
  ByteReader r(data, context, ByteReader::OnError::kCorruptIndex);
  r.expect_magic("DTRI");
  const auto version = r.u16("version");
  if (version != kIndexFormatVersion) r.fail("unsupported index version " + std::to_string(version));

  RetrievalIndex index;
  const auto mode = r.u8("mode");
  if (mode > static_cast<std::uint8_t>(Aggregation::kRAsmkBinary)) r.fail("unknown mode byte " + std::to_string(mode));
  index.mode_ = static_cast<Aggregation>(mode);
  const auto flags = r.u8("flags");
  if (flags & ~3u) r.fail("unknown flag bits");
  index.global_normalization_ = flags & 1;
  index.regional_search_ = flags & 2;
  if (index.regional_search_ && is_regional(index.mode_)) r.fail("regional-search flag set on a regional mode");
  index.codebook_hash_ = r.u64("codebook hash");
  const auto num_words = r.u32("C");
  index.dim_ = r.u16("D");
  if (num_words == 0 || index.dim_ == 0) r.fail("zero codebook size or dimension");
  index.selectivity_.alpha = r.f64("alpha");
  index.selectivity_.tau = r.f64("tau");
  try {
    index.selectivity_.validate();
    index.strategy_ = RegionStrategy::parse(r.str("region strategy"));
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }

  const auto num_images = r.u32("image count");
  if (num_images > r.remaining() / 10) r.fail("image count exceeds file size");
  index.images_.resize(num_images);
  std::uint32_t expected_first = 0;
  std::set<std::string> ids;
  for (auto& img : index.images_) {
    img.image_id = r.str("image id");
    img.first_entry = r.u32("first entry");
    img.entry_count = r.u32("entry count");
    if (img.first_entry != expected_first || img.entry_count == 0) r.fail("image entry ranges are not contiguous");
    expected_first += img.entry_count;
    if (!ids.insert(img.image_id).second) r.fail("duplicate image id '" + img.image_id + "'");
  }
  const auto num_entries = r.u32("entry count");
  if (num_entries != expected_first) r.fail("entry table size disagrees with image table");
  if (num_entries > r.remaining() / 16) r.fail("entry count exceeds file size");
  index.entries_.resize(num_entries);
  index.gammas_.resize(num_entries);
  for (std::uint32_t e = 0; e < num_entries; ++e) {
    auto& entry = index.entries_[e];
    entry.image = r.u32("entry image");
    entry.region = r.u32("entry region");
    index.gammas_[e] = r.f64("entry gamma");
    if (entry.image >= num_images) r.fail("entry refers to a missing image");
    const auto& img = index.images_[entry.image];
    if (e < img.first_entry || e >= img.first_entry + img.entry_count || entry.region != e - img.first_entry) {
      r.fail("entry " + std::to_string(e) + " is inconsistent with the image table");
    }
    if (!std::isfinite(index.gammas_[e]) || index.gammas_[e] < 0) r.fail("entry gamma is not a finite non-negative value");
  }

  const bool binary = is_binary(index.mode_);
  const std::size_t payload = binary ? code_words(index.dim_) * 8 : std::size_t{index.dim_} * 4;
  index.postings_.resize(num_words);
  for (std::uint32_t c = 0; c < num_words; ++c) {
    auto& list = index.postings_[c];
    const auto len = r.u32("posting length");
    if (len > r.remaining() / (4 + payload)) r.fail("posting list for word " + std::to_string(c) + " exceeds file size");
    list.entries.resize(len);
    for (std::uint32_t p = 0; p < len; ++p) {
      list.entries[p] = r.u32("posting entry");
      if (list.entries[p] >= num_entries) r.fail("posting refers to a missing entry");
      if (p > 0 && list.entries[p] <= list.entries[p - 1]) r.fail("posting list is not strictly ascending");
    }
    if (binary) {
      list.codes.resize(std::size_t{len} * code_words(index.dim_));
      for (auto& v : list.codes) v = r.u64("posting code");
    } else {
      list.residuals.resize(std::size_t{len} * index.dim_);
      for (auto& v : list.residuals) {
        v = r.f32("posting residual");
        if (!std::isfinite(v)) r.fail("non-finite residual");
      }
    }
  }
  r.expect_end();
  return index;
}

RetrievalIndex build_index(const DatasetManifest& manifest, const Codebook& codebook, const IndexConfig& config) {
  if (manifest.dim != codebook.dim()) {
    throw DimensionError("manifest declares D=" + std::to_string(manifest.dim) + ", codebook has D=" +
                         std::to_string(codebook.dim()));
  }
  std::vector<ImageFeatures> images(manifest.images.size());
  parallel_for(images.size(), config.threads, [&](std::size_t i) { images[i] = load_manifest_image(manifest, i); });
  return RetrievalIndex::build(images, codebook, config);
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
  write_file_bytes(path, index.encode());
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("index '" + path.string() + "' does not exist");
  return RetrievalIndex::decode(read_file_bytes(path), path.string());
}

}  // namespace ramk
