#pragma once

// Local-feature files, region boxes and dataset manifests.
//
// DTRF layout (all little-endian, no padding):
//
//   magic      4 bytes  "DTRF"
//   version    u16      currently 1
//   D          u16      descriptor dimensionality
//   M          u32      descriptor count
//   B          u32      box count
//   M records  x f32 | y f32 | scale f32 | attention f32 | D x f32
//   B records  xmin f32 | ymin f32 | xmax f32 | ymax f32 | score f32
//
// Image ids and image dimensions are not part of the file; they come from the
// manifest entry that references it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ramk {

inline constexpr std::uint16_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;
inline constexpr std::uint16_t kDefaultDescriptorDim = 128;

/// Geometry and saliency of one local feature. The descriptor vector itself
/// lives in ImageFeatures::descriptors.
struct Keypoint {
  float x = 0;
  float y = 0;
  float scale = 1;
  float attention = 0;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct RegionBox {
  float xmin = 0;
  float ymin = 0;
  float xmax = 0;
  float ymax = 0;
  float score = 1;

  double width() const noexcept { return static_cast<double>(xmax) - xmin; }
  double height() const noexcept { return static_cast<double>(ymax) - ymin; }
  double area() const noexcept { return width() * height(); }
  /// Closed on the min edges, open on the max edges.
  bool contains(float x, float y) const noexcept { return x >= xmin && x < xmax && y >= ymin && y < ymax; }

  friend bool operator==(const RegionBox&, const RegionBox&) = default;
};

struct ImageFeatures {
  std::string image_id;
  std::uint32_t width = 0;   // 0 when undeclared
  std::uint32_t height = 0;  // 0 when undeclared
  std::uint16_t dim = kDefaultDescriptorDim;
  std::vector<Keypoint> keypoints;
  std::vector<float> descriptors;  // row-major, keypoints.size() x dim
  std::vector<RegionBox> boxes;

  std::size_t size() const noexcept { return keypoints.size(); }
  bool empty() const noexcept { return keypoints.empty(); }
  bool has_dimensions() const noexcept { return width > 0 && height > 0; }

  std::span<const float> descriptor(std::size_t i) const noexcept {
    return {descriptors.data() + i * dim, dim};
  }
  std::span<float> descriptor(std::size_t i) noexcept { return {descriptors.data() + i * dim, dim}; }

  /// Appends a feature; `vector` must have `dim` components.
  void add(const Keypoint& kp, std::span<const float> vector);

  friend bool operator==(const ImageFeatures&, const ImageFeatures&) = default;
};

/// Checks every type invariant; throws ValidationError (or DimensionError for
/// descriptor-length problems) naming the first violation.
void validate(const ImageFeatures& features);

/// Exact size in bytes of a DTRF file with the given counts.
constexpr std::size_t encoded_feature_size(std::size_t m, std::size_t d, std::size_t b) noexcept {
  return kFeatureHeaderBytes + m * (4 * 4 + 4 * d) + b * 5 * 4;
}

std::vector<std::uint8_t> encode_image_features(const ImageFeatures& features);
/// `context` is used in error messages (usually the path). Trailing bytes are an error.
ImageFeatures decode_image_features(std::span<const std::uint8_t> data, const std::string& context,
                                    std::optional<std::uint16_t> expected_dim = std::nullopt);

/// Loads a DTRF file. Image id and dimensions are left unset.
/// Throws FormatError on a malformed header or payload, DimensionError when
/// `expected_dim` is given and differs from the file's D.
ImageFeatures load_image_features(const std::filesystem::path& path,
                                  std::optional<std::uint16_t> expected_dim = std::nullopt);

/// Validates, then writes. Nothing is written if validation fails.
void save_image_features(const ImageFeatures& features, const std::filesystem::path& path);

/// Keeps only features whose attention is at least `min_attention`.
ImageFeatures filter_by_attention(const ImageFeatures& features, float min_attention);

// ---------------------------------------------------------------------------
// Manifests
//
// Text, one record per line, whitespace-separated key:value tokens:
//
//   dataset:<name> dim:<D> [ground_truth:<path>]
//   image:<id> path:<path> width:<W> height:<H>
//
// Relative paths resolve against the manifest's directory.

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path path;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::string name;
  std::uint16_t dim = kDefaultDescriptorDim;
  std::vector<ManifestEntry> images;
  std::optional<std::filesystem::path> ground_truth;

  std::optional<std::size_t> find(std::string_view image_id) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Parses a manifest. With `check_files`, every referenced file must exist
/// and declare the manifest's D (only headers are read).
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               const std::string& context);
/// Paths under `base_dir` are written relative to it.
std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Loads image `index` of a manifest and attaches its id and dimensions.
ImageFeatures load_manifest_image(const DatasetManifest& manifest, std::size_t index);

}  // namespace ramk
