#include "ramk/features_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "ramk/binary_io.hpp"
#include "ramk/error.hpp"
#include "ramk/text_format.hpp"

namespace ramk {

void ImageFeatures::add(const Keypoint& kp, std::span<const float> vector) {
  if (vector.size() != dim) {
    throw DimensionError("descriptor has " + std::to_string(vector.size()) + " components, expected " +
                         std::to_string(dim));
  }
  keypoints.push_back(kp);
  descriptors.insert(descriptors.end(), vector.begin(), vector.end());
}

namespace {

std::string where(const ImageFeatures& f) {
  return f.image_id.empty() ? std::string("features") : "image '" + f.image_id + "'";
}

}  // namespace

void validate(const ImageFeatures& f) {
  if (f.dim == 0) throw ValidationError(where(f) + ": descriptor dimension is 0");
  if (f.descriptors.size() != f.keypoints.size() * f.dim) {
    throw DimensionError(where(f) + ": descriptor payload holds " + std::to_string(f.descriptors.size()) +
                         " values for " + std::to_string(f.keypoints.size()) + " features of dimension " +
                         std::to_string(f.dim));
  }
  if (f.keypoints.size() > 0xFFFFFFFFull || f.boxes.size() > 0xFFFFFFFFull) {
    throw ValidationError(where(f) + ": too many records for a u32 count");
  }
  for (std::size_t i = 0; i < f.keypoints.size(); ++i) {
    const auto& kp = f.keypoints[i];
    const std::string at = where(f) + ": feature " + std::to_string(i);
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !std::isfinite(kp.scale) || !std::isfinite(kp.attention)) {
      throw ValidationError(at + " has a non-finite keypoint field");
    }
    if (!(kp.scale > 0)) throw ValidationError(at + " has non-positive scale");
    if (kp.attention < 0) throw ValidationError(at + " has negative attention");
    if (f.has_dimensions()) {
      if (kp.x < 0 || kp.y < 0 || kp.x > static_cast<float>(f.width) || kp.y > static_cast<float>(f.height)) {
        throw ValidationError(at + " lies outside the declared image bounds");
      }
    }
    for (float v : f.descriptor(i)) {
      if (!std::isfinite(v)) throw ValidationError(at + " has a non-finite descriptor component");
    }
  }
  for (std::size_t i = 0; i < f.boxes.size(); ++i) {
    const auto& b = f.boxes[i];
    const std::string at = where(f) + ": box " + std::to_string(i);
    if (!std::isfinite(b.xmin) || !std::isfinite(b.ymin) || !std::isfinite(b.xmax) || !std::isfinite(b.ymax) ||
        !std::isfinite(b.score)) {
      throw ValidationError(at + " has a non-finite field");
    }
    if (!(b.xmin < b.xmax) || !(b.ymin < b.ymax)) throw ValidationError(at + " is empty or inverted");
    if (b.score < 0 || b.score > 1) throw ValidationError(at + " has score outside [0,1]");
  }
}

std::vector<std::uint8_t> encode_image_features(const ImageFeatures& f) {
  validate(f);
  ByteWriter w;
  w.magic("DTRF");
  w.u16(kFeatureFormatVersion);
  w.u16(f.dim);
  w.u32(static_cast<std::uint32_t>(f.keypoints.size()));
  w.u32(static_cast<std::uint32_t>(f.boxes.size()));
  for (std::size_t i = 0; i < f.keypoints.size(); ++i) {
    const auto& kp = f.keypoints[i];
    w.f32(kp.x);
    w.f32(kp.y);
    w.f32(kp.scale);
    w.f32(kp.attention);
    for (float v : f.descriptor(i)) w.f32(v);
  }
  for (const auto& b : f.boxes) {
    w.f32(b.xmin);
    w.f32(b.ymin);
    w.f32(b.xmax);
    w.f32(b.ymax);
    w.f32(b.score);
  }
  return w.take();
}

ImageFeatures decode_image_features(std::span<const std::uint8_t> data, const std::string& context,
                                    std::optional<std::uint16_t> expected_dim) {
  ByteReader r(data, context);
  r.expect_magic("DTRF");
  const auto version = r.u16("version");
  if (version != kFeatureFormatVersion) r.fail("unsupported version " + std::to_string(version));
  ImageFeatures f;
  f.dim = r.u16("D");
  if (f.dim == 0) r.fail("field 'D' is 0");
  if (expected_dim && *expected_dim != f.dim) {
    throw DimensionError(context + ": file declares D=" + std::to_string(f.dim) + ", expected D=" +
                         std::to_string(*expected_dim));
  }
  const auto m = r.u32("M");
  const auto b = r.u32("B");
  const std::size_t needed = encoded_feature_size(m, f.dim, b) - kFeatureHeaderBytes;
  if (r.remaining() < needed) {
    r.fail("payload has " + std::to_string(r.remaining()) + " bytes, header fields 'M'/'B' require " +
           std::to_string(needed));
  }
  f.keypoints.resize(m);
  f.descriptors.resize(static_cast<std::size_t>(m) * f.dim);
  for (std::uint32_t i = 0; i < m; ++i) {
    auto& kp = f.keypoints[i];
    kp.x = r.f32("x");
    kp.y = r.f32("y");
    kp.scale = r.f32("scale");
    kp.attention = r.f32("attention");
    auto vec = f.descriptor(i);
    for (auto& v : vec) v = r.f32("vector");
  }
  f.boxes.resize(b);
  for (auto& box : f.boxes) {
    box.xmin = r.f32("xmin");
    box.ymin = r.f32("ymin");
    box.xmax = r.f32("xmax");
    box.ymax = r.f32("ymax");
    box.score = r.f32("score");
  }
  r.expect_end();
  try {
    validate(f);
  } catch (const Error& e) {
    throw FormatError(context + ": " + e.what());
  }
  return f;
}

ImageFeatures load_image_features(const std::filesystem::path& path, std::optional<std::uint16_t> expected_dim) {
  const auto data = read_file_bytes(path);
  return decode_image_features(data, path.string(), expected_dim);
}

void save_image_features(const ImageFeatures& features, const std::filesystem::path& path) {
  const auto bytes = encode_image_features(features);
  write_file_bytes(path, bytes);
}

ImageFeatures filter_by_attention(const ImageFeatures& features, float min_attention) {
  ImageFeatures out = features;
  out.keypoints.clear();
  out.descriptors.clear();
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features.keypoints[i].attention >= min_attention) out.add(features.keypoints[i], features.descriptor(i));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> DatasetManifest::find(std::string_view image_id) const {
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].image_id == image_id) return i;
  }
  return std::nullopt;
}

namespace {

std::uint32_t parse_u32_field(const TextRecord& rec, std::string_view key, const std::string& context) {
  const auto& raw = rec.require(key, context);
  const auto v = parse_uint(raw);
  if (!v || *v > 0xFFFFFFFFull) {
    throw FormatError(context + ":" + std::to_string(rec.line) + ": field '" + std::string(key) +
                      "' is not an unsigned integer: '" + raw + "'");
  }
  return static_cast<std::uint32_t>(*v);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& raw) {
  std::filesystem::path p(raw);
  return p.is_absolute() ? p : base / p;
}

std::uint16_t peek_dimension(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("referenced feature file '" + path.string() + "' does not exist or is unreadable");
  std::uint8_t header[kFeatureHeaderBytes] = {};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  ByteReader r(std::span<const std::uint8_t>(header, static_cast<std::size_t>(in.gcount())), path.string());
  r.expect_magic("DTRF");
  r.u16("version");
  return r.u16("D");
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               const std::string& context) {
  DatasetManifest m;
  bool have_header = false;
  std::set<std::string> seen;
  for (const auto& rec : parse_records(text, context)) {
    const auto& kind = rec.first_key();
    if (kind == "dataset") {
      if (have_header) throw FormatError(context + ":" + std::to_string(rec.line) + ": duplicate dataset record");
      have_header = true;
      m.name = rec.require("dataset", context);
      const auto d = parse_u32_field(rec, "dim", context);
      if (d == 0 || d > 0xFFFF) throw FormatError(context + ": field 'dim' out of range");
      m.dim = static_cast<std::uint16_t>(d);
      if (const auto* gt = rec.find("ground_truth")) m.ground_truth = resolve(base_dir, *gt);
    } else if (kind == "image") {
      ManifestEntry e;
      e.image_id = rec.require("image", context);
      if (!is_valid_identifier(e.image_id)) {
        throw FormatError(context + ":" + std::to_string(rec.line) + ": invalid image id '" + e.image_id + "'");
      }
      e.path = resolve(base_dir, rec.require("path", context));
      e.width = parse_u32_field(rec, "width", context);
      e.height = parse_u32_field(rec, "height", context);
      if (e.width == 0 || e.height == 0) {
        throw FormatError(context + ":" + std::to_string(rec.line) + ": image dimensions must be positive");
      }
      if (!seen.insert(e.image_id).second) {
        throw ValidationError(context + ": duplicate image id '" + e.image_id + "'");
      }
      m.images.push_back(std::move(e));
    } else {
      throw FormatError(context + ":" + std::to_string(rec.line) + ": unknown record type '" + kind + "'");
    }
  }
  if (!have_header) throw FormatError(context + ": missing 'dataset:' header record");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  if (!std::filesystem::exists(path)) throw IoError("manifest '" + path.string() + "' does not exist");
  auto m = parse_manifest(read_file_text(path), path.parent_path(), path.string());
  if (check_files) {
    for (const auto& e : m.images) {
      const auto d = peek_dimension(e.path);
      if (d != m.dim) {
        throw DimensionError("'" + e.path.string() + "' declares D=" + std::to_string(d) + ", manifest declares D=" +
                             std::to_string(m.dim));
      }
    }
  }
  return m;
}

std::string format_manifest(const DatasetManifest& m, const std::filesystem::path& base_dir) {
  auto rel = [&](const std::filesystem::path& p) {
    if (base_dir.empty()) return p.generic_string();
    auto r = p.lexically_relative(base_dir);
    if (r.empty() || *r.begin() == "..") return p.generic_string();
    return r.generic_string();
  };
  std::string out = "dataset:" + m.name + " dim:" + std::to_string(m.dim);
  if (m.ground_truth) out += " ground_truth:" + rel(*m.ground_truth);
  out += '\n';
  for (const auto& e : m.images) {
    out += "image:" + e.image_id + " path:" + rel(e.path) + " width:" + std::to_string(e.width) +
           " height:" + std::to_string(e.height) + '\n';
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file_text(path, format_manifest(manifest, path.parent_path()));
}

ImageFeatures load_manifest_image(const DatasetManifest& manifest, std::size_t index) {
  const auto& e = manifest.images.at(index);
  auto f = load_image_features(e.path, manifest.dim);
  f.image_id = e.image_id;
  f.width = e.width;
  f.height = e.height;
  try {
    validate(f);
  } catch (const Error& err) {
    throw ValidationError(e.path.string() + ": " + err.what());
  }
  return f;
}

}  // namespace ramk
