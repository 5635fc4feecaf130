#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ramk/features_io.hpp"
#include "ramk/ground_truth.hpp"

namespace ramk {

/// Parameters of the planted-landmark generator.
///
/// Every database image shows one landmark instance: a set of descriptors
/// drawn around the landmark's archetype vectors, laid out inside a landmark
/// box, plus clutter descriptors scattered over the whole image (random
/// directions, or perturbations of a shared pool of background patterns). Detector boxes are simulated:
/// one high-score box around the landmark (edges jittered by `box_noise`),
/// a few mid-score partial boxes inside it, and low-score distractor boxes
/// anywhere.
///
/// Queries are crops of the landmark region of each database image (planted
/// descriptors only). Ground truth: other images of the same landmark are
/// positives (easy when the landmark covers at least 20% of the image, hard
/// otherwise); the source image is junk.
struct SyntheticConfig {
  std::string name = "synthetic";
  std::uint32_t landmarks = 20;
  std::uint32_t images_per_landmark = 5;
  std::uint32_t descriptors_per_instance = 40;
  std::uint32_t clutter_descriptors = 160;
  std::uint16_t dim = kDefaultDescriptorDim;
  double box_noise = 0.1;          // std of box-edge jitter, relative to box size
  double descriptor_noise = 0.7;   // expected L2 norm of the per-descriptor perturbation
  std::uint32_t background_patterns = 0;  // 0 = every clutter descriptor is an independent random direction
  /// Clutter descriptors (out of clutter_descriptors, clamped to it) copied
  /// from parts of a different landmark and packed into one small low-score
  /// box. Ignored with a single landmark.
  std::uint32_t confuser_descriptors = 8;
  std::uint32_t landmark_boxes = 2;
  /// Probability that the detector finds the landmark; misses get neither the
  /// landmark box nor its partial boxes.
  double detection_rate = 0.7;
  /// Archetypes mix a pool of parts shared by all landmarks with a
  /// landmark-specific direction: 0 = unrelated landmarks, 1 = identical parts.
  double part_sharing = 0.7;
  std::uint32_t shared_parts = 64;
  std::uint32_t distractor_boxes = 8;
  /// Per-image distractor box count is uniform in distractor_boxes +- this
  /// (clamped to distractor_boxes).
  std::uint32_t distractor_box_spread = 8;
  std::uint32_t image_width = 640;
  std::uint32_t image_height = 480;

  /// Clutter count that makes clutter `fraction` of each image's features.
  static std::uint32_t clutter_for_fraction(std::uint32_t planted, double fraction);
};

/// Throws ConfigError for degenerate configurations.
void validate(const SyntheticConfig& config);

struct SyntheticCorpus {
  std::vector<ImageFeatures> database;
  std::vector<std::uint32_t> landmark_of;  // per database image
  std::vector<RegionBox> true_boxes;       // noise-free landmark extent per database image
  std::vector<ImageFeatures> queries;
  GroundTruth ground_truth;
  std::vector<ImagePair> pairs;  // consecutive same-landmark database images
};

/// Deterministic for a fixed (config, seed); single-threaded.
SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config, std::uint64_t seed);

struct SyntheticFiles {
  std::filesystem::path database_manifest;  // <dir>/database.txt
  std::filesystem::path query_manifest;     // <dir>/queries.txt
  std::filesystem::path ground_truth;       // <dir>/ground_truth.txt
  std::filesystem::path pairs;              // <dir>/pairs.txt
};

/// Writes DTRF files under <dir>/features/ plus the manifests, ground truth and pair list.
SyntheticFiles write_synthetic_corpus(const SyntheticCorpus& corpus, const std::string& name,
                                      const std::filesystem::path& dir);

/// Generates and writes a dataset; returns the database manifest, whose
/// ground_truth field points at the written ground-truth file.
DatasetManifest generate_synthetic_dataset(const SyntheticConfig& config, std::uint64_t seed,
                                           const std::filesystem::path& dir);

}  // namespace ramk
