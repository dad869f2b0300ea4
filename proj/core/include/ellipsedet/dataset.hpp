#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ellipsedet/encoding.hpp"
#include "ellipsedet/synth.hpp"

namespace ellipsedet {

// On-disk layout of a generated dataset:
//
//   <root>/manifest.json          generation parameters, counts, config hash
//   <root>/train.json, test.json  one annotation array per split
//   <root>/train/NNNNNN.pgm       8-bit binary portable graymaps (P5)
//   <root>/test/NNNNNN.pgm
//
// Annotation files are JSON arrays of
//   {"image": "train/000000.pgm",
//    "objects": [{"class": 0, "cx": .., "cy": .., "a": .., "b": .., "theta": ..}]}
// with angles in radians. Prediction files use the same schema plus a
// per-object "score".

struct LabeledObject {
  int class_id = 0;
  Ellipse ellipse;
  std::optional<double> score;
};

struct DatasetEntry {
  std::string image;  // relative to the dataset root
  std::vector<LabeledObject> objects;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;

  RgbImage(int w, int h);
  std::array<std::uint8_t, 3>& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

void write_annotations(const std::filesystem::path& path, const std::vector<DatasetEntry>& entries);
std::vector<DatasetEntry> read_annotations(const std::filesystem::path& path);

std::vector<Annotation> to_annotations(const DatasetEntry& entry);

struct GenConfig {
  int count = 500;
  double train_fraction = 0.8;
  std::uint64_t master_seed = 7;
  SynthRanges ranges;
  int threads = 1;

  /// Canonical text used for the manifest's config hash.
  [[nodiscard]] std::string canonical_string() const;
};

/// 64-bit FNV-1a, lowercase hex.
std::string fnv1a_hex(const std::string& text);

struct GeneratedCounts {
  int train = 0;
  int test = 0;
};

/// Renders `count` scenes and writes them in the layout above. Scene i uses
/// seed derive_seed(master_seed, i); the split is a seeded permutation.
GeneratedCounts generate_dataset(const std::filesystem::path& root, const GenConfig& config);

/// Loaded split: images plus annotations, in file order.
struct Split {
  std::vector<DatasetEntry> entries;
  std::vector<Image> images;
};

/// Reads <root>/<name>.json and every referenced image. Throws DataError.
Split load_split(const std::filesystem::path& root, const std::string& name);

}  // namespace ellipsedet
