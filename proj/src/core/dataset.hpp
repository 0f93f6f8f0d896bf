#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace seufi {

struct LabeledImage {
  std::string id;
  Tensor image;     // H x W x C fp32
  ClassMap labels;  // H x W ground truth
};

struct Dataset {
  int h = 0, w = 0, c = 0;
  int classes = 0;
  std::vector<LabeledImage> items;
};

// Procedural multi-band images with region-structured labels. Each class owns
// at least one seed point, labels follow the nearest-seed rule (ties to the
// lowest class), and band values are a per-class signature plus noise,
// strictly positive. Deterministic in the seed.
Dataset make_synthetic_dataset(uint64_t seed, int count, int h, int w, int c, int classes);

// Directory container: manifest.json + per image one little-endian fp32 HWC
// blob and one 8-bit label blob.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace seufi
