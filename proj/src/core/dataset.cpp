#include "core/dataset.hpp"

#include <algorithm>

#include <json.hpp>

namespace seufi {

using nlohmann::json;

Dataset make_synthetic_dataset(uint64_t seed, int count, int h, int w, int c, int classes) {
  if (count < 1) fail_config("make_synthetic_dataset: count must be >= 1");
  if (h < 1 || w < 1 || c < 1) fail_config("make_synthetic_dataset: invalid shape");
  if (classes < 1 || classes > 256) fail_config("make_synthetic_dataset: classes must be in [1, 256]");
  if (static_cast<long long>(h) * w < classes)
    fail_config("make_synthetic_dataset: image too small to carry every class");

  Dataset ds;
  ds.h = h;
  ds.w = w;
  ds.c = c;
  ds.classes = classes;

  for (int n = 0; n < count; ++n) {
    Rng rng(derive_seed(seed, "image/" + std::to_string(n)));

    // Distinct seed pixels, one per class: every class is guaranteed to
    // appear since each seed is strictly nearest to itself.
    std::vector<long long> seed_pix;
    {
      const long long pixels = static_cast<long long>(h) * w;
      std::vector<bool> used(static_cast<size_t>(pixels), false);
      while (static_cast<int>(seed_pix.size()) < classes) {
        const long long p = static_cast<long long>(rng.uniform_int(static_cast<uint64_t>(pixels)));
        if (!used[static_cast<size_t>(p)]) {
          used[static_cast<size_t>(p)] = true;
          seed_pix.push_back(p);
        }
      }
    }

    // Per-class spectral signature, strictly positive.
    std::vector<float> signature(static_cast<size_t>(classes) * c);
    for (auto& v : signature) v = static_cast<float>(rng.uniform(0.2, 1.0));

    LabeledImage item;
    item.id = "img" + std::to_string(n);
    item.image = Tensor::zeros({h, w, c});
    item.labels.h = h;
    item.labels.w = w;
    item.labels.classes = classes;
    item.labels.idx.resize(static_cast<size_t>(h) * w);

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int best = 0;
        long long best_d2 = -1;
        for (int k = 0; k < classes; ++k) {
          const int sy = static_cast<int>(seed_pix[static_cast<size_t>(k)] / w);
          const int sx = static_cast<int>(seed_pix[static_cast<size_t>(k)] % w);
          const long long d2 = static_cast<long long>(y - sy) * (y - sy) +
                               static_cast<long long>(x - sx) * (x - sx);
          if (best_d2 < 0 || d2 < best_d2) {
            best_d2 = d2;
            best = k;
          }
        }
        item.labels.idx[static_cast<size_t>(y) * w + x] = static_cast<uint8_t>(best);
        for (int ch = 0; ch < c; ++ch) {
          const float base = signature[static_cast<size_t>(best) * c + ch];
          const float noise = static_cast<float>(rng.normal() * 0.02);
          item.image.at3(y, x, ch) = std::max(0.01f, base + noise);
        }
      }
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = 1;
  manifest["shape"] = {ds.h, ds.w, ds.c};
  manifest["classes"] = ds.classes;
  json images = json::array();
  for (const auto& item : ds.items) {
    const std::string img_name = item.id + ".f32";
    const std::string lbl_name = item.id + ".labels";
    std::string blob;
    blob.reserve(item.image.data.size() * 4);
    for (float v : item.image.data) put_u32_le(blob, float_bits(v));
    write_file_atomic(dir / img_name, blob);
    write_file_atomic(dir / lbl_name,
                      std::string(reinterpret_cast<const char*>(item.labels.idx.data()),
                                  item.labels.idx.size()));
    images.push_back({{"id", item.id}, {"image_blob", img_name}, {"label_blob", lbl_name}});
  }
  manifest["images"] = images;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  try {
    const json manifest = json::parse(read_file(dir / "manifest.json"));
    if (manifest.at("version").get<int>() != 1) fail_data("unsupported dataset version");
    const auto shape = manifest.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) fail_data("dataset shape must have three extents");
    ds.h = shape[0];
    ds.w = shape[1];
    ds.c = shape[2];
    ds.classes = manifest.at("classes").get<int>();
    for (const auto& ji : manifest.at("images")) {
      LabeledImage item;
      item.id = ji.at("id").get<std::string>();
      const std::string img = read_file(dir / ji.at("image_blob").get<std::string>());
      const size_t want = static_cast<size_t>(ds.h) * ds.w * ds.c * 4;
      if (img.size() != want)
        fail_data("image blob for '" + item.id + "' has " + std::to_string(img.size()) +
                  " bytes, expected " + std::to_string(want));
      item.image = Tensor::zeros({ds.h, ds.w, ds.c});
      const auto* bytes = reinterpret_cast<const unsigned char*>(img.data());
      for (size_t i = 0; i < item.image.data.size(); ++i)
        item.image.data[i] = bits_to_float(get_u32_le(bytes + 4 * i));

      const std::string lbl = read_file(dir / ji.at("label_blob").get<std::string>());
      if (lbl.size() != static_cast<size_t>(ds.h) * ds.w)
        fail_data("label blob for '" + item.id + "' has wrong length");
      item.labels.h = ds.h;
      item.labels.w = ds.w;
      item.labels.classes = ds.classes;
      item.labels.idx.assign(lbl.begin(), lbl.end());
      for (uint8_t v : item.labels.idx)
        if (v >= ds.classes)
          fail_data("label blob for '" + item.id + "' contains class " + std::to_string(v) +
                    " >= " + std::to_string(ds.classes));
      ds.items.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    fail_data("malformed dataset manifest in " + dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace seufi
