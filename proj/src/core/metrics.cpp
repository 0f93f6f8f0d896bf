#include "core/metrics.hpp"

#include <cmath>

namespace seufi {

namespace {

void require_aligned(const ClassMap& pred, const ClassMap& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    fail_data("iou: map extents " + std::to_string(pred.h) + "x" + std::to_string(pred.w) +
              " vs " + std::to_string(gt.h) + "x" + std::to_string(gt.w));
  if (pred.classes != gt.classes)
    fail_data("iou: class counts " + std::to_string(pred.classes) + " vs " +
              std::to_string(gt.classes));
}

struct Counts {
  std::vector<long long> inter, pred_c, gt_c;
  explicit Counts(int classes)
      : inter(static_cast<size_t>(classes), 0),
        pred_c(static_cast<size_t>(classes), 0),
        gt_c(static_cast<size_t>(classes), 0) {}

  void add(const ClassMap& pred, const ClassMap& gt) {
    for (size_t i = 0; i < pred.idx.size(); ++i) {
      const uint8_t p = pred.idx[i], g = gt.idx[i];
      ++pred_c[p];
      ++gt_c[g];
      if (p == g) ++inter[p];
    }
  }

  long long union_of(size_t c) const { return pred_c[c] + gt_c[c] - inter[c]; }
};

}  // namespace

IoUResult iou_per_class(const ClassMap& pred, const ClassMap& gt) {
  require_aligned(pred, gt);
  Counts counts(pred.classes);
  counts.add(pred, gt);
  IoUResult r;
  r.iou.assign(static_cast<size_t>(pred.classes), 0.0);
  r.defined.assign(static_cast<size_t>(pred.classes), false);
  for (size_t c = 0; c < r.iou.size(); ++c) {
    const long long u = counts.union_of(c);
    if (u == 0) continue;  // absent everywhere: undefined
    r.defined[c] = true;
    r.iou[c] = 100.0 * static_cast<double>(counts.inter[c]) / static_cast<double>(u);
  }
  return r;
}

double global_iou(std::span<const ClassMap> preds, std::span<const ClassMap> gts) {
  if (preds.empty() || preds.size() != gts.size())
    fail_data("global_iou: prediction and ground-truth sets must be non-empty and aligned");
  Counts counts(preds[0].classes);
  for (size_t i = 0; i < preds.size(); ++i) {
    require_aligned(preds[i], gts[i]);
    counts.add(preds[i], gts[i]);
  }
  long long inter = 0, uni = 0;
  for (size_t c = 0; c < counts.inter.size(); ++c) {
    inter += counts.inter[c];
    uni += counts.union_of(c);
  }
  if (uni == 0) fail_data("global_iou: empty evaluation set");
  return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<long long> class_frequencies(std::span<const ClassMap> gts, int classes) {
  std::vector<long long> freq(static_cast<size_t>(classes), 0);
  for (const auto& gt : gts)
    for (uint8_t v : gt.idx) ++freq[v];
  return freq;
}

WeightedIoUResult weighted_iou(std::span<const ClassMap> preds, std::span<const ClassMap> gts) {
  if (gts.empty()) fail_data("weighted_iou: empty ground-truth set");
  const auto freq = class_frequencies(gts, gts[0].classes);
  return weighted_iou(preds, gts, freq);
}

WeightedIoUResult weighted_iou(std::span<const ClassMap> preds, std::span<const ClassMap> gts,
                               std::span<const long long> frequencies) {
  if (preds.empty() || preds.size() != gts.size())
    fail_data("weighted_iou: prediction and ground-truth sets must be non-empty and aligned");
  const int classes = preds[0].classes;
  if (static_cast<int>(frequencies.size()) != classes)
    fail_data("weighted_iou: frequency vector length mismatch");

  Counts counts(classes);
  for (size_t i = 0; i < preds.size(); ++i) {
    require_aligned(preds[i], gts[i]);
    counts.add(preds[i], gts[i]);
  }

  WeightedIoUResult r;
  double weight_sum = 0.0, acc = 0.0;
  for (int c = 0; c < classes; ++c) {
    const long long u = counts.union_of(static_cast<size_t>(c));
    if (frequencies[static_cast<size_t>(c)] <= 0 || u == 0) {
      r.excluded_classes.push_back(c);
      continue;
    }
    const double w = 1.0 / static_cast<double>(frequencies[static_cast<size_t>(c)]);
    const double iou =
        100.0 * static_cast<double>(counts.inter[static_cast<size_t>(c)]) / static_cast<double>(u);
    acc += w * iou;
    weight_sum += w;
  }
  if (weight_sum <= 0.0) fail_data("weighted_iou: no class with positive frequency");
  r.value = acc / weight_sum;
  return r;
}

double range_ratio(std::span<const float> values, double lo, double hi) {
  if (values.empty()) fail_data("range_ratio: empty parameter set");
  long long inside = 0;
  for (float v : values) {
    const double a = std::fabs(static_cast<double>(v));
    if (a > lo && a < hi) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(values.size());
}

}  // namespace seufi
