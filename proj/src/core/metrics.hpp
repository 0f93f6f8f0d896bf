#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace seufi {

// Per-class intersection-over-union in percent. A class absent from both
// prediction and ground truth has no defined IoU and is excluded from
// aggregates.
struct IoUResult {
  std::vector<double> iou;        // percent, valid where defined[i]
  std::vector<bool> defined;
};

IoUResult iou_per_class(const ClassMap& pred, const ClassMap& gt);

// Micro-averaged IoU over all pixels of the set: intersections and unions
// are summed across images and classes before dividing.
double global_iou(std::span<const ClassMap> preds, std::span<const ClassMap> gts);

struct WeightedIoUResult {
  double value = 0.0;                 // percent
  std::vector<int> excluded_classes;  // zero-frequency or undefined classes
};

// IoU averaged with weights proportional to the inverse ground-truth class
// frequency of the evaluation set.
WeightedIoUResult weighted_iou(std::span<const ClassMap> preds, std::span<const ClassMap> gts);
WeightedIoUResult weighted_iou(std::span<const ClassMap> preds, std::span<const ClassMap> gts,
                               std::span<const long long> frequencies);

std::vector<long long> class_frequencies(std::span<const ClassMap> gts, int classes);

// Fraction of values with lo < |v| < hi (strict bounds).
double range_ratio(std::span<const float> values, double lo = 1.0, double hi = 2.0);

}  // namespace seufi
