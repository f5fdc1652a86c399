#pragma once

// Per-patch cluster supervision derived from a ground-truth mask.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "clustvit/image.hpp"

namespace clustvit {

struct PseudoClusterMask {
    std::vector<int> labels;             // per patch, row-major, in {0..k}
    std::map<int, int> class_of_label;   // label (1..k) -> original class id
};

namespace pseudo {

// Class id of every pure patch, 0 for mixed patches. Class ids must be >= 1;
// a 0 anywhere in the mask throws DataError.
std::vector<int> patch_labels(const Mask& mask, std::size_t patch_size);

// Keeps the k most frequent nonzero classes (ties -> lower class id) as labels
// 1..k in descending frequency; everything else becomes 0.
PseudoClusterMask topk_relabel(std::span<const int> patch_classes, std::size_t k);

PseudoClusterMask generate(const Mask& mask, std::size_t patch_size, std::size_t k);

// Fraction of positions where predicted == pseudo label.
double cluster_accuracy(std::span<const int> predicted, const PseudoClusterMask& pseudo);

}  // namespace pseudo

}  // namespace clustvit
