#include "clustvit/pseudo_clusters.hpp"

#include <algorithm>

#include "clustvit/errors.hpp"

namespace clustvit::pseudo {

std::vector<int> patch_labels(const Mask& mask, std::size_t patch_size) {
    if (patch_size == 0 || mask.height % patch_size || mask.width % patch_size)
        throw ConfigError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                          " is not divisible by patch size " + std::to_string(patch_size));
    const std::size_t rows = mask.height / patch_size, cols = mask.width / patch_size;
    std::vector<int> out(rows * cols);
    for (std::size_t gr = 0; gr < rows; ++gr)
        for (std::size_t gc = 0; gc < cols; ++gc) {
            const int first = mask.at(gr * patch_size, gc * patch_size);
            int label = first;
            for (std::size_t y = 0; y < patch_size; ++y)
                for (std::size_t x = 0; x < patch_size; ++x) {
                    const int v = mask.at(gr * patch_size + y, gc * patch_size + x);
                    if (v <= 0)
                        throw DataError("mask uses reserved class id " + std::to_string(v) + " at pixel (" +
                                        std::to_string(gr * patch_size + y) + ", " +
                                        std::to_string(gc * patch_size + x) + ")");
                    if (v != first) label = 0;
                }
            out[gr * cols + gc] = label;
        }
    return out;
}

PseudoClusterMask topk_relabel(std::span<const int> patch_classes, std::size_t k) {
    if (k == 0) throw ConfigError("topk_relabel requires k >= 1");
    std::map<int, std::size_t> freq;
    for (int c : patch_classes)
        if (c != 0) ++freq[c];
    std::vector<std::pair<int, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    PseudoClusterMask out;
    std::map<int, int> label_of_class;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        const int label = static_cast<int>(i + 1);
        label_of_class[ranked[i].first] = label;
        out.class_of_label[label] = ranked[i].first;
    }
    out.labels.reserve(patch_classes.size());
    for (int c : patch_classes) {
        auto it = label_of_class.find(c);
        out.labels.push_back(it == label_of_class.end() ? 0 : it->second);
    }
    return out;
}

PseudoClusterMask generate(const Mask& mask, std::size_t patch_size, std::size_t k) {
    return topk_relabel(patch_labels(mask, patch_size), k);
}

double cluster_accuracy(std::span<const int> predicted, const PseudoClusterMask& pseudo) {
    if (predicted.size() != pseudo.labels.size())
        throw ShapeError("cluster_accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(pseudo.labels.size()) + " patches");
    if (predicted.empty()) return 1.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == pseudo.labels[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace clustvit::pseudo
