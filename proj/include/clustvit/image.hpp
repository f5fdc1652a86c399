#pragma once

#include <cstddef>
#include <vector>

namespace clustvit {

// H x W x 3, channel values in [0, 1], row-major with interleaved channels.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> rgb;

    Image() = default;
    Image(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0.0) {}

    double& at(std::size_t y, std::size_t x, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
};

// H x W integer class map.
struct Mask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels;

    Mask() = default;
    Mask(std::size_t h, std::size_t w, int fill = 0) : height(h), width(w), labels(h * w, fill) {}

    int& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
    int at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }

    bool operator==(const Mask&) const = default;
};

}  // namespace clustvit
