#pragma once

// Deterministic synthetic segmentation scenes: textured background (class 1)
// with rectangles, circles and triangles of classes 2..C, plus the on-disk
// dataset layout and manifest.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clustvit/image.hpp"
#include "clustvit/pseudo_clusters.hpp"

namespace clustvit {

struct SceneSpec {
    std::uint64_t seed = 0;  // master seed; split streams are derived from it
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t num_classes = 3;
    std::size_t min_shapes = 1;
    std::size_t max_shapes = 2;
    double background_fraction = 0.85;
    std::size_t count = 100;
    std::string split = "train";

    void validate() const;
    // Seed of the split's stream: train = master+1, val = master+2, test = master+3.
    std::uint64_t split_seed() const;

    // "sparse": C=3, 1-2 shapes, 85% background. "diverse": C=6, 4-8 shapes, 45% background.
    static SceneSpec preset(const std::string& name, std::uint64_t seed, std::size_t count,
                            const std::string& split = "train");
};

struct Sample {
    Image image;
    Mask mask;
    std::string id;
};

namespace synth {

Sample generate_sample(const SceneSpec& spec, std::size_t index);
std::vector<Sample> generate(const SceneSpec& spec);

}  // namespace synth

struct DatasetEntry {
    std::string split;
    std::string id;
    std::filesystem::path image;  // relative to the dataset root
    std::filesystem::path mask;
};

struct Manifest {
    std::string preset;
    std::uint64_t seed = 0;
    std::vector<DatasetEntry> entries;
    std::vector<std::pair<std::size_t, std::size_t>> pseudo_caches;  // (k, P)

    std::vector<DatasetEntry> split(const std::string& name) const;
    std::size_t count(const std::string& split) const;
};

namespace dataset {

std::filesystem::path manifest_path(const std::filesystem::path& root);
// <split>/<id>.pc_k<k>_p<P>.txt
std::filesystem::path pseudo_path(const DatasetEntry& e, std::size_t k, std::size_t patch);

void write_manifest(const std::filesystem::path& root, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& root);

// Writes <root>/<split>/<id>.ppm/.pgm for each spec and the manifest.
Manifest write_dataset(const std::filesystem::path& root, const std::string& preset, std::uint64_t seed,
                       const std::vector<SceneSpec>& splits);

// Computes and writes pseudo-cluster files for (k, P) if absent; updates the manifest.
void cache_pseudo_clusters(const std::filesystem::path& root, Manifest& m, std::size_t k, std::size_t patch);

std::vector<int> read_pseudo_file(const std::filesystem::path& path);
std::string encode_pseudo_file(std::span<const int> labels, std::size_t grid_cols);

Sample load_sample(const std::filesystem::path& root, const DatasetEntry& e);
std::vector<Sample> load_split(const std::filesystem::path& root, const Manifest& m, const std::string& split);

}  // namespace dataset

}  // namespace clustvit
