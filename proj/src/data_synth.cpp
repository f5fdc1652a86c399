#include "clustvit/data_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <cstdio>
#include <sstream>

#include "clustvit/errors.hpp"
#include "clustvit/netpbm.hpp"
#include "clustvit/rng.hpp"

namespace clustvit {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
    if (num_classes < 2) throw ConfigError("scene: need at least 2 classes");
    if (num_classes > 255) throw ConfigError("scene: class ids must fit in 8 bits");
    if (min_shapes > max_shapes) throw ConfigError("scene: min_shapes > max_shapes");
    if (!(background_fraction > 0.0 && background_fraction < 1.0))
        throw ConfigError("scene: background_fraction must lie in (0, 1)");
    if (height < 8 || width < 8) throw ConfigError("scene: image too small");
}

std::uint64_t SceneSpec::split_seed() const {
    if (split == "train") return seed + 1;
    if (split == "val") return seed + 2;
    if (split == "test") return seed + 3;
    throw ConfigError("unknown split '" + split + "'");
}

SceneSpec SceneSpec::preset(const std::string& name, std::uint64_t seed, std::size_t count, const std::string& split) {
    SceneSpec s;
    s.seed = seed;
    s.count = count;
    s.split = split;
    if (name == "sparse") {
        s.num_classes = 3, s.min_shapes = 1, s.max_shapes = 2, s.background_fraction = 0.85;
    } else if (name == "diverse") {
        s.num_classes = 6, s.min_shapes = 4, s.max_shapes = 8, s.background_fraction = 0.45;
    } else {
        throw ConfigError("unknown dataset preset '" + name + "'");
    }
    return s;
}

namespace synth {

namespace {

using Rgb = std::array<double, 3>;

// Base colors per class id (index 0 unused, 1 = background).
constexpr std::array<Rgb, 9> kClassColors{{
    {0.0, 0.0, 0.0},
    {0.35, 0.55, 0.30},
    {0.85, 0.25, 0.20},
    {0.20, 0.30, 0.85},
    {0.90, 0.80, 0.20},
    {0.70, 0.30, 0.75},
    {0.20, 0.80, 0.80},
    {0.95, 0.55, 0.15},
    {0.55, 0.55, 0.55},
}};

Rgb class_color(int c) {
    if (static_cast<std::size_t>(c) < kClassColors.size()) return kClassColors[static_cast<std::size_t>(c)];
    // Beyond the table: spread hues deterministically.
    const double h = std::fmod(0.618034 * c, 1.0) * 2.0 * std::numbers::pi;
    return {0.5 + 0.4 * std::cos(h), 0.5 + 0.4 * std::cos(h + 2.1), 0.5 + 0.4 * std::cos(h + 4.2)};
}

enum class ShapeKind { Rect, Circle, Triangle };

struct Shape {
    ShapeKind kind;
    double cx, cy;      // center
    double hw, hh;      // half extents (rect), radius in hw (circle)
    std::array<double, 6> tri{};  // triangle vertices
    int cls;
    Rgb color;

    bool contains(double x, double y) const {
        switch (kind) {
            case ShapeKind::Rect:
                return std::abs(x - cx) <= hw && std::abs(y - cy) <= hh;
            case ShapeKind::Circle:
                return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= hw * hw;
            case ShapeKind::Triangle: {
                auto edge = [&](int a, int b) {
                    return (tri[2 * b] - tri[2 * a]) * (y - tri[2 * a + 1]) -
                           (tri[2 * b + 1] - tri[2 * a + 1]) * (x - tri[2 * a]);
                };
                const double e0 = edge(0, 1), e1 = edge(1, 2), e2 = edge(2, 0);
                return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
            }
        }
        return false;
    }
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Shape random_shape(Rng& rng, double area, double H, double W, int cls) {
    Shape s{};
    s.cls = cls;
    const double pick = rng.uniform();
    s.kind = pick < 0.4 ? ShapeKind::Rect : (pick < 0.75 ? ShapeKind::Circle : ShapeKind::Triangle);
    const double max_half = 0.5 * std::min(H, W) - 1.0;
    switch (s.kind) {
        case ShapeKind::Rect: {
            const double aspect = rng.uniform(0.6, 1.6);
            s.hw = std::min(0.5 * std::sqrt(area * aspect), max_half);
            s.hh = std::min(0.5 * std::sqrt(area / aspect), max_half);
            break;
        }
        case ShapeKind::Circle:
            s.hw = s.hh = std::min(std::sqrt(area / std::numbers::pi), max_half);
            break;
        case ShapeKind::Triangle: {
            // Isosceles triangle inside a box of half extents (hw, hh): area = 2 hw hh.
            const double aspect = rng.uniform(0.8, 1.25);
            s.hw = std::min(std::sqrt(0.5 * area * aspect), max_half);
            s.hh = std::min(std::sqrt(0.5 * area / aspect), max_half);
            break;
        }
    }
    s.cx = rng.uniform(s.hw, W - s.hw);
    s.cy = rng.uniform(s.hh, H - s.hh);
    if (s.kind == ShapeKind::Triangle) {
        const bool flip = rng.uniform() < 0.5;
        const double apex_y = flip ? s.cy + s.hh : s.cy - s.hh;
        const double base_y = flip ? s.cy - s.hh : s.cy + s.hh;
        s.tri = {s.cx, apex_y, s.cx - s.hw, base_y, s.cx + s.hw, base_y};
    }
    const Rgb base = class_color(cls);
    for (std::size_t c = 0; c < 3; ++c) s.color[c] = clamp01(base[c] + rng.uniform(-0.08, 0.08));
    return s;
}

}  // namespace

Sample generate_sample(const SceneSpec& spec, std::size_t index) {
    spec.validate();
    Rng rng(Rng::derive(spec.split_seed(), index));
    const std::size_t H = spec.height, W = spec.width;
    Sample s;
    s.image = Image(H, W);
    s.mask = Mask(H, W, 1);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%05zu", spec.split.c_str(), index);
    s.id = id;

    const auto n_shapes =
        static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.min_shapes), static_cast<std::int64_t>(spec.max_shapes)));
    const double covered = (1.0 - spec.background_fraction) * static_cast<double>(H * W);
    std::vector<Shape> shapes;
    for (std::size_t i = 0; i < n_shapes; ++i) {
        const double area = covered / static_cast<double>(n_shapes) * rng.uniform(0.7, 1.3);
        const int cls = static_cast<int>(rng.uniform_int(2, static_cast<std::int64_t>(spec.num_classes)));
        shapes.push_back(random_shape(rng, area, static_cast<double>(H), static_cast<double>(W), cls));
    }

    // Background: per-image tint, a smooth gradient and per-pixel noise.
    Rgb bg = class_color(1);
    for (auto& v : bg) v += rng.uniform(-0.05, 0.05);
    const double gx = rng.uniform(-0.08, 0.08), gy = rng.uniform(-0.08, 0.08);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            const double shade = gx * (px / static_cast<double>(W) - 0.5) + gy * (py / static_cast<double>(H) - 0.5);
            const Shape* top = nullptr;
            for (const auto& sh : shapes)
                if (sh.contains(px, py)) top = &sh;  // later shapes occlude earlier ones
            const Rgb& base = top ? top->color : bg;
            if (top) s.mask.at(y, x) = top->cls;
            for (std::size_t c = 0; c < 3; ++c)
                s.image.at(y, x, c) = clamp01(base[c] + (top ? 0.0 : shade) + rng.uniform(-0.06, 0.06));
        }
    return s;
}

std::vector<Sample> generate(const SceneSpec& spec) {
    std::vector<Sample> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) out.push_back(generate_sample(spec, i));
    return out;
}

}  // namespace synth

std::vector<DatasetEntry> Manifest::split(const std::string& name) const {
    std::vector<DatasetEntry> out;
    for (const auto& e : entries)
        if (e.split == name) out.push_back(e);
    return out;
}

std::size_t Manifest::count(const std::string& name) const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.split == name; }));
}

namespace dataset {

fs::path manifest_path(const fs::path& root) { return root / "manifest.txt"; }

fs::path pseudo_path(const DatasetEntry& e, std::size_t k, std::size_t patch) {
    return fs::path(e.split) / (e.id + ".pc_k" + std::to_string(k) + "_p" + std::to_string(patch) + ".txt");
}

void write_manifest(const fs::path& root, const Manifest& m) {
    std::ostringstream os;
    os << "# clustvit dataset manifest v1\n";
    os << "preset " << m.preset << "\n";
    os << "seed " << m.seed << "\n";
    for (const auto& [k, p] : m.pseudo_caches) os << "pseudo " << k << " " << p << "\n";
    for (const auto& e : m.entries)
        os << "sample " << e.split << " " << e.id << " " << e.image.generic_string() << " " << e.mask.generic_string()
           << "\n";
    netpbm::write_file(manifest_path(root), os.str());
}

Manifest read_manifest(const fs::path& root) {
    const auto path = manifest_path(root);
    if (!fs::exists(path)) throw DataError("missing manifest " + path.string());
    std::istringstream is(netpbm::read_file(path));
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "preset") {
            ls >> m.preset;
        } else if (key == "seed") {
            ls >> m.seed;
        } else if (key == "pseudo") {
            std::size_t k = 0, p = 0;
            ls >> k >> p;
            m.pseudo_caches.emplace_back(k, p);
        } else if (key == "sample") {
            DatasetEntry e;
            std::string img, msk;
            ls >> e.split >> e.id >> img >> msk;
            e.image = img;
            e.mask = msk;
            m.entries.push_back(std::move(e));
        } else {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown record '" + key + "'");
        }
        if (ls.fail()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed record");
    }
    return m;
}

Manifest write_dataset(const fs::path& root, const std::string& preset, std::uint64_t seed,
                       const std::vector<SceneSpec>& splits) {
    Manifest m;
    m.preset = preset;
    m.seed = seed;
    for (const auto& spec : splits) {
        fs::create_directories(root / spec.split);
        for (std::size_t i = 0; i < spec.count; ++i) {
            Sample s = synth::generate_sample(spec, i);
            DatasetEntry e{spec.split, s.id, fs::path(spec.split) / (s.id + ".ppm"), fs::path(spec.split) / (s.id + ".pgm")};
            netpbm::write_ppm(root / e.image, s.image);
            netpbm::write_pgm(root / e.mask, s.mask);
            m.entries.push_back(std::move(e));
        }
    }
    write_manifest(root, m);
    return m;
}

std::string encode_pseudo_file(std::span<const int> labels, std::size_t grid_cols) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += std::to_string(labels[i]);
        out += (i + 1) % grid_cols == 0 ? '\n' : ' ';
    }
    return out;
}

std::vector<int> read_pseudo_file(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("missing pseudo-cluster file " + path.string());
    std::istringstream is(netpbm::read_file(path));
    std::vector<int> out;
    int v = 0;
    while (is >> v) out.push_back(v);
    if (!is.eof()) throw DataError(path.string() + ": malformed pseudo-cluster file");
    return out;
}

void cache_pseudo_clusters(const fs::path& root, Manifest& m, std::size_t k, std::size_t patch) {
    for (const auto& e : m.entries) {
        const auto out = root / pseudo_path(e, k, patch);
        if (fs::exists(out)) continue;
        const Mask mask = netpbm::read_pgm(root / e.mask);
        const auto pc = pseudo::generate(mask, patch, k);
        netpbm::write_file(out, encode_pseudo_file(pc.labels, mask.width / patch));
    }
    if (std::find(m.pseudo_caches.begin(), m.pseudo_caches.end(), std::pair{k, patch}) == m.pseudo_caches.end()) {
        m.pseudo_caches.emplace_back(k, patch);
        write_manifest(root, m);
    }
}

Sample load_sample(const fs::path& root, const DatasetEntry& e) {
    const auto img = root / e.image, msk = root / e.mask;
    if (!fs::exists(img)) throw DataError("missing image " + img.string());
    if (!fs::exists(msk)) throw DataError("missing mask " + msk.string());
    return {netpbm::read_ppm(img), netpbm::read_pgm(msk), e.id};
}

std::vector<Sample> load_split(const fs::path& root, const Manifest& m, const std::string& split) {
    std::vector<Sample> out;
    for (const auto& e : m.entries)
        if (e.split == split) out.push_back(load_sample(root, e));
    return out;
}

}  // namespace dataset

}  // namespace clustvit
