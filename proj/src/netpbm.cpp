#include "clustvit/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "clustvit/errors.hpp"

namespace clustvit::netpbm {

namespace {

struct Header {
    std::size_t width = 0, height = 0, maxval = 0;
    std::size_t payload_offset = 0;
};

class HeaderParser {
public:
    HeaderParser(std::string_view bytes, const std::string& source) : b_(bytes), src_(source) {}

    Header parse(std::string_view magic) {
        if (b_.size() < 2 || b_.substr(0, 2) != magic)
            fail("expected magic " + std::string(magic), 0);
        pos_ = 2;
        Header h;
        h.width = number("width");
        h.height = number("height");
        h.maxval = number("maxval");
        if (h.width == 0 || h.height == 0) fail("zero image dimension", pos_);
        if (h.maxval == 0 || h.maxval > 255) fail("unsupported maxval " + std::to_string(h.maxval), pos_);
        if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_])))
            fail("expected whitespace after maxval", pos_);
        h.payload_offset = pos_ + 1;
        return h;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
        throw DataError(src_ + ": " + what + " at byte offset " + std::to_string(offset));
    }

private:
    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            const char c = b_[pos_];
            if (c == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t v = 0;
        while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
            v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
            if (v > (1u << 24)) fail(std::string(what) + " too large", start);
            ++pos_;
        }
        if (pos_ == start) fail(std::string("expected ") + what, start);
        return v;
    }

    std::string_view b_;
    const std::string& src_;
    std::size_t pos_ = 0;
};

}  // namespace

Image parse_ppm(std::string_view bytes, const std::string& source) {
    HeaderParser parser(bytes, source);
    const Header h = parser.parse("P6");
    const std::size_t need = h.width * h.height * 3;
    if (bytes.size() - h.payload_offset < need)
        parser.fail("truncated payload: need " + std::to_string(need) + " bytes, have " +
                        std::to_string(bytes.size() - h.payload_offset),
                    bytes.size());
    Image img(h.height, h.width);
    const double scale = 1.0 / static_cast<double>(h.maxval);
    for (std::size_t i = 0; i < need; ++i)
        img.rgb[i] = static_cast<double>(static_cast<unsigned char>(bytes[h.payload_offset + i])) * scale;
    return img;
}

Mask parse_pgm(std::string_view bytes, const std::string& source) {
    HeaderParser parser(bytes, source);
    const Header h = parser.parse("P5");
    const std::size_t need = h.width * h.height;
    if (bytes.size() - h.payload_offset < need)
        parser.fail("truncated payload: need " + std::to_string(need) + " bytes, have " +
                        std::to_string(bytes.size() - h.payload_offset),
                    bytes.size());
    Mask m(h.height, h.width);
    for (std::size_t i = 0; i < need; ++i) m.labels[i] = static_cast<unsigned char>(bytes[h.payload_offset + i]);
    return m;
}

std::string encode_ppm(const Image& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.reserve(out.size() + image.rgb.size());
    for (double v : image.rgb)
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    return out;
}

std::string encode_pgm(const Mask& mask) {
    std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
    out.reserve(out.size() + mask.labels.size());
    for (int v : mask.labels) {
        if (v < 0 || v > 255) throw DataError("mask label " + std::to_string(v) + " does not fit in 8 bits");
        out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("write failed for " + path.string());
}

Image read_ppm(const std::filesystem::path& path) { return parse_ppm(read_file(path), path.string()); }
Mask read_pgm(const std::filesystem::path& path) { return parse_pgm(read_file(path), path.string()); }
void write_ppm(const std::filesystem::path& path, const Image& image) { write_file(path, encode_ppm(image)); }
void write_pgm(const std::filesystem::path& path, const Mask& mask) { write_file(path, encode_pgm(mask)); }

std::array<std::uint8_t, 3> palette_color(int label) {
    static constexpr std::array<std::array<std::uint8_t, 3>, 8> kColors{{
        {230, 25, 75},    // red
        {60, 180, 75},    // green
        {0, 130, 200},    // blue
        {255, 225, 25},   // yellow
        {245, 130, 48},   // orange
        {145, 30, 180},   // purple
        {70, 240, 240},   // cyan
        {240, 50, 230},   // magenta
    }};
    if (label <= 0) return {0, 0, 0};
    return kColors[static_cast<std::size_t>(label - 1) % kColors.size()];
}

std::string encode_label_ppm(std::span<const int> labels, std::size_t rows, std::size_t cols, std::size_t cell) {
    if (labels.size() != rows * cols) throw ShapeError("label image: size does not match grid");
    const std::size_t h = rows * cell, w = cols * cell;
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const auto c = palette_color(labels[(y / cell) * cols + x / cell]);
            out.append(reinterpret_cast<const char*>(c.data()), 3);
        }
    return out;
}

void write_label_ppm(const std::filesystem::path& path, std::span<const int> labels, std::size_t rows,
                     std::size_t cols, std::size_t cell) {
    write_file(path, encode_label_ppm(labels, rows, cols, cell));
}

}  // namespace clustvit::netpbm
