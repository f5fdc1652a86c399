#pragma once

// Binary PPM (P6) / PGM (P5) I/O, 8-bit samples only on write.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustvit/image.hpp"

namespace clustvit::netpbm {

// Parse errors are DataError with the byte offset of the problem.
Image parse_ppm(std::string_view bytes, const std::string& source = "<memory>");
Mask parse_pgm(std::string_view bytes, const std::string& source = "<memory>");

std::string encode_ppm(const Image& image);  // channel values rounded to v*255
std::string encode_pgm(const Mask& mask);    // labels must be in [0, 255]

Image read_ppm(const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);
void write_pgm(const std::filesystem::path& path, const Mask& mask);

// Fixed label palette: 0 is black, 1.. cycle through distinct colors.
std::array<std::uint8_t, 3> palette_color(int label);

// Indexed-color rendering of a rows x cols label grid, each cell drawn as a
// cell x cell block.
std::string encode_label_ppm(std::span<const int> labels, std::size_t rows, std::size_t cols, std::size_t cell);
void write_label_ppm(const std::filesystem::path& path, std::span<const int> labels, std::size_t rows,
                     std::size_t cols, std::size_t cell);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace clustvit::netpbm
