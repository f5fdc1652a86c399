#pragma once

// Flat binary checkpoint:
//   "CVT1"
//   repeated until EOF:
//     u32 name_length, name bytes, u32 rank, u64 extent[rank], f64 payload[prod(extents)]
// All integers and floats little-endian.

#include <filesystem>
#include <string>
#include <vector>

#include "clustvit/optim.hpp"

namespace clustvit {

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into params. Names and shapes must match exactly;
// otherwise throws DataError listing every disagreement.
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

}  // namespace clustvit
