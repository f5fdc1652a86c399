#include "clustvit/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "clustvit/errors.hpp"

namespace clustvit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', 'V', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
public:
    Reader(std::istream& is, const std::filesystem::path& path) : is_(is), path_(path) {}

    template <typename T>
    T get(const char* what) {
        T v{};
        read(&v, sizeof v, what);
        return v;
    }

    void read(void* dst, std::size_t n, const char* what) {
        is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw DataError(path_.string() + ": truncated " + what + " at byte " + std::to_string(offset_));
        offset_ += n;
    }

    bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

private:
    std::istream& is_;
    const std::filesystem::path& path_;
    std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    for (const auto& p : params.items()) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto e : p.tensor.shape()) put<std::uint64_t>(os, e);
        const auto d = p.tensor.data();
        os.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
    }
    if (!os) throw DataError("write failed for " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path.string());
    Reader r(is, path);
    char magic[4];
    r.read(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + ": bad magic, expected CVT1");
    std::vector<NamedTensor> out;
    while (!r.at_end()) {
        NamedTensor t;
        const auto len = r.get<std::uint32_t>("name length");
        t.name.resize(len);
        r.read(t.name.data(), len, "name");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > 8) throw DataError(path.string() + ": implausible rank " + std::to_string(rank) + " for " + t.name);
        for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(r.get<std::uint64_t>("extent"));
        t.values.resize(shape_numel(t.shape));
        r.read(t.values.data(), t.values.size() * sizeof(double), "payload");
        out.push_back(std::move(t));
    }
    return out;
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
    auto stored = read_checkpoint(path);
    std::ostringstream problems;
    for (const auto& p : params.items()) {
        auto it = std::find_if(stored.begin(), stored.end(), [&](const NamedTensor& t) { return t.name == p.name; });
        if (it == stored.end())
            problems << "\n  missing parameter " << p.name;
        else if (it->shape != p.tensor.shape())
            problems << "\n  " << p.name << ": checkpoint " << shape_str(it->shape) << " vs model "
                     << shape_str(p.tensor.shape());
    }
    for (const auto& t : stored)
        if (!params.find(t.name)) problems << "\n  unexpected parameter " << t.name;
    if (!problems.str().empty()) throw DataError("checkpoint " + path.string() + " does not match model:" + problems.str());
    for (auto& p : params.items()) {
        const auto& t = *std::find_if(stored.begin(), stored.end(), [&](const NamedTensor& s) { return s.name == p.name; });
        std::copy(t.values.begin(), t.values.end(), p.tensor.data().begin());
        std::fill(p.velocity.begin(), p.velocity.end(), 0.0);
    }
}

}  // namespace clustvit
