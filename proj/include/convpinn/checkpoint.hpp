#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "convpinn/autodiff.hpp"

namespace convpinn {

/// MRFW v1 checkpoint layout: the ASCII line "MRFW v1\n", then one record
/// per parameter in store order:
///   u32 name_len | name bytes | u32 rank | u32 dims[rank] | f64 values
/// (all integers and floats little-endian).  Records run until EOF.
struct CheckpointEntry {
    std::string name;
    std::vector<int> dims;
    std::vector<double> values;
};

namespace detail {
inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
} // namespace detail

inline void save_checkpoint(const std::filesystem::path& path,
                            const ad::ParamStore& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open for writing: " + path.string());
    os << "MRFW v1\n";
    for (int p = 0; p < params.count(); ++p) {
        const auto& e = params.at(p);
        detail::write_u32(os, std::uint32_t(e.name.size()));
        os.write(e.name.data(), std::streamsize(e.name.size()));
        detail::write_u32(os, std::uint32_t(e.dims.size()));
        for (int d : e.dims) detail::write_u32(os, std::uint32_t(d));
        os.write(reinterpret_cast<const char*>(e.value.data()),
                 std::streamsize(e.value.size() * sizeof(double)));
    }
    if (!os) throw NumericalError("short write: " + path.string());
}

inline std::vector<CheckpointEntry>
read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open for reading: " + path.string());
    std::string magic;
    if (!std::getline(is, magic) || magic != "MRFW v1")
        throw InvalidInput("not an MRFW v1 checkpoint: " + path.string());
    std::vector<CheckpointEntry> out;
    while (true) {
        const std::uint32_t name_len = detail::read_u32(is);
        if (is.eof()) break;
        if (!is || name_len == 0 || name_len > 4096)
            throw InvalidInput("corrupt checkpoint record: " + path.string());
        CheckpointEntry e;
        e.name.resize(name_len);
        is.read(e.name.data(), name_len);
        const std::uint32_t rank = detail::read_u32(is);
        if (!is || rank > 8)
            throw InvalidInput("corrupt checkpoint record: " + path.string());
        std::int64_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            const std::uint32_t d = detail::read_u32(is);
            e.dims.push_back(int(d));
            n *= d;
        }
        e.values.resize(n);
        is.read(reinterpret_cast<char*>(e.values.data()),
                std::streamsize(n * sizeof(double)));
        if (std::size_t(is.gcount()) != n * sizeof(double))
            throw InvalidInput("truncated checkpoint record: " + path.string());
        out.push_back(std::move(e));
    }
    return out;
}

/// Load values into an existing store; the file must contain exactly the
/// store's parameters (same names and dims, any order).
inline void load_checkpoint(const std::filesystem::path& path,
                            ad::ParamStore& params) {
    const auto entries = read_checkpoint(path);
    if (int(entries.size()) != params.count())
        throw InvalidInput("checkpoint parameter count mismatch");
    for (const auto& e : entries) {
        const int idx = params.find(e.name);
        if (idx < 0)
            throw InvalidInput("checkpoint has unknown parameter: " + e.name);
        auto& p = params.at(idx);
        if (p.dims != e.dims)
            throw InvalidInput("checkpoint shape mismatch for: " + e.name);
        p.value = e.values;
    }
}

} // namespace convpinn
