#pragma once

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "convpinn/grid.hpp"

namespace convpinn {

static_assert(std::endian::native == std::endian::little,
              "FGRD writer assumes a little-endian host");

namespace detail {
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

/// Write a field in FGRD v1: one ASCII header line
///   FGRD <channels> <nh> <nw> <d1> <d2> <geometry>\n
/// followed by channels*nh*nw little-endian 64-bit floats, channel-major
/// then row-major.
inline void write_fgrd(const std::filesystem::path& path, const Field& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open for writing: " + path.string());
    std::ostringstream head;
    head << "FGRD " << f.channels << ' ' << f.grid.nh << ' ' << f.grid.nw
         << ' ' << detail::fmt_double(f.grid.d1) << ' '
         << detail::fmt_double(f.grid.d2) << ' ' << f.grid.geometry.token()
         << '\n';
    os << head.str();
    os.write(reinterpret_cast<const char*>(f.data.data()),
             std::streamsize(f.data.size() * sizeof(double)));
    if (!os) throw NumericalError("short write: " + path.string());
}

inline Field read_fgrd(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInput("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw InvalidInput("empty FGRD file");
    std::istringstream hs(line);
    std::string magic, geom;
    int channels = 0, nh = 0, nw = 0;
    double d1 = 0.0, d2 = 0.0;
    hs >> magic >> channels >> nh >> nw >> d1 >> d2 >> geom;
    if (!hs || magic != "FGRD")
        throw InvalidInput("malformed FGRD header: " + path.string());
    Field f(Grid2D(nh, nw, d1, d2, Geometry::from_token(geom)), channels);
    is.read(reinterpret_cast<char*>(f.data.data()),
            std::streamsize(f.data.size() * sizeof(double)));
    if (std::size_t(is.gcount()) != f.data.size() * sizeof(double))
        throw InvalidInput("truncated FGRD payload: " + path.string());
    return f;
}

/// Export each channel as <stem>_ch<k>.csv: nh rows by nw comma-separated
/// columns, full double precision.
inline void write_csv(const std::filesystem::path& dir, const std::string& stem,
                      const Field& f) {
    for (int c = 0; c < f.channels; ++c) {
        const auto path = dir / (stem + "_ch" + std::to_string(c) + ".csv");
        std::ofstream os(path);
        if (!os) throw InvalidInput("cannot open for writing: " + path.string());
        for (int i = 0; i < f.grid.nh; ++i) {
            for (int j = 0; j < f.grid.nw; ++j) {
                if (j) os << ',';
                os << detail::fmt_double(f.at(c, i, j));
            }
            os << '\n';
        }
    }
}

} // namespace convpinn
