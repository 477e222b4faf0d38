#pragma once

// Field serialization: flat binary (header + float64 row-major payload),
// a JSON sidecar with metadata, and CSV export of 2D slices.

#include "qma/error.hpp"
#include "qma/grid.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>

namespace qma {

inline constexpr char kFieldMagic[8] = {'Q', 'M', 'A', 'F', 'L', 'D', '0', '1'};

/// Layout: magic[8], int32 n, int32 m, 4n x (float64 lo, float64 hi), m^{4n} float64 values.
/// The domain (if any) and `meta` go to `<path>.json`.
inline void write_field(const std::string& path, const GridField& f, const nlohmann::json& meta = {}) {
    const Grid& g = f.grid();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("write_field: cannot open " + path);
    out.write(kFieldMagic, sizeof(kFieldMagic));
    const std::int32_t n = g.n(), m = g.m();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&m), sizeof(m));
    for (int a = 0; a < g.dim(); ++a) {
        const double lo = g.lo(a), hi = g.hi(a);
        out.write(reinterpret_cast<const char*>(&lo), sizeof(lo));
        out.write(reinterpret_cast<const char*>(&hi), sizeof(hi));
    }
    out.write(reinterpret_cast<const char*>(f.values().data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
    if (!out) throw DomainError("write_field: write failed for " + path);

    nlohmann::json side{{"grid", g.to_json()},
                        {"format", "qma-field-v1"},
                        {"min", f.min_value()},
                        {"max", f.max_value()},
                        {"trace_sup", f.trace_sup_norm()}};
    if (!meta.is_null()) side["meta"] = meta;
    std::ofstream js(path + ".json");
    js << std::setw(2) << side << '\n';
}

inline GridField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("read_field: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kFieldMagic, sizeof(magic)) != 0) throw DomainError("read_field: bad magic in " + path);
    std::int32_t n = 0, m = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&m), sizeof(m));
    require(in && (n == 1 || n == 2), "read_field: bad header in " + path);
    std::vector<double> lo(static_cast<std::size_t>(4 * n)), hi(lo.size());
    for (std::size_t a = 0; a < lo.size(); ++a) {
        in.read(reinterpret_cast<char*>(&lo[a]), sizeof(double));
        in.read(reinterpret_cast<char*>(&hi[a]), sizeof(double));
    }
    std::optional<Region> domain;
    std::ifstream js(path + ".json");
    if (js) {
        const auto side = nlohmann::json::parse(js, nullptr, false);
        if (!side.is_discarded() && side.contains("grid") && side["grid"].contains("domain"))
            domain = Region::from_json(side["grid"]["domain"], 4 * n);
    }
    auto grid = std::make_shared<const Grid>(n, m, std::move(lo), std::move(hi), std::move(domain));
    std::vector<double> values(grid->size());
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw DomainError("read_field: truncated payload in " + path);
    return GridField(grid, std::move(values));
}

/// CSV rows "x_a,x_b,value" over the plane spanned by axes a and b; the other
/// coordinates sit at the grid center.
inline void write_csv_slice(const std::string& path, const GridField& f, int axis_a = 0, int axis_b = 1) {
    const Grid& g = f.grid();
    require(axis_a != axis_b && axis_a >= 0 && axis_b >= 0 && axis_a < g.dim() && axis_b < g.dim(),
            "write_csv_slice: bad axes");
    std::ofstream out(path);
    if (!out) throw DomainError("write_csv_slice: cannot open " + path);
    out << std::setprecision(17) << "x" << axis_a << ",x" << axis_b << ",value\n";
    const std::size_t c = g.center();
    const int half = g.m() / 2;
    for (int i = 0; i < g.m(); ++i)
        for (int j = 0; j < g.m(); ++j) {
            const std::size_t node = c + static_cast<std::size_t>(i - half) * g.stride(axis_a) +
                                     static_cast<std::size_t>(j - half) * g.stride(axis_b);
            out << g.coord(node, axis_a) << ',' << g.coord(node, axis_b) << ',' << f[node] << '\n';
        }
}

} // namespace qma
