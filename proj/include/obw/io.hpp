#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "obw/geometry.hpp"
#include "obw/wigner.hpp"

namespace obw {

inline constexpr const char* kVersion = "0.1.0";

/// All numeric text output uses 17 significant digits, which round-trips
/// IEEE-754 doubles exactly and is locale independent.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("malformed number: '" + s + "'");
    return v;
}

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// key = value configuration files ('#' starts a comment)
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw IoError(path + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw IoError(path + ": duplicate key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

// ---------------------------------------------------------------------------
// grid dumps: <base>.hdr text sidecar + <base>.bin raw little-endian doubles
// ---------------------------------------------------------------------------

struct DumpAxis {
    std::string name;
    int n = 0;
    double min = 0.0;
    double step = 0.0;
};

struct GridDump {
    std::vector<DumpAxis> axes;
    std::map<std::string, double> scalars;  // free-form metadata (k, theta, ...)
    std::vector<double> data;               // row-major in axis order
};

inline void write_dump(const std::string& base, const GridDump& d) {
    std::size_t expect = 1;
    for (const auto& ax : d.axes) expect *= static_cast<std::size_t>(ax.n);
    if (expect != d.data.size())
        throw IoError("write_dump: shape/product mismatch with payload length");
    {
        std::ofstream h(base + ".hdr");
        if (!h) throw IoError("write_dump: cannot open " + base + ".hdr");
        h << "format = obw-grid-dump/1\n";
        h << "producer = obw " << kVersion << "\n";
        h << "dtype = f64le\n";
        h << "order = row-major\n";
        h << "axes = " << d.axes.size() << "\n";
        for (std::size_t i = 0; i < d.axes.size(); ++i) {
            const auto& ax = d.axes[i];
            h << "axis" << i << " = " << ax.name << " " << ax.n << " " << fmt17(ax.min) << " "
              << fmt17(ax.step) << "\n";
        }
        for (const auto& [k, v] : d.scalars) h << "scalar_" << k << " = " << fmt17(v) << "\n";
    }
    std::ofstream b(base + ".bin", std::ios::binary);
    if (!b) throw IoError("write_dump: cannot open " + base + ".bin");
    b.write(reinterpret_cast<const char*>(d.data.data()),
            static_cast<std::streamsize>(d.data.size() * sizeof(double)));
    if (!b) throw IoError("write_dump: short write on " + base + ".bin");
}

inline GridDump read_dump(const std::string& base) {
    std::ifstream h(base + ".hdr");
    if (!h) throw IoError("read_dump: cannot open " + base + ".hdr");
    GridDump d;
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(h, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b2 = s.find_first_not_of(" \t\r\n");
            if (b2 == std::string::npos) return std::string();
            const auto e2 = s.find_last_not_of(" \t\r\n");
            return s.substr(b2, e2 - b2 + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    if (kv["format"] != "obw-grid-dump/1") throw IoError("read_dump: unknown format tag");
    if (kv["dtype"] != "f64le") throw IoError("read_dump: dtype mismatch (need f64le)");
    if (kv["order"] != "row-major") throw IoError("read_dump: order mismatch");
    const int naxes = static_cast<int>(parse_double(kv.at("axes")));
    std::size_t expect = 1;
    for (int i = 0; i < naxes; ++i) {
        std::istringstream is(kv.at("axis" + std::to_string(i)));
        DumpAxis ax;
        is >> ax.name >> ax.n >> ax.min >> ax.step;
        if (!is || ax.n <= 0) throw IoError("read_dump: malformed axis" + std::to_string(i));
        expect *= static_cast<std::size_t>(ax.n);
        d.axes.push_back(ax);
    }
    for (const auto& [k, v] : kv)
        if (k.rfind("scalar_", 0) == 0) d.scalars[k.substr(7)] = parse_double(v);

    std::ifstream b(base + ".bin", std::ios::binary | std::ios::ate);
    if (!b) throw IoError("read_dump: cannot open " + base + ".bin");
    const std::size_t bytes = static_cast<std::size_t>(b.tellg());
    if (bytes != expect * sizeof(double))
        throw IoError("read_dump: payload length " + std::to_string(bytes) + " does not match header shape");
    d.data.resize(expect);
    b.seekg(0);
    b.read(reinterpret_cast<char*>(d.data.data()), static_cast<std::streamsize>(bytes));
    if (!b) throw IoError("read_dump: short read");
    return d;
}

// ---------------------------------------------------------------------------
// conversions between dumps and in-memory objects
// ---------------------------------------------------------------------------

inline GridDump dump_from_field(const WignerField& f) {
    GridDump d;
    d.axes = {
        {"x", f.positions.nx, f.positions.x_min, f.positions.dx},
        {"y", f.positions.ny, f.positions.y_min, f.positions.dy},
        {"px", f.momenta.np_x, f.momenta.p_x(0), f.momenta.dp_x},
        {"py", f.momenta.np_y, f.momenta.p_y(0), f.momenta.dp_y},
    };
    d.scalars["raw_drift"] = f.raw_drift;
    d.data = f.values.v;
    return d;
}

inline WignerField field_from_dump(const GridDump& d) {
    if (d.axes.size() != 4 || d.axes[0].name != "x" || d.axes[1].name != "y" ||
        d.axes[2].name != "px" || d.axes[3].name != "py")
        throw IoError("field_from_dump: expected axes x y px py");
    WignerField f;
    f.positions = Grid2D(d.axes[0].min, d.axes[1].min, d.axes[0].step, d.axes[1].step,
                         d.axes[0].n, d.axes[1].n);
    const double cx = d.axes[2].min + (d.axes[2].n / 2) * d.axes[2].step;
    const double cy = d.axes[3].min + (d.axes[3].n / 2) * d.axes[3].step;
    if (std::abs(cx) > 1e-9 * d.axes[2].step || std::abs(cy) > 1e-9 * d.axes[3].step)
        throw IoError("field_from_dump: momentum axes must be centered on zero");
    f.momenta = MomentumGrid(d.axes[2].n, d.axes[3].n, d.axes[2].step, d.axes[3].step);
    f.values = Array4D(d.axes[0].n, d.axes[1].n, d.axes[2].n, d.axes[3].n);
    f.values.v = d.data;
    if (auto it = d.scalars.find("raw_drift"); it != d.scalars.end()) f.raw_drift = it->second;
    return f;
}

inline GridDump dump_from_mode(const EigenMode& m) {
    GridDump d;
    d.axes = {
        {"x", m.grid.nx, m.grid.x_min, m.grid.dx},
        {"y", m.grid.ny, m.grid.y_min, m.grid.dy},
    };
    d.scalars["k"] = m.k;
    d.scalars["a"] = m.shape.a;
    d.scalars["b"] = m.shape.b;
    d.scalars["theta"] = m.shape.theta;
    d.scalars["residual"] = m.residual;
    d.data = m.psi;
    return d;
}

inline EigenMode mode_from_dump(const GridDump& d) {
    if (d.axes.size() != 2 || d.axes[0].name != "x" || d.axes[1].name != "y")
        throw IoError("mode_from_dump: expected axes x y");
    EigenMode m;
    m.grid = Grid2D(d.axes[0].min, d.axes[1].min, d.axes[0].step, d.axes[1].step,
                    d.axes[0].n, d.axes[1].n);
    m.k = d.scalars.at("k");
    m.shape = OvalShape(d.scalars.at("a"), d.scalars.at("b"), d.scalars.at("theta"));
    if (auto it = d.scalars.find("residual"); it != d.scalars.end()) m.residual = it->second;
    m.psi = d.data;
    return m;
}

}  // namespace obw
