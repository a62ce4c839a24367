#include "mrnls/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mrnls {

namespace {

constexpr char kMagic[8] = {'M', 'R', 'N', 'L', 'S', 'F', '1', '\0'};

template <class T>
void put(std::ofstream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw std::runtime_error("load_state: truncated file");
    return value;
}

}  // namespace

void save_state(const StatePair& pair, const std::string& path) {
    check_pair(pair);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_state: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(pair.grid->kind));
    put<std::int32_t>(os, pair.grid->n);
    put<double>(os, pair.grid->extent);
    put<std::int32_t>(os, pair.grid->dims);
    put<double>(os, pair.t);
    put<double>(os, pair.kappa);
    const std::size_t np = pair.grid->npoints();
    os.write(reinterpret_cast<const char*>(pair.u.data()),
             static_cast<std::streamsize>(np * sizeof(cplx)));
    os.write(reinterpret_cast<const char*>(pair.v.data()),
             static_cast<std::streamsize>(np * sizeof(cplx)));
    if (!os) throw std::runtime_error("save_state: write failed for " + path);
}

StatePair load_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_state: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("load_state: bad magic in " + path);
    }
    const auto kind = static_cast<GridKind>(get<std::uint8_t>(is));
    const int n = get<std::int32_t>(is);
    const double extent = get<double>(is);
    const int dims = get<std::int32_t>(is);
    const double t = get<double>(is);
    const double kappa = get<double>(is);
    StatePair pair = make_state(make_grid_shared(kind, n, extent, dims), kappa);
    pair.t = t;
    const std::size_t np = pair.grid->npoints();
    is.read(reinterpret_cast<char*>(pair.u.data()),
            static_cast<std::streamsize>(np * sizeof(cplx)));
    is.read(reinterpret_cast<char*>(pair.v.data()),
            static_cast<std::streamsize>(np * sizeof(cplx)));
    if (!is) throw std::runtime_error("load_state: truncated field data in " + path);
    check_pair(pair);
    return pair;
}

void write_state_csv(const StatePair& pair, const std::string& path) {
    check_pair(pair);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_state_csv: cannot open " + path);
    const Grid& g = *pair.grid;
    const bool two_coords = (g.kind == GridKind::cartesian && g.dims == 2);
    if (g.kind == GridKind::radial4d) {
        os << "r,re_u,im_u,re_v,im_v\n";
    } else if (two_coords) {
        os << "x,y,re_u,im_u,re_v,im_v\n";
    } else {
        os << "x,re_u,im_u,re_v,im_v\n";
    }
    char buf[256];
    const std::size_t np = g.npoints();
    for (std::size_t i = 0; i < np; ++i) {
        const auto x = g.coord(i);
        if (two_coords) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", x[0], x[1],
                          pair.u[i].real(), pair.u[i].imag(), pair.v[i].real(), pair.v[i].imag());
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", x[0],
                          pair.u[i].real(), pair.u[i].imag(), pair.v[i].real(), pair.v[i].imag());
        }
        os << buf;
    }
    if (!os) throw std::runtime_error("write_state_csv: write failed for " + path);
}

}  // namespace mrnls
