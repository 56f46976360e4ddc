#ifndef PZSRC_GEOMETRY_HPP
#define PZSRC_GEOMETRY_HPP

#include <cmath>
#include <vector>

#include "pzsrc/errors.hpp"

namespace pzsrc {

/// Polar/Cartesian coordinates of every pixel center after mapping the
/// square image into the unit disk. The whole square is placed inside the
/// disk (corners land at r = (side-1)/side < 1), so every sample satisfies
/// r <= 1. Index order is column-major (column outer, row inner) to match
/// image vectorization.
struct DiskGeometry {
    int side = 0;
    std::vector<double> x, y, r, theta;

    int pixel_count() const { return side * side; }
    int index(int row, int col) const { return col * side + row; }
};

inline DiskGeometry build_disk_geometry(int side) {
    if (side < 2) throw config_error("disk geometry requires side >= 2");
    DiskGeometry g;
    g.side = side;
    const int n = side * side;
    g.x.resize(n);
    g.y.resize(n);
    g.r.resize(n);
    g.theta.resize(n);
    const double scale = 1.0 / (static_cast<double>(side) * std::sqrt(2.0));
    for (int col = 0; col < side; ++col) {
        for (int row = 0; row < side; ++row) {
            const int j = g.index(row, col);
            const double px = (2.0 * col - side + 1) * scale;
            const double py = (side - 1 - 2.0 * row) * scale;
            g.x[j] = px;
            g.y[j] = py;
            g.r[j] = std::sqrt(px * px + py * py);
            g.theta[j] = (g.r[j] == 0.0) ? 0.0 : std::atan2(py, px);
        }
    }
    return g;
}

/// Pixel pitch in disk units; the per-pixel area element is pitch^2 = 2/side^2.
inline double pixel_pitch(int side) {
    return std::sqrt(2.0) / static_cast<double>(side);
}

} // namespace pzsrc

#endif
