#ifndef PZSRC_IMAGING_HPP
#define PZSRC_IMAGING_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pzsrc/errors.hpp"
#include "pzsrc/geometry.hpp"
#include "pzsrc/io.hpp"

namespace pzsrc {

/// Square grid of nonnegative intensities, row-major storage.
struct RealImage {
    int side = 0;
    std::vector<double> pixels;

    RealImage() = default;
    RealImage(int side_, double fill = 0.0)
        : side(side_), pixels(static_cast<std::size_t>(side_) * side_, fill) {}

    double& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * side + col]; }
    double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * side + col]; }

    void validate() const {
        if (side < 2) throw data_error("real image side must be >= 2");
        for (double v : pixels) {
            if (!std::isfinite(v)) throw numeric_error("non-finite pixel in real image");
            if (v < 0.0) throw data_error("negative pixel in real image");
        }
    }
};

/// Square grid of complex radar samples, row-major storage.
struct ComplexImage {
    int side = 0;
    std::vector<std::complex<double>> pixels;

    ComplexImage() = default;
    explicit ComplexImage(int side_)
        : side(side_), pixels(static_cast<std::size_t>(side_) * side_) {}

    std::complex<double>& at(int row, int col) {
        return pixels[static_cast<std::size_t>(row) * side + col];
    }
    std::complex<double> at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * side + col];
    }

    void validate() const {
        if (side < 2) throw data_error("complex image side must be >= 2");
        for (const auto& v : pixels)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw numeric_error("non-finite pixel in complex image");
    }
};

/// Lexicographically ordered image vector; `norm` records the l2 norm seen
/// at vectorization time (before any unit scaling).
struct ImageVector {
    Eigen::VectorXd values;
    double norm = 0.0;
    bool unit = false;
};

inline RealImage magnitude_image(const ComplexImage& image) {
    RealImage out(image.side);
    for (std::size_t i = 0; i < image.pixels.size(); ++i)
        out.pixels[i] = std::abs(image.pixels[i]);
    return out;
}

/// Averaging fusion of magnitude and phase. Both operands are first mapped
/// into [0,1]: magnitude by the per-image maximum, phase by
/// (atan2 + pi) / (2*pi). Output pixels lie in [0,1].
inline RealImage fuse_complex(const ComplexImage& image) {
    double max_mag = 0.0;
    for (const auto& z : image.pixels) max_mag = std::max(max_mag, std::abs(z));
    if (max_mag == 0.0) throw data_error("cannot fuse an all-zero complex image");
    RealImage out(image.side);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const auto z = image.pixels[i];
        const double m = std::abs(z) / max_mag;
        const double p = (std::atan2(z.imag(), z.real()) + M_PI) / (2.0 * M_PI);
        out.pixels[i] = 0.5 * (m + p);
    }
    return out;
}

/// Regular (geometric) moment: sum_j x_j^p y_j^q s_j over the disk-mapped
/// pixel coordinates.
inline double regular_moment(const RealImage& image, const DiskGeometry& geom, int p, int q) {
    if (p < 0 || q < 0) throw config_error("regular moment orders must be nonnegative");
    if (geom.side != image.side) throw data_error("geometry/image side mismatch");
    double acc = 0.0;
    for (int col = 0; col < image.side; ++col) {
        for (int row = 0; row < image.side; ++row) {
            const int j = geom.index(row, col);
            double term = image.at(row, col);
            for (int k = 0; k < p; ++k) term *= geom.x[j];
            for (int k = 0; k < q; ++k) term *= geom.y[j];
            acc += term;
        }
    }
    return acc;
}

namespace detail {

inline double bilinear_sample(const RealImage& image, double row_f, double col_f) {
    // Zero outside the pixel support.
    if (row_f < 0.0 || col_f < 0.0 || row_f > image.side - 1 || col_f > image.side - 1)
        return 0.0;
    const int r0 = static_cast<int>(std::floor(row_f));
    const int c0 = static_cast<int>(std::floor(col_f));
    const int r1 = std::min(r0 + 1, image.side - 1);
    const int c1 = std::min(c0 + 1, image.side - 1);
    const double fr = row_f - r0;
    const double fc = col_f - c0;
    const double top = (1.0 - fc) * image.at(r0, c0) + fc * image.at(r0, c1);
    const double bot = (1.0 - fc) * image.at(r1, c0) + fc * image.at(r1, c1);
    return (1.0 - fr) * top + fr * bot;
}

} // namespace detail

/// Scale and translation normalization: resamples the image so that the
/// centroid sits on the grid center and the total mass approaches xi.
/// Out-of-support lookups read as zero.
inline RealImage normalize_scale_translation(const RealImage& image, const DiskGeometry& geom,
                                             double xi) {
    if (xi <= 0.0) throw config_error("xi must be positive");
    const double m00 = regular_moment(image, geom, 0, 0);
    if (m00 <= 0.0) throw data_error("zero-mass image cannot be normalized");
    const double mx = regular_moment(image, geom, 1, 0) / m00;
    const double my = regular_moment(image, geom, 0, 1) / m00;
    const double upsilon = std::sqrt(xi / m00);

    const int side = image.side;
    const double scale = 1.0 / (side * std::sqrt(2.0));
    RealImage out(side);
    for (int col = 0; col < side; ++col) {
        for (int row = 0; row < side; ++row) {
            const int j = geom.index(row, col);
            const double sx = geom.x[j] / upsilon + mx;
            const double sy = geom.y[j] / upsilon + my;
            const double col_f = (sx / scale + side - 1) / 2.0;
            const double row_f = (side - 1 - sy / scale) / 2.0;
            out.at(row, col) = detail::bilinear_sample(image, row_f, col_f);
        }
    }
    return out;
}

/// Column-major vectorization (column outer, row inner). With `unit` the
/// result is scaled to unit l2 norm; the pre-scaling norm is recorded.
inline ImageVector vectorize(const RealImage& image, bool unit) {
    ImageVector v;
    const int side = image.side;
    v.values.resize(static_cast<Eigen::Index>(side) * side);
    for (int col = 0; col < side; ++col)
        for (int row = 0; row < side; ++row)
            v.values[static_cast<Eigen::Index>(col) * side + row] = image.at(row, col);
    v.norm = v.values.norm();
    v.unit = unit;
    if (unit) {
        if (v.norm == 0.0) throw data_error("cannot unit-normalize a zero image");
        v.values /= v.norm;
    }
    return v;
}

/// Inverse of vectorize (without the unit scaling).
inline RealImage reshape(const Eigen::VectorXd& values, int side) {
    if (values.size() != static_cast<Eigen::Index>(side) * side)
        throw data_error("vector length does not match side^2");
    RealImage out(side);
    for (int col = 0; col < side; ++col)
        for (int row = 0; row < side; ++row)
            out.at(row, col) = values[static_cast<Eigen::Index>(col) * side + row];
    return out;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Raw real image: "PZI1", side (u32), float64 pixels row-major.
inline void save_real_image(const RealImage& image, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    io::write_magic(out, "PZI1");
    io::write_u32(out, static_cast<std::uint32_t>(image.side));
    io::write_f64_block(out, image.pixels.data(), image.pixels.size());
    if (!out) throw data_error("write failed: " + path.string());
}

inline RealImage load_real_image(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    io::expect_magic(in, "PZI1", path.string());
    RealImage image(static_cast<int>(io::read_u32(in)));
    io::read_f64_block(in, image.pixels.data(), image.pixels.size());
    image.validate();
    return image;
}

/// Raw complex image: "PZC1", side (u32), interleaved float32 (re, im) row-major.
inline void save_complex_image(const ComplexImage& image, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    io::write_magic(out, "PZC1");
    io::write_u32(out, static_cast<std::uint32_t>(image.side));
    for (const auto& z : image.pixels) {
        io::write_f32(out, static_cast<float>(z.real()));
        io::write_f32(out, static_cast<float>(z.imag()));
    }
    if (!out) throw data_error("write failed: " + path.string());
}

inline ComplexImage load_complex_image(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    io::expect_magic(in, "PZC1", path.string());
    ComplexImage image(static_cast<int>(io::read_u32(in)));
    for (auto& z : image.pixels) {
        const float re = io::read_f32(in);
        const float im = io::read_f32(in);
        z = {static_cast<double>(re), static_cast<double>(im)};
    }
    image.validate();
    return image;
}

/// Binary PGM (P5), 8-bit for maxval <= 255 and big-endian 16-bit otherwise.
inline RealImage load_pgm(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::string token;
    auto next_token = [&]() -> std::string {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') { // comment to end of line
                while (in.get(c) && c != '\n') {}
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) return t;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    if (next_token() != "P5") throw data_error("not a binary PGM: " + path.string());
    const int width = std::stoi(next_token());
    const int height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (width != height) throw data_error("PGM image must be square: " + path.string());
    if (maxval <= 0 || maxval > 65535) throw data_error("unsupported PGM maxval");
    RealImage image(width);
    if (maxval <= 255) {
        std::vector<unsigned char> buf(image.pixels.size());
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw data_error("truncated PGM: " + path.string());
        for (std::size_t i = 0; i < buf.size(); ++i) image.pixels[i] = buf[i];
    } else {
        std::vector<unsigned char> buf(image.pixels.size() * 2);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw data_error("truncated PGM: " + path.string());
        for (std::size_t i = 0; i < image.pixels.size(); ++i)
            image.pixels[i] = 256.0 * buf[2 * i] + buf[2 * i + 1];
    }
    image.validate();
    return image;
}

inline void save_pgm(const RealImage& image, const std::filesystem::path& path, int maxval = 65535) {
    if (maxval <= 0 || maxval > 65535) throw config_error("unsupported PGM maxval");
    auto out = io::open_output(path);
    out << "P5\n" << image.side << " " << image.side << "\n" << maxval << "\n";
    for (double v : image.pixels) {
        long q = std::lround(std::clamp(v, 0.0, static_cast<double>(maxval)));
        if (maxval <= 255) {
            const unsigned char b = static_cast<unsigned char>(q);
            out.write(reinterpret_cast<const char*>(&b), 1);
        } else {
            const unsigned char hi = static_cast<unsigned char>(q / 256);
            const unsigned char lo = static_cast<unsigned char>(q % 256);
            out.write(reinterpret_cast<const char*>(&hi), 1);
            out.write(reinterpret_cast<const char*>(&lo), 1);
        }
    }
    if (!out) throw data_error("write failed: " + path.string());
}

} // namespace pzsrc

#endif
