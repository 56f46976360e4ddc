#ifndef PZSRC_MOMENTS_HPP
#define PZSRC_MOMENTS_HPP

#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "pzsrc/errors.hpp"
#include "pzsrc/geometry.hpp"
#include "pzsrc/imaging.hpp"
#include "pzsrc/io.hpp"

namespace pzsrc {

/// Degree/frequency pair of a pseudo-Zernike polynomial, |m| <= n.
struct PZIndex {
    int n = 0;
    int m = 0;
};

/// Coefficient magnitudes grow factorially with the degree; beyond this cap
/// they can no longer be trusted in double precision.
inline constexpr int kMaxDegree = 25;

/// Index list in basis-row order: n ascending, m from -n to +n within each
/// degree. Length is (n_max + 1)^2.
inline std::vector<PZIndex> pz_index_list(int n_max) {
    if (n_max < 0) throw config_error("n_max must be nonnegative");
    std::vector<PZIndex> out;
    out.reserve(static_cast<std::size_t>(n_max + 1) * (n_max + 1));
    for (int n = 0; n <= n_max; ++n)
        for (int m = -n; m <= n; ++m)
            out.push_back({n, m});
    return out;
}

namespace detail {

inline __int128 binomial_i128(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    __int128 result = 1;
    for (int i = 1; i <= k; ++i) {
        result *= (n - k + i);
        result /= i; // exact at every step
    }
    return result;
}

} // namespace detail

/// Coefficients of the radial polynomial in descending powers of r:
/// rho_n^m(r) = sum_k coeffs[k] * r^(n-k), k = 0..n-|m|. Each coefficient is
/// the exact integer (-1)^k * C(2n+1-k, k) * C(2n+1-2k, n-|m|-k), built with
/// integer arithmetic and converted to double once.
inline std::vector<double> radial_poly_coefficients(int n, int m) {
    const int m_abs = std::abs(m);
    if (n < 0 || m_abs > n) throw config_error("radial polynomial requires |m| <= n");
    if (n > kMaxDegree) throw config_error("polynomial degree exceeds the stability cap of 25");
    std::vector<double> coeffs(static_cast<std::size_t>(n - m_abs) + 1);
    for (int k = 0; k <= n - m_abs; ++k) {
        const __int128 c =
            detail::binomial_i128(2 * n + 1 - k, k) * detail::binomial_i128(2 * n + 1 - 2 * k, n - m_abs - k);
        coeffs[k] = (k % 2 == 0) ? static_cast<double>(c) : -static_cast<double>(c);
    }
    return coeffs;
}

inline double radial_poly_eval(const std::vector<double>& coeffs, int m_abs, double r) {
    double acc = 0.0;
    for (double c : coeffs) acc = acc * r + c;
    for (int i = 0; i < m_abs; ++i) acc *= r;
    return acc;
}

/// rho_n^m(r); depends on m only through |m|.
inline double radial_poly(int n, int m, double r) {
    if (r < 0.0 || r > 1.0) throw config_error("radial polynomial argument must lie in [0, 1]");
    return radial_poly_eval(radial_poly_coefficients(n, m), std::abs(m), r);
}

/// z_n^m(r, theta) = rho_n^m(r) * exp(j m theta).
inline std::complex<double> pz_poly(int n, int m, double r, double theta) {
    const double rho = radial_poly(n, m, r);
    return std::polar(rho, m * theta);
}

/// Sampled basis matrix Z: row i holds gamma_n * z_n^m over all pixels,
/// gamma_n = (n+1)/(pi N). Rows follow pz_index_list order, columns the
/// column-major pixel order of the geometry.
struct PZBasis {
    int n_max = 0;
    int side = 0;
    std::vector<PZIndex> indices;
    DiskGeometry geometry;
    Eigen::MatrixXcd values;

    int P() const { return static_cast<int>(values.rows()); }
    int N() const { return static_cast<int>(values.cols()); }
};

inline PZBasis build_basis(int n_max, const DiskGeometry& geometry) {
    if (n_max < 0) throw config_error("n_max must be nonnegative");
    if (n_max > kMaxDegree) throw config_error("n_max exceeds the stability cap of 25");

    PZBasis basis;
    basis.n_max = n_max;
    basis.side = geometry.side;
    basis.indices = pz_index_list(n_max);
    basis.geometry = geometry;

    const int P = static_cast<int>(basis.indices.size());
    const int N = geometry.pixel_count();
    basis.values.resize(P, N);

    // Coefficient tables per (n, |m|), indexed n*(n+1)/2 + |m|.
    std::vector<std::vector<double>> coeffs(static_cast<std::size_t>(n_max + 1) * (n_max + 2) / 2);
    for (int n = 0; n <= n_max; ++n)
        for (int m = 0; m <= n; ++m)
            coeffs[static_cast<std::size_t>(n) * (n + 1) / 2 + m] = radial_poly_coefficients(n, m);

    std::vector<double> gamma(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) gamma[n] = (n + 1) / (M_PI * N);

    std::vector<std::complex<double>> expo(static_cast<std::size_t>(n_max) + 1);
    std::vector<double> rho(static_cast<std::size_t>(n_max) + 1);
    for (int j = 0; j < N; ++j) {
        const double r = geometry.r[j];
        const double theta = geometry.theta[j];
        expo[0] = {1.0, 0.0};
        if (n_max >= 1) {
            const std::complex<double> e1 = std::polar(1.0, theta);
            for (int m = 1; m <= n_max; ++m) expo[m] = expo[m - 1] * e1;
        }
        int row = 0;
        for (int n = 0; n <= n_max; ++n) {
            for (int m = 0; m <= n; ++m)
                rho[m] = radial_poly_eval(coeffs[static_cast<std::size_t>(n) * (n + 1) / 2 + m], m, r);
            for (int m = -n; m <= n; ++m, ++row) {
                const int ma = std::abs(m);
                const std::complex<double> phase = (m >= 0) ? expo[ma] : std::conj(expo[ma]);
                basis.values(row, j) = gamma[n] * rho[ma] * phase;
            }
        }
    }
    return basis;
}

/// PZ moments of a vectorized image: conj(Z) * s. The summation constant is
/// carried by gamma_n inside the basis.
inline Eigen::VectorXcd project_moments(const PZBasis& basis, const Eigen::VectorXd& image_vector) {
    if (image_vector.size() != basis.values.cols())
        throw data_error("image vector length does not match basis pixel count");
    return basis.values.conjugate() * image_vector;
}

/// Rotation-invariant features |a_n^m|.
inline Eigen::VectorXd magnitude_moments(const PZBasis& basis, const Eigen::VectorXd& image_vector) {
    return project_moments(basis, image_vector).cwiseAbs();
}

/// Discrete check of the unit-disk orthogonality relation. The polynomials
/// (without gamma_n) are sampled on a grid of the image pixel pitch
/// sqrt(2)/side extended to cover the whole unit disk; inner products are
/// scaled by the pixel area 2/side^2 and each entry by the continuum
/// normalizer sqrt(pi/(n+1) * pi/(n'+1)). The result approaches the identity
/// as side grows.
inline Eigen::MatrixXcd orthogonality_gram(int n_max, int side) {
    if (n_max < 0 || n_max > kMaxDegree) throw config_error("invalid n_max");
    if (side < 2) throw config_error("side must be >= 2");
    const double h = pixel_pitch(side);
    const int m_span = static_cast<int>(std::ceil(1.0 / h));

    std::vector<double> rs, thetas;
    for (int ky = -m_span; ky < m_span; ++ky) {
        for (int kx = -m_span; kx < m_span; ++kx) {
            const double x = (kx + 0.5) * h;
            const double y = (ky + 0.5) * h;
            const double r = std::sqrt(x * x + y * y);
            if (r <= 1.0) {
                rs.push_back(r);
                thetas.push_back(std::atan2(y, x));
            }
        }
    }

    const auto indices = pz_index_list(n_max);
    const int P = static_cast<int>(indices.size());
    const int M = static_cast<int>(rs.size());
    Eigen::MatrixXcd samples(P, M);
    for (int j = 0; j < M; ++j)
        for (int i = 0; i < P; ++i)
            samples(i, j) = pz_poly(indices[i].n, indices[i].m, rs[j], thetas[j]);

    Eigen::MatrixXcd gram = samples * samples.adjoint();
    gram *= h * h;
    for (int i = 0; i < P; ++i) {
        for (int j = 0; j < P; ++j) {
            const double norm_i = M_PI / (indices[i].n + 1);
            const double norm_j = M_PI / (indices[j].n + 1);
            gram(i, j) /= std::sqrt(norm_i * norm_j);
        }
    }
    return gram;
}

// ---------------------------------------------------------------------------
// Basis file format: "PZB1", n_max, side, P, N (u32 each), then P*N complex
// entries as float64 (re, im) pairs, row-major.
// ---------------------------------------------------------------------------

inline void save_basis(const PZBasis& basis, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    io::write_magic(out, "PZB1");
    io::write_u32(out, static_cast<std::uint32_t>(basis.n_max));
    io::write_u32(out, static_cast<std::uint32_t>(basis.side));
    io::write_u32(out, static_cast<std::uint32_t>(basis.P()));
    io::write_u32(out, static_cast<std::uint32_t>(basis.N()));
    std::vector<double> row(static_cast<std::size_t>(basis.N()) * 2);
    for (int i = 0; i < basis.P(); ++i) {
        for (int j = 0; j < basis.N(); ++j) {
            row[2 * static_cast<std::size_t>(j)] = basis.values(i, j).real();
            row[2 * static_cast<std::size_t>(j) + 1] = basis.values(i, j).imag();
        }
        io::write_f64_block(out, row.data(), row.size());
    }
    if (!out) throw data_error("write failed: " + path.string());
}

inline PZBasis load_basis(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    io::expect_magic(in, "PZB1", path.string());
    const int n_max = static_cast<int>(io::read_u32(in));
    const int side = static_cast<int>(io::read_u32(in));
    const int P = static_cast<int>(io::read_u32(in));
    const int N = static_cast<int>(io::read_u32(in));
    if (n_max < 0 || n_max > kMaxDegree || P != (n_max + 1) * (n_max + 1) || N != side * side)
        throw data_error("inconsistent basis header in " + path.string());
    PZBasis basis;
    basis.n_max = n_max;
    basis.side = side;
    basis.indices = pz_index_list(n_max);
    basis.geometry = build_disk_geometry(side);
    basis.values.resize(P, N);
    std::vector<double> row(static_cast<std::size_t>(N) * 2);
    for (int i = 0; i < P; ++i) {
        io::read_f64_block(in, row.data(), row.size());
        for (int j = 0; j < N; ++j)
            basis.values(i, j) = {row[2 * static_cast<std::size_t>(j)],
                                  row[2 * static_cast<std::size_t>(j) + 1]};
    }
    return basis;
}

} // namespace pzsrc

#endif
