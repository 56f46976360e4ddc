#ifndef PZSRC_SPARSE_HPP
#define PZSRC_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "pzsrc/csv.hpp"
#include "pzsrc/dictionary.hpp"
#include "pzsrc/errors.hpp"

namespace pzsrc {

/// Gamma-sparse estimate together with its convergence trace. The residual
/// history holds ||y - Phi x||^2 / ||y||^2 after every iteration.
struct SparseCode {
    Eigen::VectorXd coefficients;
    std::vector<int> support; // ascending indices of the nonzeros
    int iterations = 0;
    std::vector<double> residual_history;

    double final_residual() const {
        return residual_history.empty() ? 1.0 : residual_history.back();
    }
};

struct IhtConfig {
    enum class Step { unit, spectral };

    int gamma = 5;
    int max_iters = 300;
    double residual_tol = 1e-6;
    Step step = Step::spectral;
};

inline IhtConfig::Step step_policy_from_name(const std::string& name) {
    if (name == "unit") return IhtConfig::Step::unit;
    if (name == "spectral") return IhtConfig::Step::spectral;
    throw config_error("unknown step policy: " + name);
}

inline std::string step_policy_name(IhtConfig::Step step) {
    return step == IhtConfig::Step::unit ? "unit" : "spectral";
}

/// Keeps the gamma entries of largest magnitude and zeroes the rest; ties
/// are broken toward the lowest index.
inline Eigen::VectorXd hard_threshold(const Eigen::VectorXd& q, int gamma) {
    if (gamma < 0) throw config_error("gamma must be nonnegative");
    const int n = static_cast<int>(q.size());
    if (gamma >= n) return q;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (gamma == 0) return out;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + gamma, order.end(), [&](int a, int b) {
        const double ma = std::abs(q[a]);
        const double mb = std::abs(q[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    for (int i = 0; i < gamma; ++i) out[order[i]] = q[order[i]];
    return out;
}

namespace detail {

inline std::vector<int> nonzero_indices(const Eigen::VectorXd& x) {
    std::vector<int> support;
    for (int i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) support.push_back(i);
    return support;
}

} // namespace detail

/// Largest singular value over blocks of `support_size` consecutive columns.
/// The iterates of a gamma-sparse IHT run only ever touch small column
/// subsets, so this restricted norm is the quantity its step size must
/// dominate; consecutive columns are the most coherent subsets in the
/// angle-ordered dictionaries built here, making the block maximum a
/// conservative surrogate for the true restricted norm.
inline double restricted_sigma_estimate(const Eigen::MatrixXd& matrix, int support_size,
                                        int iterations = 20) {
    const int Q = static_cast<int>(matrix.cols());
    const int s = std::min(std::max(support_size, 1), Q);
    double worst = 0.0;
    for (int start = 0; start < Q; start += s) {
        const int count = std::min(s, Q - start);
        const auto block = matrix.middleCols(start, count);
        Eigen::VectorXd v = Eigen::VectorXd::Ones(matrix.rows()).normalized();
        for (int i = 0; i < iterations; ++i) {
            Eigen::VectorXd w = block * (block.transpose() * v);
            const double norm = w.norm();
            if (norm == 0.0) break;
            v = w / norm;
        }
        worst = std::max(worst, (block.transpose() * v).norm());
    }
    return worst;
}

/// Iterative hard thresholding: x <- H_gamma(x + mu * Phi^T (y - Phi x)),
/// starting from x = 0. Under the `spectral` policy the gradient is scaled
/// by the inverse squared restricted spectral norm at 3*gamma columns
/// (the global 1/sigma_max^2 step is far too damped on over-complete
/// dictionaries and stalls on wrong supports); `unit` runs the plain
/// recursion with mu = 1. Stops at max_iters or when the relative residual
/// drops to residual_tol.
inline SparseCode iht_encode(const Dictionary& dict, const Eigen::VectorXd& y, const IhtConfig& cfg) {
    if (y.size() != dict.P()) throw data_error("test vector length does not match dictionary P");
    if (!y.allFinite()) throw numeric_error("non-finite entries in test vector");
    if (cfg.gamma < 1) throw config_error("gamma must be >= 1");
    if (cfg.max_iters < 1) throw config_error("max_iters must be >= 1");
    if (cfg.residual_tol < 0.0) throw config_error("residual_tol must be >= 0");

    double mu = 1.0;
    if (cfg.step == IhtConfig::Step::spectral) {
        const double sigma_r = restricted_sigma_estimate(dict.matrix, 3 * cfg.gamma);
        if (sigma_r <= 0.0) throw numeric_error("dictionary spectral norm is not positive");
        mu = 0.98 / (sigma_r * sigma_r);
    }

    SparseCode code;
    code.coefficients = Eigen::VectorXd::Zero(dict.Q());

    const double y_norm2 = y.squaredNorm();
    if (y_norm2 == 0.0) {
        code.iterations = 1;
        code.residual_history.push_back(0.0);
        return code;
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(dict.Q());
    Eigen::VectorXd residual = y;
    for (int t = 0; t < cfg.max_iters; ++t) {
        x = hard_threshold(x + mu * (dict.matrix.transpose() * residual), cfg.gamma);
        residual = y - dict.matrix * x;
        const double rel = residual.squaredNorm() / y_norm2;
        if (!std::isfinite(rel)) throw numeric_error("IHT iterate diverged to non-finite values");
        code.residual_history.push_back(rel);
        if (rel <= cfg.residual_tol) break;
    }
    code.iterations = static_cast<int>(code.residual_history.size());
    code.coefficients = x;
    code.support = detail::nonzero_indices(x);
    return code;
}

/// Convergence diagnostics: one row per iteration with the relative residual.
inline void write_residual_history_csv(const SparseCode& code, const std::filesystem::path& path) {
    csv::Writer out(path);
    out.row({"iteration", "relative_residual"});
    for (std::size_t t = 0; t < code.residual_history.size(); ++t)
        out.row({std::to_string(t + 1), csv::format_double(code.residual_history[t])});
}

namespace detail {

inline double combination_count(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c *= static_cast<double>(n - k + i) / i;
    return c;
}

} // namespace detail

/// Exact l0-constrained least squares by support enumeration; intended as a
/// small-scale oracle. Tries every support of size <= gamma, solves the
/// restricted least-squares problem, and returns the global minimizer (ties
/// resolved toward the lexicographically first support).
inline SparseCode exhaustive_l0(const Dictionary& dict, const Eigen::VectorXd& y, int gamma) {
    if (y.size() != dict.P()) throw data_error("test vector length does not match dictionary P");
    if (gamma < 0) throw config_error("gamma must be nonnegative");
    const int Q = dict.Q();
    gamma = std::min(gamma, Q);
    if (detail::combination_count(Q, gamma) > 1e6)
        throw config_error("support enumeration too large: C(Q, gamma) exceeds 1e6");

    const double y_norm2 = y.squaredNorm();
    SparseCode best;
    best.coefficients = Eigen::VectorXd::Zero(Q);
    double best_res = y_norm2;

    Eigen::MatrixXd cols(dict.P(), std::max(gamma, 1));
    for (int g = 1; g <= gamma; ++g) {
        std::vector<int> support(g);
        std::iota(support.begin(), support.end(), 0);
        while (true) {
            for (int i = 0; i < g; ++i) cols.col(i) = dict.matrix.col(support[i]);
            const auto block = cols.leftCols(g);
            Eigen::VectorXd coef = block.colPivHouseholderQr().solve(y);
            const double res = (y - block * coef).squaredNorm();
            if (res < best_res) {
                best_res = res;
                best.coefficients.setZero();
                for (int i = 0; i < g; ++i) best.coefficients[support[i]] = coef[i];
                best.support = support;
            }
            // next combination in lexicographic order
            int i = g - 1;
            while (i >= 0 && support[i] == Q - g + i) --i;
            if (i < 0) break;
            ++support[i];
            for (int j = i + 1; j < g; ++j) support[j] = support[j - 1] + 1;
        }
    }
    best.iterations = 0;
    best.support = detail::nonzero_indices(best.coefficients);
    best.residual_history.push_back(y_norm2 == 0.0 ? 0.0 : best_res / y_norm2);
    return best;
}

} // namespace pzsrc

#endif
