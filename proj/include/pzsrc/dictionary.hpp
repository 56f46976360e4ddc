#ifndef PZSRC_DICTIONARY_HPP
#define PZSRC_DICTIONARY_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pzsrc/errors.hpp"
#include "pzsrc/imaging.hpp"
#include "pzsrc/io.hpp"
#include "pzsrc/moments.hpp"

namespace pzsrc {

/// Per-class block of unit-norm PZ-moment magnitude atoms. Columns follow
/// the training measurement order; `angles` (when known) holds the aspect
/// angle of each column and must be nondecreasing.
struct ClassSubdict {
    std::string class_id;
    Eigen::MatrixXd atoms;      // P x J_k, unit columns, entries >= 0
    std::vector<double> angles; // empty or size J_k

    int P() const { return static_cast<int>(atoms.rows()); }
    int J() const { return static_cast<int>(atoms.cols()); }
};

inline ClassSubdict build_subdict(const PZBasis& basis, const std::vector<ImageVector>& measurements,
                                  const std::string& class_id, std::vector<double> angles = {}) {
    if (measurements.empty()) throw data_error("class '" + class_id + "' has no training measurements");
    if (!angles.empty() && angles.size() != measurements.size())
        throw data_error("angle list length does not match measurement count");
    ClassSubdict sub;
    sub.class_id = class_id;
    sub.angles = std::move(angles);
    sub.atoms.resize(basis.P(), static_cast<Eigen::Index>(measurements.size()));
    for (std::size_t j = 0; j < measurements.size(); ++j) {
        Eigen::VectorXd mags = magnitude_moments(basis, measurements[j].values);
        const double norm = mags.norm();
        if (norm == 0.0)
            throw data_error("degenerate measurement (zero moment vector) in class '" + class_id + "'");
        sub.atoms.col(static_cast<Eigen::Index>(j)) = mags / norm;
    }
    return sub;
}

/// Class average atom: sum of all columns, unit-normalized. L_k = 1.
inline Eigen::VectorXd aux_fix(const ClassSubdict& subdict) {
    if (subdict.J() < 1) throw data_error("aux_fix requires at least one atom");
    Eigen::VectorXd sum = subdict.atoms.rowwise().sum();
    const double norm = sum.norm();
    if (norm == 0.0) throw data_error("aux_fix produced a zero atom");
    return sum / norm;
}

/// Moving-average atoms: column j sums the window j-floor(W/2) .. j+floor(W/2)
/// with zero padding at the class boundaries (or wraparound in circular
/// mode), unit-normalized. L_k = J_k. Columns must already be in increasing
/// aspect-angle order.
inline Eigen::MatrixXd aux_mov(const ClassSubdict& subdict, int window, bool circular = false) {
    if (window < 1) throw config_error("moving-average window must be >= 1");
    if (!subdict.angles.empty())
        for (std::size_t i = 1; i < subdict.angles.size(); ++i)
            if (subdict.angles[i] < subdict.angles[i - 1])
                throw data_error("aux_mov requires columns ordered by increasing aspect angle");
    const int J = subdict.J();
    const int half = window / 2;
    Eigen::MatrixXd out(subdict.P(), J);
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(subdict.P());
        for (int w = -half; w <= half; ++w) {
            int idx = j + w;
            if (circular) {
                idx = ((idx % J) + J) % J;
            } else if (idx < 0 || idx >= J) {
                continue;
            }
            sum += subdict.atoms.col(idx);
        }
        const double norm = sum.norm();
        if (norm == 0.0) throw data_error("aux_mov produced a zero atom");
        out.col(j) = sum / norm;
    }
    return out;
}

/// Correlation-neighborhood atoms: column j sums every column whose inner
/// product with column j exceeds upsilon (the self term always qualifies),
/// unit-normalized. L_k = J_k.
inline Eigen::MatrixXd aux_corr(const ClassSubdict& subdict, double upsilon) {
    if (upsilon <= 0.0 || upsilon >= 1.0) throw config_error("upsilon must lie in (0, 1)");
    const int J = subdict.J();
    const Eigen::MatrixXd gram = subdict.atoms.transpose() * subdict.atoms;
    Eigen::MatrixXd out(subdict.P(), J);
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(subdict.P());
        for (int l = 0; l < J; ++l)
            if (gram(j, l) > upsilon) sum += subdict.atoms.col(l);
        const double norm = sum.norm();
        if (norm == 0.0) throw data_error("aux_corr produced a zero atom");
        out.col(j) = sum / norm;
    }
    return out;
}

enum class AuxScheme : std::uint8_t { none = 0, fix = 1, mov = 2, corr = 3 };

struct AuxPolicy {
    AuxScheme scheme = AuxScheme::none;
    int window = 0;        // AuxMov
    double upsilon = 0.0;  // AuxCorr
    bool circular = false; // AuxMov extension, off by default
};

inline std::string aux_scheme_name(AuxScheme s) {
    switch (s) {
        case AuxScheme::none: return "none";
        case AuxScheme::fix: return "fix";
        case AuxScheme::mov: return "mov";
        case AuxScheme::corr: return "corr";
    }
    return "none";
}

inline AuxScheme aux_scheme_from_name(const std::string& name) {
    if (name == "none") return AuxScheme::none;
    if (name == "fix") return AuxScheme::fix;
    if (name == "mov") return AuxScheme::mov;
    if (name == "corr") return AuxScheme::corr;
    throw config_error("unknown aux scheme: " + name);
}

/// Column layout of one class inside the assembled dictionary.
struct ClassRange {
    std::string class_id;
    int primary_begin = 0;
    int primary_count = 0;
    int aux_begin = 0;
    int aux_count = 0;

    int begin() const { return primary_begin; }
    int count() const { return primary_count + aux_count; }
};

/// Over-complete dictionary Phi = [[A1, f(A1)], [A2, f(A2)], ...] with unit
/// columns. sigma_max (largest singular value) is estimated once at assembly
/// and reused by the spectral IHT step.
struct Dictionary {
    std::vector<ClassRange> classes;
    Eigen::MatrixXd matrix; // P x Q
    AuxPolicy aux;
    double sigma_max = 0.0;

    int P() const { return static_cast<int>(matrix.rows()); }
    int Q() const { return static_cast<int>(matrix.cols()); }
    int K() const { return static_cast<int>(classes.size()); }

    int class_index(const std::string& id) const {
        for (std::size_t k = 0; k < classes.size(); ++k)
            if (classes[k].class_id == id) return static_cast<int>(k);
        return -1;
    }
};

inline double estimate_sigma_max(const Eigen::MatrixXd& matrix, int iterations = 100) {
    if (matrix.size() == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(matrix.rows()).normalized();
    for (int i = 0; i < iterations; ++i) {
        Eigen::VectorXd w = matrix * (matrix.transpose() * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
    }
    return (matrix.transpose() * v).norm();
}

inline Eigen::MatrixXd make_aux_block(const ClassSubdict& sub, const AuxPolicy& policy) {
    switch (policy.scheme) {
        case AuxScheme::none: return Eigen::MatrixXd(sub.P(), 0);
        case AuxScheme::fix: return aux_fix(sub);
        case AuxScheme::mov: return aux_mov(sub, policy.window, policy.circular);
        case AuxScheme::corr: return aux_corr(sub, policy.upsilon);
    }
    return Eigen::MatrixXd(sub.P(), 0);
}

inline Dictionary assemble(const std::vector<ClassSubdict>& subdicts, const AuxPolicy& policy) {
    if (subdicts.empty()) throw data_error("cannot assemble an empty dictionary");
    const int P = subdicts.front().P();
    for (const auto& sub : subdicts)
        if (sub.P() != P) throw data_error("subdictionaries disagree on moment count P");

    Dictionary dict;
    dict.aux = policy;
    std::vector<Eigen::MatrixXd> aux_blocks;
    aux_blocks.reserve(subdicts.size());
    int Q = 0;
    for (const auto& sub : subdicts) {
        aux_blocks.push_back(make_aux_block(sub, policy));
        Q += sub.J() + static_cast<int>(aux_blocks.back().cols());
    }

    dict.matrix.resize(P, Q);
    int offset = 0;
    for (std::size_t k = 0; k < subdicts.size(); ++k) {
        const auto& sub = subdicts[k];
        const auto& aux = aux_blocks[k];
        ClassRange range;
        range.class_id = sub.class_id;
        range.primary_begin = offset;
        range.primary_count = sub.J();
        dict.matrix.block(0, offset, P, sub.J()) = sub.atoms;
        offset += sub.J();
        range.aux_begin = offset;
        range.aux_count = static_cast<int>(aux.cols());
        if (aux.cols() > 0) dict.matrix.block(0, offset, P, aux.cols()) = aux;
        offset += static_cast<int>(aux.cols());
        dict.classes.push_back(std::move(range));
    }
    dict.sigma_max = estimate_sigma_max(dict.matrix);
    return dict;
}

// ---------------------------------------------------------------------------
// Dictionary file format: "PZD1", K (u32), then per class class_id
// (length-prefixed UTF-8), J_k (u32), L_k (u32); then P (u32), Q (u32),
// float64 matrix column-major; then aux scheme tag byte plus its parameter
// (W as u32 for mov, upsilon as float64 for corr).
// ---------------------------------------------------------------------------

inline void save_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
    auto out = io::open_output(path);
    io::write_magic(out, "PZD1");
    io::write_u32(out, static_cast<std::uint32_t>(dict.K()));
    for (const auto& range : dict.classes) {
        io::write_string(out, range.class_id);
        io::write_u32(out, static_cast<std::uint32_t>(range.primary_count));
        io::write_u32(out, static_cast<std::uint32_t>(range.aux_count));
    }
    io::write_u32(out, static_cast<std::uint32_t>(dict.P()));
    io::write_u32(out, static_cast<std::uint32_t>(dict.Q()));
    io::write_f64_block(out, dict.matrix.data(), static_cast<std::size_t>(dict.matrix.size()));
    const std::uint8_t tag = static_cast<std::uint8_t>(dict.aux.scheme);
    out.write(reinterpret_cast<const char*>(&tag), 1);
    if (dict.aux.scheme == AuxScheme::mov) io::write_u32(out, static_cast<std::uint32_t>(dict.aux.window));
    if (dict.aux.scheme == AuxScheme::corr) io::write_f64(out, dict.aux.upsilon);
    if (!out) throw data_error("write failed: " + path.string());
}

inline Dictionary load_dictionary(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    io::expect_magic(in, "PZD1", path.string());
    const int K = static_cast<int>(io::read_u32(in));
    Dictionary dict;
    int offset = 0;
    for (int k = 0; k < K; ++k) {
        ClassRange range;
        range.class_id = io::read_string(in);
        range.primary_count = static_cast<int>(io::read_u32(in));
        range.aux_count = static_cast<int>(io::read_u32(in));
        range.primary_begin = offset;
        offset += range.primary_count;
        range.aux_begin = offset;
        offset += range.aux_count;
        dict.classes.push_back(std::move(range));
    }
    const int P = static_cast<int>(io::read_u32(in));
    const int Q = static_cast<int>(io::read_u32(in));
    if (Q != offset) throw data_error("dictionary header column counts do not sum to Q");
    dict.matrix.resize(P, Q);
    io::read_f64_block(in, dict.matrix.data(), static_cast<std::size_t>(dict.matrix.size()));
    std::uint8_t tag = 0;
    in.read(reinterpret_cast<char*>(&tag), 1);
    if (!in || tag > 3) throw data_error("bad aux scheme tag in " + path.string());
    dict.aux.scheme = static_cast<AuxScheme>(tag);
    if (dict.aux.scheme == AuxScheme::mov) dict.aux.window = static_cast<int>(io::read_u32(in));
    if (dict.aux.scheme == AuxScheme::corr) dict.aux.upsilon = io::read_f64(in);
    dict.sigma_max = estimate_sigma_max(dict.matrix);
    return dict;
}

} // namespace pzsrc

#endif
