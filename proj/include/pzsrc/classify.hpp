#ifndef PZSRC_CLASSIFY_HPP
#define PZSRC_CLASSIFY_HPP

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pzsrc/csv.hpp"
#include "pzsrc/dictionary.hpp"
#include "pzsrc/errors.hpp"
#include "pzsrc/sparse.hpp"

namespace pzsrc {

struct ClassDecision {
    std::string predicted;
    int predicted_index = -1;
    std::vector<double> residuals; // ||y - Phi^k x^k||^2 per class
    SparseCode code;
};

/// Residual classification: restrict the code to each class's columns
/// (primary and auxiliary) and pick the class with the smallest
/// reconstruction residual. Ties go to the lowest class index.
inline ClassDecision classify(const Dictionary& dict, const SparseCode& code, const Eigen::VectorXd& y) {
    if (code.coefficients.size() != dict.Q())
        throw data_error("sparse code length does not match dictionary Q");
    if (y.size() != dict.P()) throw data_error("test vector length does not match dictionary P");

    ClassDecision decision;
    decision.code = code;
    decision.residuals.resize(dict.classes.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dict.classes.size(); ++k) {
        const auto& range = dict.classes[k];
        Eigen::VectorXd r = y;
        for (int idx : code.support) {
            if (idx >= range.begin() && idx < range.begin() + range.count())
                r -= code.coefficients[idx] * dict.matrix.col(idx);
        }
        decision.residuals[k] = r.squaredNorm();
        if (decision.residuals[k] < best) {
            best = decision.residuals[k];
            decision.predicted_index = static_cast<int>(k);
        }
    }
    decision.predicted = dict.classes[decision.predicted_index].class_id;
    return decision;
}

/// Confusion matrix (row = truth, column = prediction) with per-class and
/// overall accuracy percentages.
struct EvalReport {
    std::vector<std::string> class_ids;
    Eigen::MatrixXi confusion;
    std::vector<int> per_class_totals;
    std::vector<double> omega_k; // percent
    double omega = 0.0;          // percent, mean of omega_k
};

inline EvalReport evaluate(const std::vector<std::string>& class_ids,
                           const std::vector<std::pair<std::string, ClassDecision>>& decisions) {
    if (decisions.empty()) throw data_error("cannot evaluate an empty decision list");
    const int K = static_cast<int>(class_ids.size());
    auto index_of = [&](const std::string& id) {
        for (int k = 0; k < K; ++k)
            if (class_ids[k] == id) return k;
        throw data_error("unknown truth label: " + id);
    };

    EvalReport report;
    report.class_ids = class_ids;
    report.confusion = Eigen::MatrixXi::Zero(K, K);
    for (const auto& [truth, decision] : decisions) {
        const int t = index_of(truth);
        const int p = index_of(decision.predicted);
        report.confusion(t, p) += 1;
    }
    report.per_class_totals.resize(K);
    report.omega_k.resize(K);
    for (int k = 0; k < K; ++k) {
        report.per_class_totals[k] = report.confusion.row(k).sum();
        report.omega_k[k] = report.per_class_totals[k] > 0
                                ? 100.0 * report.confusion(k, k) / report.per_class_totals[k]
                                : 0.0;
        report.omega += report.omega_k[k];
    }
    report.omega /= K;
    return report;
}

/// Inner products of selected reference columns against every column of the
/// class, one row per reference.
inline Eigen::MatrixXd atom_correlations(const ClassSubdict& subdict, const std::vector<int>& reference_columns) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(reference_columns.size()), subdict.J());
    for (std::size_t i = 0; i < reference_columns.size(); ++i) {
        const int ref = reference_columns[i];
        if (ref < 0 || ref >= subdict.J()) throw config_error("reference column index out of range");
        out.row(static_cast<Eigen::Index>(i)) = subdict.atoms.col(ref).transpose() * subdict.atoms;
    }
    return out;
}

inline void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
    csv::Writer out(path);
    std::vector<std::string> header{"truth"};
    for (const auto& id : report.class_ids) header.push_back("pred:" + id);
    header.push_back("omega_k");
    out.row(header);
    const int K = static_cast<int>(report.class_ids.size());
    for (int k = 0; k < K; ++k) {
        std::vector<std::string> row{report.class_ids[k]};
        for (int j = 0; j < K; ++j) row.push_back(std::to_string(report.confusion(k, j)));
        row.push_back(csv::format_double(report.omega_k[k]));
        out.row(row);
    }
    std::vector<std::string> overall{"overall"};
    for (int j = 0; j < K; ++j) overall.push_back("");
    overall.push_back(csv::format_double(report.omega));
    out.row(overall);
}

} // namespace pzsrc

#endif
