#ifndef PZSRC_PIPELINE_HPP
#define PZSRC_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pzsrc/classify.hpp"
#include "pzsrc/csv.hpp"
#include "pzsrc/dictionary.hpp"
#include "pzsrc/errors.hpp"
#include "pzsrc/imaging.hpp"
#include "pzsrc/manifest.hpp"
#include "pzsrc/moments.hpp"
#include "pzsrc/sparse.hpp"
#include "pzsrc/synth.hpp"
#include "pzsrc/threading.hpp"

namespace pzsrc {

/// Fully resolved run parameters. Every command writes this next to its
/// outputs; re-running a command from the saved file reproduces the outputs
/// bit for bit.
struct RunConfig {
    int n_max = 10;
    int side = 96;
    bool fusion = true;
    double xi = 0.0; // <= 0: resolve as 0.25 * mu00 of the first training image
    std::string aux = "none";
    int window = 0;
    double upsilon = 0.0;
    bool circular = false;
    int gamma = 5;
    int max_iters = 300;
    double residual_tol = 1e-6;
    std::string step = "spectral";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string manifest; // dataset manifest (or manifest spec for synth)
    std::string out;      // output directory

    // per-command extras, serialized so a saved config replays the command
    std::string dictionary;              // classify/sweep/correlate input
    std::string split = "test";          // classify: which manifest split
    std::string correlate_class;         // correlate
    std::vector<int> correlate_refs;     // correlate
    std::string sweep_param = "window";  // sweep: window | upsilon
    std::vector<double> sweep_values;    // sweep
    int synth_train = 120;               // synth preset
    int synth_test = 60;                 // synth preset
    double synth_sigma_a = 0.1;          // synth preset
    double synth_sigma_c = 0.05;         // synth preset

    double xi_resolved = 0.0; // filled in by the run

    IhtConfig iht() const {
        IhtConfig cfg;
        cfg.gamma = gamma;
        cfg.max_iters = max_iters;
        cfg.residual_tol = residual_tol;
        cfg.step = step_policy_from_name(step);
        return cfg;
    }

    AuxPolicy aux_policy() const {
        AuxPolicy policy;
        policy.scheme = aux_scheme_from_name(aux);
        policy.window = window;
        policy.upsilon = upsilon;
        policy.circular = circular;
        if (policy.scheme == AuxScheme::mov && policy.window < 1)
            throw config_error("aux scheme 'mov' requires --window >= 1");
        if (policy.scheme == AuxScheme::corr && !(policy.upsilon > 0.0 && policy.upsilon < 1.0))
            throw config_error("aux scheme 'corr' requires --upsilon in (0, 1)");
        return policy;
    }
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{{"n_max", c.n_max},
                          {"side", c.side},
                          {"fusion", c.fusion},
                          {"xi", c.xi},
                          {"aux", c.aux},
                          {"window", c.window},
                          {"upsilon", c.upsilon},
                          {"circular", c.circular},
                          {"gamma", c.gamma},
                          {"max_iters", c.max_iters},
                          {"residual_tol", c.residual_tol},
                          {"step", c.step},
                          {"seed", c.seed},
                          {"threads", c.threads},
                          {"manifest", c.manifest},
                          {"out", c.out},
                          {"dictionary", c.dictionary},
                          {"split", c.split},
                          {"correlate_class", c.correlate_class},
                          {"correlate_refs", c.correlate_refs},
                          {"sweep_param", c.sweep_param},
                          {"sweep_values", c.sweep_values},
                          {"synth_train", c.synth_train},
                          {"synth_test", c.synth_test},
                          {"synth_sigma_a", c.synth_sigma_a},
                          {"synth_sigma_c", c.synth_sigma_c},
                          {"xi_resolved", c.xi_resolved}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.n_max = j.value("n_max", c.n_max);
    c.side = j.value("side", c.side);
    c.fusion = j.value("fusion", c.fusion);
    c.xi = j.value("xi", c.xi);
    c.aux = j.value("aux", c.aux);
    c.window = j.value("window", c.window);
    c.upsilon = j.value("upsilon", c.upsilon);
    c.circular = j.value("circular", c.circular);
    c.gamma = j.value("gamma", c.gamma);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.residual_tol = j.value("residual_tol", c.residual_tol);
    c.step = j.value("step", c.step);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.manifest = j.value("manifest", c.manifest);
    c.out = j.value("out", c.out);
    c.dictionary = j.value("dictionary", c.dictionary);
    c.split = j.value("split", c.split);
    c.correlate_class = j.value("correlate_class", c.correlate_class);
    c.correlate_refs = j.value("correlate_refs", c.correlate_refs);
    c.sweep_param = j.value("sweep_param", c.sweep_param);
    c.sweep_values = j.value("sweep_values", c.sweep_values);
    c.synth_train = j.value("synth_train", c.synth_train);
    c.synth_test = j.value("synth_test", c.synth_test);
    c.synth_sigma_a = j.value("synth_sigma_a", c.synth_sigma_a);
    c.synth_sigma_c = j.value("synth_sigma_c", c.synth_sigma_c);
    c.xi_resolved = j.value("xi_resolved", c.xi_resolved);
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        return run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("malformed config " + path.string() + ": " + e.what());
    }
}

inline void write_run_config(const RunConfig& cfg, const std::string& command) {
    const auto dir = std::filesystem::path(cfg.out);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / ("run_config_" + command + ".json"));
    if (!out) throw data_error("cannot write run config in " + cfg.out);
    out << run_config_to_json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Preprocessing chain shared by dictionary construction and classification:
// load -> fuse (or magnitude) -> scale/translation normalize -> vectorize.
// ---------------------------------------------------------------------------

inline RealImage load_measurement(const std::filesystem::path& path, bool fusion) {
    if (!std::filesystem::exists(path)) throw data_error("missing measurement file: " + path.string());
    std::ifstream probe(path, std::ios::binary);
    char magic[4] = {};
    probe.read(magic, 4);
    const std::string tag(magic, 4);
    if (tag == "PZC1") {
        const ComplexImage image = load_complex_image(path);
        return fusion ? fuse_complex(image) : magnitude_image(image);
    }
    if (tag == "PZI1") return load_real_image(path);
    if (tag.size() >= 2 && tag[0] == 'P' && tag[1] == '5') return load_pgm(path);
    throw data_error("unrecognized image format: " + path.string());
}

/// xi used by the scale normalization: explicit when positive,
/// otherwise a quarter of the first training image's mass.
inline double resolve_xi(const RunConfig& cfg, const DatasetManifest& manifest,
                         const std::filesystem::path& base_dir, const DiskGeometry& geom) {
    if (cfg.xi > 0.0) return cfg.xi;
    if (manifest.train.empty())
        throw config_error("xi cannot be resolved automatically without training entries");
    const RealImage first = load_measurement(base_dir / manifest.train.front().path, cfg.fusion);
    const double m00 = regular_moment(first, geom, 0, 0);
    if (m00 <= 0.0) throw data_error("first training image has zero mass; cannot resolve xi");
    return 0.25 * m00;
}

inline ImageVector preprocess_measurement(const std::filesystem::path& path, bool fusion,
                                          const DiskGeometry& geom, double xi) {
    const RealImage raw = load_measurement(path, fusion);
    if (raw.side != geom.side)
        throw data_error("image side mismatch for " + path.string());
    const RealImage normalized = normalize_scale_translation(raw, geom, xi);
    return vectorize(normalized, true);
}

struct DictionaryBuild {
    std::vector<ClassSubdict> subdicts;
    Dictionary dictionary;
    double xi = 0.0;
};

/// Per-class subdictionaries from the manifest's train split, columns in
/// increasing aspect-angle order.
inline std::vector<ClassSubdict> build_subdicts_from_manifest(const RunConfig& cfg,
                                                              const DatasetManifest& manifest,
                                                              const std::filesystem::path& base_dir,
                                                              const PZBasis& basis, double xi) {
    std::vector<ClassSubdict> subdicts;
    for (const auto& [class_id, spec] : manifest.classes) {
        (void)spec;
        std::vector<const ManifestEntry*> entries;
        for (const auto& e : manifest.train)
            if (e.class_id == class_id) entries.push_back(&e);
        if (entries.empty()) throw data_error("train split is empty for class " + class_id);
        std::stable_sort(entries.begin(), entries.end(),
                         [](const ManifestEntry* a, const ManifestEntry* b) { return a->angle < b->angle; });

        std::vector<ImageVector> measurements(entries.size());
        parallel_for(static_cast<int>(entries.size()), cfg.threads, [&](int i) {
            measurements[i] =
                preprocess_measurement(base_dir / entries[i]->path, cfg.fusion, basis.geometry, xi);
        });
        std::vector<double> angles;
        angles.reserve(entries.size());
        for (const auto* e : entries) angles.push_back(e->angle);
        subdicts.push_back(build_subdict(basis, measurements, class_id, std::move(angles)));
    }
    return subdicts;
}

inline DictionaryBuild build_dictionary(const RunConfig& cfg, const DatasetManifest& manifest,
                                        const std::filesystem::path& base_dir, const PZBasis& basis) {
    DictionaryBuild build;
    build.xi = resolve_xi(cfg, manifest, base_dir, basis.geometry);
    build.subdicts = build_subdicts_from_manifest(cfg, manifest, base_dir, basis, build.xi);
    build.dictionary = assemble(build.subdicts, cfg.aux_policy());
    return build;
}

// ---------------------------------------------------------------------------
// Commands. Each writes its artifacts plus the resolved RunConfig under
// cfg.out and also returns the main result for in-process callers.
// ---------------------------------------------------------------------------

inline std::filesystem::path run_basis(RunConfig cfg) {
    const PZBasis basis = build_basis(cfg.n_max, build_disk_geometry(cfg.side));
    std::filesystem::create_directories(cfg.out);
    const auto path = std::filesystem::path(cfg.out) / "basis.pzb";
    save_basis(basis, path);
    write_run_config(cfg, "basis");
    return path;
}

inline std::filesystem::path run_build_dict(RunConfig& cfg) {
    if (cfg.manifest.empty()) throw config_error("build-dict requires a manifest");
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    const auto base_dir = std::filesystem::path(cfg.manifest).parent_path();
    if (cfg.side != manifest.side)
        throw config_error("config side does not match manifest side");
    const PZBasis basis = build_basis(cfg.n_max, build_disk_geometry(cfg.side));
    DictionaryBuild build = build_dictionary(cfg, manifest, base_dir, basis);
    cfg.xi_resolved = build.xi;

    std::filesystem::create_directories(cfg.out);
    const auto dict_path = std::filesystem::path(cfg.out) / "dictionary.pzd";
    save_dictionary(build.dictionary, dict_path);

    nlohmann::json log;
    log["P"] = build.dictionary.P();
    log["Q"] = build.dictionary.Q();
    log["xi"] = build.xi;
    log["sigma_max"] = build.dictionary.sigma_max;
    log["classes"] = nlohmann::json::array();
    for (const auto& range : build.dictionary.classes)
        log["classes"].push_back(
            {{"id", range.class_id}, {"J", range.primary_count}, {"L", range.aux_count}});
    std::ofstream log_out(std::filesystem::path(cfg.out) / "build_log.json");
    log_out << log.dump(2) << '\n';

    write_run_config(cfg, "build-dict");
    return dict_path;
}

struct ClassifyOutcome {
    EvalReport report;
    std::vector<std::pair<std::string, ClassDecision>> decisions; // (truth, decision)
    std::vector<std::string> items;
};

/// Encodes and classifies one manifest split against a prebuilt dictionary.
inline ClassifyOutcome classify_split(const RunConfig& cfg, const DatasetManifest& manifest,
                                      const std::filesystem::path& base_dir, const PZBasis& basis,
                                      const Dictionary& dict, double xi,
                                      const std::vector<ManifestEntry>& split_entries) {
    if (split_entries.empty()) throw data_error("selected split has no entries");
    if (dict.P() != basis.P())
        throw data_error("feature dimension P mismatch between basis and dictionary");
    for (const auto& [id, spec] : manifest.classes) {
        (void)spec;
        if (dict.class_index(id) < 0)
            throw data_error("dictionary is missing manifest class " + id);
    }

    const IhtConfig iht_cfg = cfg.iht();
    ClassifyOutcome outcome;
    outcome.decisions.resize(split_entries.size());
    outcome.items.resize(split_entries.size());
    parallel_for(static_cast<int>(split_entries.size()), cfg.threads, [&](int i) {
        const auto& entry = split_entries[i];
        const ImageVector vec =
            preprocess_measurement(base_dir / entry.path, cfg.fusion, basis.geometry, xi);
        Eigen::VectorXd y = magnitude_moments(basis, vec.values);
        const double norm = y.norm();
        if (norm == 0.0) throw data_error("degenerate test measurement: " + entry.path);
        y /= norm;
        const SparseCode code = iht_encode(dict, y, iht_cfg);
        outcome.decisions[i] = {entry.class_id, classify(dict, code, y)};
        outcome.items[i] = entry.path;
    });
    std::vector<std::string> class_ids;
    for (const auto& range : dict.classes) class_ids.push_back(range.class_id);
    outcome.report = evaluate(class_ids, outcome.decisions);
    return outcome;
}

inline EvalReport run_classify(RunConfig& cfg) {
    if (cfg.manifest.empty()) throw config_error("classify requires a manifest");
    if (cfg.dictionary.empty()) throw config_error("classify requires a dictionary file");
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    const auto base_dir = std::filesystem::path(cfg.manifest).parent_path();
    const Dictionary dict = load_dictionary(cfg.dictionary);
    if (dict.P() != (cfg.n_max + 1) * (cfg.n_max + 1))
        throw data_error("dictionary P does not match n_max; rebuild or fix --n-max");
    if (cfg.side != manifest.side) throw config_error("config side does not match manifest side");

    const PZBasis basis = build_basis(cfg.n_max, build_disk_geometry(cfg.side));
    const double xi = resolve_xi(cfg, manifest, base_dir, basis.geometry);
    cfg.xi_resolved = xi;
    const auto& entries = cfg.split == "train" ? manifest.train : manifest.test;
    ClassifyOutcome outcome = classify_split(cfg, manifest, base_dir, basis, dict, xi, entries);

    std::filesystem::create_directories(cfg.out);
    csv::Writer decisions_csv(std::filesystem::path(cfg.out) / "decisions.csv");
    std::vector<std::string> header{"item", "truth", "predicted"};
    for (const auto& range : dict.classes) header.push_back("res:" + range.class_id);
    decisions_csv.row(header);
    for (std::size_t i = 0; i < outcome.decisions.size(); ++i) {
        const auto& [truth, decision] = outcome.decisions[i];
        std::vector<std::string> row{outcome.items[i], truth, decision.predicted};
        for (double r : decision.residuals) row.push_back(csv::format_double(r));
        decisions_csv.row(row);
    }
    write_eval_csv(outcome.report, std::filesystem::path(cfg.out) / "eval.csv");
    write_run_config(cfg, "classify");
    return outcome.report;
}

struct SweepRow {
    double value = 0.0;
    double ratio = 0.0; // window / J_1 for window sweeps, 0 otherwise
    double omega = 0.0;
};

inline std::vector<SweepRow> run_sweep(RunConfig& cfg) {
    if (cfg.manifest.empty()) throw config_error("sweep requires a manifest");
    if (cfg.sweep_values.empty()) throw config_error("sweep requires at least one value");
    if (cfg.sweep_param != "window" && cfg.sweep_param != "upsilon")
        throw config_error("sweep parameter must be 'window' or 'upsilon'");
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    const auto base_dir = std::filesystem::path(cfg.manifest).parent_path();
    if (cfg.side != manifest.side) throw config_error("config side does not match manifest side");

    const PZBasis basis = build_basis(cfg.n_max, build_disk_geometry(cfg.side));
    const double xi = resolve_xi(cfg, manifest, base_dir, basis.geometry);
    cfg.xi_resolved = xi;
    const auto subdicts = build_subdicts_from_manifest(cfg, manifest, base_dir, basis, xi);

    std::vector<SweepRow> rows;
    for (double value : cfg.sweep_values) {
        AuxPolicy policy;
        policy.circular = cfg.circular;
        if (cfg.sweep_param == "window") {
            policy.scheme = AuxScheme::mov;
            policy.window = static_cast<int>(std::llround(value));
        } else {
            policy.scheme = AuxScheme::corr;
            policy.upsilon = value;
        }
        const Dictionary dict = assemble(subdicts, policy);
        const auto outcome = classify_split(cfg, manifest, base_dir, basis, dict, xi, manifest.test);
        SweepRow row;
        row.value = value;
        row.ratio = cfg.sweep_param == "window"
                        ? value / static_cast<double>(subdicts.front().J())
                        : 0.0;
        row.omega = outcome.report.omega;
        rows.push_back(row);
    }

    std::filesystem::create_directories(cfg.out);
    csv::Writer out(std::filesystem::path(cfg.out) / "sweep.csv");
    out.row({"value", "ratio", "omega"});
    for (const auto& row : rows) {
        out.row({csv::format_double(row.value),
                 cfg.sweep_param == "window" ? csv::format_double(row.ratio) : std::string{},
                 csv::format_double(row.omega)});
    }
    write_run_config(cfg, "sweep");
    return rows;
}

struct CorrelationCurves {
    std::vector<int> refs;
    std::vector<double> angles;   // per column
    Eigen::MatrixXd pz;           // refs x J, PZ-moment space
    Eigen::MatrixXd raw;          // refs x J, raw vectorized-image space
};

inline CorrelationCurves correlation_curves(const RunConfig& cfg, const DatasetManifest& manifest,
                                            const std::filesystem::path& base_dir,
                                            const PZBasis& basis, double xi,
                                            const std::string& class_id,
                                            const std::vector<int>& refs) {
    std::vector<const ManifestEntry*> entries;
    for (const auto& e : manifest.train)
        if (e.class_id == class_id) entries.push_back(&e);
    if (entries.empty()) throw data_error("train split is empty for class " + class_id);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const ManifestEntry* a, const ManifestEntry* b) { return a->angle < b->angle; });

    std::vector<ImageVector> measurements(entries.size());
    parallel_for(static_cast<int>(entries.size()), cfg.threads, [&](int i) {
        measurements[i] =
            preprocess_measurement(base_dir / entries[i]->path, cfg.fusion, basis.geometry, xi);
    });
    std::vector<double> angles;
    for (const auto* e : entries) angles.push_back(e->angle);
    const ClassSubdict subdict = build_subdict(basis, measurements, class_id, angles);

    CorrelationCurves curves;
    curves.refs = refs;
    curves.angles = angles;
    curves.pz = atom_correlations(subdict, refs);
    Eigen::MatrixXd raw_cols(measurements.front().values.size(),
                             static_cast<Eigen::Index>(measurements.size()));
    for (std::size_t j = 0; j < measurements.size(); ++j)
        raw_cols.col(static_cast<Eigen::Index>(j)) = measurements[j].values;
    curves.raw.resize(static_cast<Eigen::Index>(refs.size()), raw_cols.cols());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i] < 0 || refs[i] >= static_cast<int>(measurements.size()))
            throw config_error("reference column index out of range");
        curves.raw.row(static_cast<Eigen::Index>(i)) =
            raw_cols.col(refs[i]).transpose() * raw_cols;
    }
    return curves;
}

inline CorrelationCurves run_correlate(RunConfig& cfg) {
    if (cfg.manifest.empty()) throw config_error("correlate requires a manifest");
    if (cfg.correlate_class.empty()) throw config_error("correlate requires a class id");
    if (cfg.correlate_refs.empty()) throw config_error("correlate requires reference indices");
    const DatasetManifest manifest = load_manifest(cfg.manifest);
    const auto base_dir = std::filesystem::path(cfg.manifest).parent_path();
    if (cfg.side != manifest.side) throw config_error("config side does not match manifest side");

    const PZBasis basis = build_basis(cfg.n_max, build_disk_geometry(cfg.side));
    const double xi = resolve_xi(cfg, manifest, base_dir, basis.geometry);
    cfg.xi_resolved = xi;
    const CorrelationCurves curves =
        correlation_curves(cfg, manifest, base_dir, basis, xi, cfg.correlate_class, cfg.correlate_refs);

    std::filesystem::create_directories(cfg.out);
    csv::Writer out(std::filesystem::path(cfg.out) / "correlations.csv");
    out.row({"class", "ref_index", "column_index", "angle", "pz_corr", "raw_corr"});
    for (Eigen::Index i = 0; i < curves.pz.rows(); ++i)
        for (Eigen::Index j = 0; j < curves.pz.cols(); ++j)
            out.row({cfg.correlate_class, std::to_string(curves.refs[static_cast<std::size_t>(i)]),
                     std::to_string(j), csv::format_double(curves.angles[static_cast<std::size_t>(j)]),
                     csv::format_double(curves.pz(i, j)), csv::format_double(curves.raw(i, j))});
    write_run_config(cfg, "correlate");
    return curves;
}

inline DatasetManifest run_synth(RunConfig& cfg) {
    if (cfg.out.empty()) throw config_error("synth requires an output directory");
    DatasetManifest manifest;
    if (!cfg.manifest.empty()) {
        manifest = load_manifest(cfg.manifest);
    } else {
        manifest = make_three_target_manifest(cfg.side, cfg.synth_train, cfg.synth_test,
                                              cfg.synth_sigma_a, cfg.synth_sigma_c, cfg.seed);
    }
    DatasetManifest written = generate_dataset(std::move(manifest), cfg.out);
    write_run_config(cfg, "synth");
    return written;
}

} // namespace pzsrc

#endif
