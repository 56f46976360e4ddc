#ifndef PZSRC_MANIFEST_HPP
#define PZSRC_MANIFEST_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pzsrc/errors.hpp"
#include "pzsrc/rng.hpp"
#include "pzsrc/synth.hpp"

namespace pzsrc {

inline nlohmann::json target_spec_to_json(const TargetSpec& spec) {
    return nlohmann::json{{"shape", shape_name(spec.shape)},
                          {"dims", spec.dims},
                          {"base_re", spec.base_reflectivity.real()},
                          {"base_im", spec.base_reflectivity.imag()},
                          {"sigma_a", spec.aspect_irregularity},
                          {"sigma_c", spec.clutter_sigma},
                          {"seed", spec.seed}};
}

inline TargetSpec target_spec_from_json(const nlohmann::json& j) {
    TargetSpec spec;
    spec.shape = shape_from_name(j.at("shape").get<std::string>());
    spec.dims = j.at("dims").get<std::vector<double>>();
    spec.base_reflectivity = {j.at("base_re").get<double>(), j.at("base_im").get<double>()};
    spec.aspect_irregularity = j.at("sigma_a").get<double>();
    spec.clutter_sigma = j.at("sigma_c").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json j;
    j["side"] = manifest.side;
    j["classes"] = nlohmann::json::array();
    for (const auto& [id, spec] : manifest.classes)
        j["classes"].push_back({{"id", id}, {"spec", target_spec_to_json(spec)}});
    auto entries = [](const std::vector<ManifestEntry>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : list)
            arr.push_back({{"class", e.class_id}, {"angle", e.angle}, {"path", e.path}});
        return arr;
    };
    j["train"] = entries(manifest.train);
    j["test"] = entries(manifest.test);
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest manifest;
    manifest.side = j.at("side").get<int>();
    for (const auto& c : j.at("classes"))
        manifest.classes.emplace_back(c.at("id").get<std::string>(),
                                      target_spec_from_json(c.at("spec")));
    auto entries = [](const nlohmann::json& arr) {
        std::vector<ManifestEntry> list;
        for (const auto& e : arr) {
            ManifestEntry entry;
            entry.class_id = e.at("class").get<std::string>();
            entry.angle = e.at("angle").get<double>();
            entry.path = e.value("path", std::string{});
            list.push_back(std::move(entry));
        }
        return list;
    };
    manifest.train = entries(j.at("train"));
    manifest.test = entries(j.at("test"));
    return manifest;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write manifest: " + path.string());
    out << manifest_to_json(manifest).dump(2) << '\n';
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        return manifest_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw data_error("malformed manifest " + path.string() + ": " + e.what());
    }
}

/// Renders every (class, angle) measurement into out_dir as "PZC1" files and
/// writes the manifest next to them. Returns the manifest with relative
/// paths filled in. Re-running with the same inputs reproduces the files
/// byte for byte.
inline DatasetManifest generate_dataset(DatasetManifest manifest, const std::filesystem::path& out_dir) {
    manifest.validate();
    std::filesystem::create_directories(out_dir);

    auto render_split = [&](std::vector<ManifestEntry>& entries, const char* split) {
        std::vector<int> counter(manifest.classes.size(), 0);
        for (auto& entry : entries) {
            std::size_t class_pos = 0;
            while (class_pos < manifest.classes.size() &&
                   manifest.classes[class_pos].first != entry.class_id)
                ++class_pos;
            if (class_pos == manifest.classes.size())
                throw data_error("manifest entry references unknown class: " + entry.class_id);
            const int idx = counter[class_pos]++;
            char name[64];
            std::snprintf(name, sizeof name, "%s_%04d.pzc", split, idx);
            entry.path = entry.class_id + "/" + name;
            const auto file_path = out_dir / entry.path;
            std::filesystem::create_directories(file_path.parent_path());
            const auto image =
                render_target(manifest.classes[class_pos].second, entry.angle, manifest.side);
            save_complex_image(image, file_path);
        }
    };
    render_split(manifest.train, "train");
    render_split(manifest.test, "test");
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

/// Built-in three-class fixture: a rectangle, an ellipse and an L-shape with
/// distinct base phases, swept over 360 degrees with interleaved train/test
/// angles.
inline DatasetManifest make_three_target_manifest(int side, int train_count, int test_count,
                                                  double sigma_a, double sigma_c,
                                                  std::uint64_t seed) {
    DatasetManifest manifest;
    manifest.side = side;

    auto make_spec = [&](TargetShape shape, std::vector<double> dims, double phase,
                         const char* label) {
        TargetSpec spec;
        spec.shape = shape;
        spec.dims = std::move(dims);
        spec.base_reflectivity = std::polar(1.0, phase);
        spec.aspect_irregularity = sigma_a;
        spec.clutter_sigma = sigma_c;
        spec.seed = hash_combine(seed, hash_string(label));
        return spec;
    };
    // The rectangle and the ellipse share their mass and second moments
    // (ellipse axes = rectangle sides * 2/sqrt(3)), so they separate only
    // through higher-order structure; base phases differ per class.
    manifest.classes.emplace_back(
        "boxcar", make_spec(TargetShape::rectangle, {0.52, 0.30}, -0.9, "boxcar"));
    manifest.classes.emplace_back(
        "oval", make_spec(TargetShape::ellipse, {0.60, 0.346}, 0.0, "oval"));
    manifest.classes.emplace_back(
        "elbow", make_spec(TargetShape::lshape, {0.46, 0.46, 0.5, 0.5}, 0.9, "elbow"));

    const double train_step = train_count > 0 ? 360.0 / train_count : 0.0;
    for (const auto& [id, spec] : manifest.classes) {
        (void)spec;
        for (int i = 0; i < train_count; ++i)
            manifest.train.push_back({id, i * train_step, ""});
        for (int i = 0; i < test_count; ++i)
            manifest.test.push_back({id, train_step / 2.0 + i * (360.0 / test_count), ""});
    }
    return manifest;
}

} // namespace pzsrc

#endif
