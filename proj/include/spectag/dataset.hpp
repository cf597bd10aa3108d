#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "spectag/confidence.hpp"
#include "spectag/errors.hpp"
#include "spectag/features.hpp"
#include "spectag/multiclass.hpp"
#include "spectag/parallel.hpp"
#include "spectag/phantom.hpp"
#include "spectag/stack_io.hpp"

namespace spectag {

struct ImageEntry {
    std::string id;
    std::string subject;
    std::string split; // "train" | "test"
    std::string stack; // stack directory, relative to the dataset root
    std::string ground_truth;
};

// Dataset description: image entries with subject-level train/test split,
// shared calibration, organ class list and band metadata.
struct DatasetManifest {
    fs::path root;
    std::vector<std::string> classes;
    std::vector<double> wavelengths;
    std::vector<double> fwhm;
    std::string dark_dir;
    std::string white_dir;
    std::vector<ImageEntry> images;

    std::vector<const ImageEntry*> split_entries(const std::string& split) const {
        std::vector<const ImageEntry*> out;
        for (const auto& e : images)
            if (e.split == split) out.push_back(&e);
        return out;
    }

    fs::path resolve(const std::string& rel) const { return root / rel; }

    void validate() const {
        if (classes.size() < 2) throw DataError("manifest: at least 2 classes required");
        std::map<std::string, std::set<std::string>> subject_splits;
        for (const auto& e : images) {
            if (e.split != "train" && e.split != "test")
                throw DataError("manifest: image " + e.id + " has split '" + e.split +
                                "' (expected train or test)");
            subject_splits[e.subject].insert(e.split);
            if (!fs::exists(resolve(e.stack) / "stack.json"))
                throw DataError("manifest: missing stack for image " + e.id + " at " +
                                (resolve(e.stack)).string());
            if (!e.ground_truth.empty() && !fs::exists(resolve(e.ground_truth)))
                throw DataError("manifest: missing ground truth for image " + e.id);
        }
        for (const auto& [subject, splits] : subject_splits)
            if (splits.size() > 1)
                throw DataError("manifest: subject '" + subject +
                                "' appears in both train and test splits");
        if (!fs::exists(resolve(dark_dir) / "stack.json") ||
            !fs::exists(resolve(white_dir) / "stack.json"))
            throw DataError("manifest: calibration stacks missing");
        // class list must match the ground-truth label files
        std::set<fs::path> label_files;
        for (const auto& e : images)
            if (!e.ground_truth.empty())
                label_files.insert(resolve(e.ground_truth).parent_path() / "labels.json");
        for (const auto& lf : label_files) {
            if (!fs::exists(lf)) throw DataError("manifest: missing " + lf.string());
            if (read_labels_json(lf) != classes)
                throw DataError("manifest: class list does not match " + lf.string());
        }
    }
};

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
    nlohmann::json j;
    j["format"] = "spectag-dataset/1";
    j["classes"] = m.classes;
    j["wavelengths_nm"] = m.wavelengths;
    j["fwhm_nm"] = m.fwhm;
    j["calibration"] = {{"dark", m.dark_dir}, {"white", m.white_dir}};
    nlohmann::json images = nlohmann::json::array();
    for (const auto& e : m.images)
        images.push_back({{"id", e.id},
                          {"subject", e.subject},
                          {"split", e.split},
                          {"stack", e.stack},
                          {"ground_truth", e.ground_truth}});
    j["images"] = std::move(images);
    std::ofstream out(path);
    if (!out) throw DataError("save_manifest: cannot open " + path.string());
    out << j.dump(1) << "\n";
}

inline DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_manifest: " + path.string() + ": " + e.what());
    }
    if (!j.contains("format") || j["format"] != "spectag-dataset/1")
        throw DataError("load_manifest: unknown or missing format tag in " + path.string());
    DatasetManifest m;
    m.root = fs::absolute(path).parent_path();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.wavelengths = j.at("wavelengths_nm").get<std::vector<double>>();
    m.fwhm = j.at("fwhm_nm").get<std::vector<double>>();
    m.dark_dir = j.at("calibration").at("dark").get<std::string>();
    m.white_dir = j.at("calibration").at("white").get<std::string>();
    for (const auto& ij : j.at("images")) {
        ImageEntry e;
        e.id = ij.at("id").get<std::string>();
        e.subject = ij.at("subject").get<std::string>();
        e.split = ij.at("split").get<std::string>();
        e.stack = ij.at("stack").get<std::string>();
        e.ground_truth = ij.value("ground_truth", std::string());
        m.images.push_back(std::move(e));
    }
    m.validate();
    return m;
}

// Pipeline configuration; defaults reproduce the acquisition-protocol
// settings so a bare run needs no config file.
struct PipelineConfig {
    // segmentation
    int avg_size = 150;
    double compactness = 0.1;
    // diffusion
    int diffusion_iterations = 15;
    double diffusion_kappa = 0.02;
    double diffusion_step = 0.2;
    // specular masking
    double v_threshold = 0.95;
    // simulated RGB bands
    std::array<double, 3> rgb_wavelengths = {700.0, 560.0, 470.0};
    // texture descriptor
    LbpConfig lbp;
    // svm training
    double c_grid_log_min = 1.0, c_grid_log_max = 10.0;
    int c_grid_count = 10;
    double gamma_grid_log_min = -8.0, gamma_grid_log_max = 1.0;
    int gamma_grid_count = 10;
    int cv_folds = 10;
    int calibration_folds = 5;
    double smo_tol = 1e-3;
    uint64_t seed = 13;
    // confidence
    ConfidenceMetric metric = ConfidenceMetric::kGini;
    double tau = 0.9;
    std::vector<double> tau_grid = {0.5, 0.6, 0.7, 0.8, 0.9};
    // ground-truth assignment
    double majority_fraction = 0.6; // below this a superpixel is "mixed"
    // runtime
    int jobs = 0;

    std::vector<double> c_grid() const {
        return log10_grid(c_grid_log_min, c_grid_log_max, c_grid_count);
    }
    std::vector<double> gamma_grid() const {
        return log10_grid(gamma_grid_log_min, gamma_grid_log_max, gamma_grid_count);
    }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<double> parse_number_list(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config: bad number '" + item + "' for " + key);
        }
    }
    if (out.empty()) throw ConfigError("config: empty list for " + key);
    return out;
}

inline double parse_number(const std::string& value, const std::string& key) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (trim(value.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config: bad number '" + value + "' for " + key);
}

} // namespace config_detail

// TOML-style sections of key=value lines; '#' starts a comment.
inline PipelineConfig parse_config_text(const std::string& text) {
    using config_detail::parse_number;
    using config_detail::parse_number_list;
    using config_detail::trim;
    PipelineConfig cfg;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "segmentation.avg_size") cfg.avg_size = static_cast<int>(parse_number(value, key));
        else if (key == "segmentation.compactness") cfg.compactness = parse_number(value, key);
        else if (key == "diffusion.iterations")
            cfg.diffusion_iterations = static_cast<int>(parse_number(value, key));
        else if (key == "diffusion.kappa") cfg.diffusion_kappa = parse_number(value, key);
        else if (key == "diffusion.step") cfg.diffusion_step = parse_number(value, key);
        else if (key == "specular.v_threshold") cfg.v_threshold = parse_number(value, key);
        else if (key == "rgb.wavelengths") {
            const auto list = parse_number_list(value, key);
            if (list.size() != 3) throw ConfigError("config: rgb.wavelengths needs 3 values");
            cfg.rgb_wavelengths = {list[0], list[1], list[2]};
        } else if (key == "lbp.pairs") {
            // e.g. pairs = 1:8, 2:16, 3:24
            cfg.lbp.pairs.clear();
            std::stringstream ps(value);
            std::string item;
            while (std::getline(ps, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("config: lbp.pairs entries must look like R:P");
                LbpPair p;
                p.radius = static_cast<int>(parse_number(trim(item.substr(0, colon)), key));
                p.points = static_cast<int>(parse_number(trim(item.substr(colon + 1)), key));
                cfg.lbp.pairs.push_back(p);
            }
            cfg.lbp.validate();
        } else if (key == "svm.c_grid_log_min") cfg.c_grid_log_min = parse_number(value, key);
        else if (key == "svm.c_grid_log_max") cfg.c_grid_log_max = parse_number(value, key);
        else if (key == "svm.c_grid_count") cfg.c_grid_count = static_cast<int>(parse_number(value, key));
        else if (key == "svm.gamma_grid_log_min") cfg.gamma_grid_log_min = parse_number(value, key);
        else if (key == "svm.gamma_grid_log_max") cfg.gamma_grid_log_max = parse_number(value, key);
        else if (key == "svm.gamma_grid_count")
            cfg.gamma_grid_count = static_cast<int>(parse_number(value, key));
        else if (key == "svm.folds") cfg.cv_folds = static_cast<int>(parse_number(value, key));
        else if (key == "svm.calibration_folds")
            cfg.calibration_folds = static_cast<int>(parse_number(value, key));
        else if (key == "svm.tol") cfg.smo_tol = parse_number(value, key);
        else if (key == "svm.seed") cfg.seed = static_cast<uint64_t>(parse_number(value, key));
        else if (key == "confidence.metric") cfg.metric = metric_from_name(value);
        else if (key == "confidence.tau") cfg.tau = parse_number(value, key);
        else if (key == "confidence.tau_grid") cfg.tau_grid = parse_number_list(value, key);
        else if (key == "tagging.majority_fraction") cfg.majority_fraction = parse_number(value, key);
        else if (key == "runtime.jobs") cfg.jobs = static_cast<int>(parse_number(value, key));
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (cfg.tau < 0.0 || cfg.tau >= 1.0)
        throw ConfigError("config: confidence.tau must lie in [0, 1)");
    return cfg;
}

inline PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_config: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::string default_config_text() {
    return "# spectag pipeline configuration (defaults shown)\n"
           "[segmentation]\n"
           "avg_size = 150\n"
           "compactness = 0.1\n\n"
           "[diffusion]\n"
           "iterations = 15\n"
           "kappa = 0.02\n"
           "step = 0.2\n\n"
           "[specular]\n"
           "v_threshold = 0.95\n\n"
           "[rgb]\n"
           "wavelengths = 700, 560, 470\n\n"
           "[lbp]\n"
           "pairs = 1:8, 2:16, 3:24\n\n"
           "[svm]\n"
           "c_grid_log_min = 1\n"
           "c_grid_log_max = 10\n"
           "c_grid_count = 10\n"
           "gamma_grid_log_min = -8\n"
           "gamma_grid_log_max = 1\n"
           "gamma_grid_count = 10\n"
           "folds = 10\n"
           "calibration_folds = 5\n"
           "tol = 1e-3\n"
           "seed = 13\n\n"
           "[confidence]\n"
           "metric = gc\n"
           "tau = 0.9\n"
           "tau_grid = 0.5, 0.6, 0.7, 0.8, 0.9\n\n"
           "[tagging]\n"
           "majority_fraction = 0.6\n\n"
           "[runtime]\n"
           "jobs = 0\n";
}

// --- phantom dataset synthesis -------------------------------------------

struct PhantomDatasetSpec {
    PhantomSpec base;
    int train_images = 29;
    int test_images = 28;
    int train_subjects = 3;
    int test_subjects = 4;

    PhantomDatasetSpec() {
        base.classes = default_phantom_classes();
        base.specular_discs = 2;
        base.sites_min = 3;
        base.sites_max = 5;
        base.seed = 20260811;
    }
};

inline PhantomDatasetSpec load_phantom_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_phantom_spec: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_phantom_spec: " + path.string() + ": " + e.what());
    }
    PhantomDatasetSpec spec;
    PhantomSpec& b = spec.base;
    b.width = j.value("width", b.width);
    b.height = j.value("height", b.height);
    if (j.contains("wavelengths_nm")) b.wavelengths = j["wavelengths_nm"].get<std::vector<double>>();
    if (j.contains("fwhm_nm")) b.fwhm = j["fwhm_nm"].get<std::vector<double>>();
    if (j.contains("classes")) {
        b.classes.clear();
        for (const auto& cj : j["classes"]) {
            PhantomClassSpec c;
            c.name = cj.at("name").get<std::string>();
            c.spectrum = cj.at("spectrum").get<std::vector<double>>();
            c.texture_amplitude = cj.value("texture_amplitude", 0.0);
            c.texture_scale = cj.value("texture_scale", 8.0);
            b.classes.push_back(std::move(c));
        }
    }
    b.noise_sigma = j.value("noise_sigma", b.noise_sigma);
    b.specular_discs = j.value("specular_discs", b.specular_discs);
    b.specular_radius = j.value("specular_radius", b.specular_radius);
    b.dark_level = j.value("dark_level", b.dark_level);
    b.white_level = j.value("white_level", b.white_level);
    b.sites_min = j.value("sites_min", b.sites_min);
    b.sites_max = j.value("sites_max", b.sites_max);
    b.seed = j.value("seed", b.seed);
    spec.train_images = j.value("train_images", spec.train_images);
    spec.test_images = j.value("test_images", spec.test_images);
    spec.train_subjects = j.value("train_subjects", spec.train_subjects);
    spec.test_subjects = j.value("test_subjects", spec.test_subjects);
    spec.base.validate();
    return spec;
}

// Writes a complete phantom dataset (stacks, ground truth, calibration,
// manifest). Deterministic in the spec seed; images are assigned to
// synthetic subjects so the split stays subject-level.
inline DatasetManifest synth_dataset(const PhantomDatasetSpec& spec, const fs::path& out_dir,
                                     int jobs = 0) {
    spec.base.validate();
    if (spec.train_images < 1 || spec.test_images < 0)
        throw ConfigError("synth_dataset: bad image counts");
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "ground_truth");

    DatasetManifest manifest;
    manifest.root = out_dir;
    for (const auto& c : spec.base.classes) manifest.classes.push_back(c.name);
    manifest.wavelengths = spec.base.wavelengths;
    manifest.fwhm = spec.base.fwhm;
    manifest.dark_dir = "calibration/dark";
    manifest.white_dir = "calibration/white";

    const int total = spec.train_images + spec.test_images;
    std::vector<ImageEntry> entries(total);
    struct Slot {
        std::string split;
        std::string subject;
    };
    std::vector<Slot> slots(total);
    for (int i = 0; i < spec.train_images; ++i)
        slots[i] = {"train", "subject_" + std::to_string(i % std::max(1, spec.train_subjects))};
    for (int i = 0; i < spec.test_images; ++i)
        slots[spec.train_images + i] = {
            "test", "subject_" + std::to_string(spec.train_subjects +
                                                i % std::max(1, spec.test_subjects))};

    CalibrationPair shared_calib;
    parallel_for(0, total, jobs, [&](int i) {
        PhantomSpec img_spec = spec.base;
        img_spec.seed = mix_seed(spec.base.seed, static_cast<uint64_t>(i));
        const PhantomImage phantom = generate_phantom(img_spec);
        char id[32];
        std::snprintf(id, sizeof(id), "img_%03d", i);
        ImageEntry e;
        e.id = id;
        e.subject = slots[i].subject;
        e.split = slots[i].split;
        e.stack = std::string("images/") + id;
        e.ground_truth = std::string("ground_truth/") + id + ".png";
        write_stack(out_dir / e.stack, phantom.raw);
        write_ground_truth(out_dir / e.ground_truth, phantom.truth,
                           static_cast<int>(manifest.classes.size()));
        entries[i] = std::move(e);
        if (i == 0) shared_calib = phantom.calibration;
    });
    manifest.images = std::move(entries);
    write_calibration(out_dir / "calibration", shared_calib);
    write_labels_json(out_dir / "ground_truth" / "labels.json", manifest.classes);
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

} // namespace spectag
