#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "spectag/dataset.hpp"
#include "spectag/log.hpp"
#include "spectag/parallel.hpp"
#include "spectag/pipeline.hpp"

namespace spectag {

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Per-image features with superpixel ground truth, for training and dumps.
struct ImageFeatures {
    std::string image_id;
    std::vector<int32_t> spx_ids;
    std::vector<std::vector<double>> vectors;
    std::vector<int> gt_labels;   // majority label per vector, kUnlabeled if none
    std::vector<bool> gt_mixed;   // majority below the mixed threshold
    std::set<int> truth_tags;
    int degenerate_count = 0;
};

// Runs the preprocessing + feature half of the pipeline (no classifier).
inline ImageFeatures extract_image_features(const ChannelStack& raw, const CalibrationPair& calib,
                                            const PipelineConfig& cfg,
                                            const GroundTruth* gt = nullptr) {
    const ChannelStack sr = normalize_reflectance(raw, calib);
    const std::array<int, 3> rgb_idx = rgb_band_indices(sr, cfg.rgb_wavelengths);
    const PixelMask mask = mask_specular(sr, rgb_idx, cfg.v_threshold);
    ChannelStack filtered = sr;
    for (Grid& channel : filtered.channels)
        channel = anisotropic_diffusion(channel, cfg.diffusion_iterations, cfg.diffusion_kappa,
                                        cfg.diffusion_step, &mask);
    const ChannelStack rgb = simulate_rgb(filtered, rgb_idx);
    const SuperpixelSegmentation seg = lsc_segment(rgb, cfg.avg_size, cfg.compactness);
    const SpxFeatures feats = assemble_features(filtered, seg, mask, cfg.lbp);

    ImageFeatures out;
    out.spx_ids = feats.spx_ids;
    out.vectors = feats.vectors;
    out.degenerate_count = static_cast<int>(feats.degenerate_ids.size());
    out.gt_labels.assign(feats.spx_ids.size(), kUnlabeled);
    out.gt_mixed.assign(feats.spx_ids.size(), false);
    if (gt) {
        if (gt->width != raw.width || gt->height != raw.height)
            throw DataError("extract_image_features: ground-truth dimensions differ");
        for (int l : gt->labels)
            if (l != kUnlabeled) out.truth_tags.insert(l);
        for (size_t k = 0; k < feats.spx_ids.size(); ++k) {
            std::map<int, int64_t> counts;
            int64_t labeled = 0;
            for (int32_t p : seg.regions[feats.spx_ids[k]]) {
                const int l = gt->labels[static_cast<size_t>(p)];
                if (l == kUnlabeled) continue;
                ++counts[l];
                ++labeled;
            }
            if (labeled == 0) continue;
            auto best = counts.begin();
            for (auto it = counts.begin(); it != counts.end(); ++it)
                if (it->second > best->second) best = it;
            out.gt_labels[k] = best->first;
            out.gt_mixed[k] =
                static_cast<double>(best->second) / labeled < cfg.majority_fraction;
        }
    }
    return out;
}

// Loads one manifest entry; rgb_mode reduces the stack and calibration to the
// configured simulated-RGB bands before any processing.
struct LoadedImage {
    ChannelStack raw;
    GroundTruth gt;
    bool has_gt = false;
};

inline LoadedImage load_entry(const DatasetManifest& manifest, const ImageEntry& entry,
                              const PipelineConfig& cfg, bool rgb_mode) {
    LoadedImage img;
    img.raw = read_stack(manifest.resolve(entry.stack));
    if (rgb_mode) img.raw = simulate_rgb(img.raw, rgb_band_indices(img.raw, cfg.rgb_wavelengths));
    if (!entry.ground_truth.empty()) {
        img.gt = read_ground_truth(manifest.resolve(entry.ground_truth));
        img.has_gt = true;
    }
    return img;
}

inline CalibrationPair load_calibration(const DatasetManifest& manifest,
                                        const PipelineConfig& cfg, bool rgb_mode) {
    CalibrationPair calib =
        read_calibration(manifest.resolve(manifest.dark_dir), manifest.resolve(manifest.white_dir));
    if (rgb_mode) {
        const auto idx = rgb_band_indices(calib.dark, cfg.rgb_wavelengths);
        calib.dark = simulate_rgb(calib.dark, idx);
        calib.white = simulate_rgb(calib.white, idx);
    }
    return calib;
}

inline std::vector<ImageFeatures> extract_split_features(const DatasetManifest& manifest,
                                                         const PipelineConfig& cfg,
                                                         const std::string& split, bool rgb_mode) {
    const auto entries = manifest.split_entries(split);
    if (entries.empty()) throw DataError("dataset has no '" + split + "' images");
    const CalibrationPair calib = load_calibration(manifest, cfg, rgb_mode);
    std::vector<ImageFeatures> out(entries.size());
    parallel_for(0, static_cast<int>(entries.size()), cfg.jobs, [&](int i) {
        const LoadedImage img = load_entry(manifest, *entries[i], cfg, rgb_mode);
        out[i] = extract_image_features(img.raw, calib, cfg, img.has_gt ? &img.gt : nullptr);
        out[i].image_id = entries[i]->id;
    });
    return out;
}

// Flattened training matrix: mixed and unlabeled superpixels are excluded
// from training; testing keeps mixed ones.
inline void flatten_features(const std::vector<ImageFeatures>& images, bool exclude_mixed,
                             std::vector<std::vector<double>>& features, std::vector<int>& labels) {
    for (const auto& img : images)
        for (size_t k = 0; k < img.vectors.size(); ++k) {
            if (img.gt_labels[k] == kUnlabeled) continue;
            if (exclude_mixed && img.gt_mixed[k]) continue;
            features.push_back(img.vectors[k]);
            labels.push_back(img.gt_labels[k]);
        }
}

inline std::vector<ClassifiedImage> classify_split(const DatasetManifest& manifest,
                                                   const PipelineConfig& cfg,
                                                   const MulticlassModel& model,
                                                   const std::string& split, bool rgb_mode,
                                                   int* rejected_images = nullptr) {
    const auto entries = manifest.split_entries(split);
    if (entries.empty()) throw DataError("dataset has no '" + split + "' images");
    const CalibrationPair calib = load_calibration(manifest, cfg, rgb_mode);
    std::vector<std::optional<ClassifiedImage>> slots(entries.size());
    parallel_for(0, static_cast<int>(entries.size()), cfg.jobs, [&](int i) {
        const LoadedImage img = load_entry(manifest, *entries[i], cfg, rgb_mode);
        try {
            ClassifiedImage res =
                classify_image(img.raw, calib, model, cfg, img.has_gt ? &img.gt : nullptr);
            res.image_id = entries[i]->id;
            slots[i] = std::move(res);
        } catch (const CalibrationError& e) {
            log::warn("rejecting image " + entries[i]->id + ": " + e.what());
        }
    });
    std::vector<ClassifiedImage> out;
    int rejected = 0;
    for (auto& s : slots) {
        if (s)
            out.push_back(std::move(*s));
        else
            ++rejected;
    }
    if (rejected_images) *rejected_images = rejected;
    return out;
}

// --- commands ---------------------------------------------------------------

inline void cmd_synth(const std::optional<fs::path>& spec_path, const fs::path& out_dir,
                      std::optional<uint64_t> seed, int jobs) {
    PhantomDatasetSpec spec = spec_path ? load_phantom_spec(*spec_path) : PhantomDatasetSpec();
    if (seed) spec.base.seed = *seed;
    const DatasetManifest manifest = synth_dataset(spec, out_dir, jobs);
    log::info("synthesized " + std::to_string(manifest.images.size()) + " images into " +
              out_dir.string());
}

inline void write_cv_table_csv(const GridSearchResult& grid, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_cv_table_csv: cannot open " + path.string());
    out << "c,gamma,mean_accuracy";
    if (!grid.table.empty())
        for (size_t f = 0; f < grid.table.front().fold_accuracies.size(); ++f)
            out << ",fold" << f;
    out << "\n";
    for (const auto& cell : grid.table) {
        out << cell.box_c << "," << cell.gamma << "," << cell.mean_accuracy;
        for (double a : cell.fold_accuracies) out << "," << a;
        out << "\n";
    }
}

inline fs::path rgb_variant_path(const fs::path& path) {
    fs::path p = path;
    const std::string ext = p.extension().string();
    p.replace_extension();
    return p.concat(".rgb").concat(ext);
}

struct TrainedArtifacts {
    MulticlassModel model;
    GridSearchResult grid;
};

inline TrainedArtifacts train_on_features(const std::vector<ImageFeatures>& images,
                                          const std::vector<std::string>& classes,
                                          const PipelineConfig& cfg) {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    flatten_features(images, /*exclude_mixed=*/true, features, labels);
    if (features.empty()) throw DataError("training split produced no usable superpixels");

    GridSearchOptions gopts;
    gopts.c_grid = cfg.c_grid();
    gopts.gamma_grid = cfg.gamma_grid();
    gopts.folds = cfg.cv_folds;
    gopts.seed = cfg.seed;
    gopts.smo_tol = cfg.smo_tol;
    gopts.jobs = cfg.jobs;
    TrainedArtifacts out;
    out.grid = grid_search(features, labels, static_cast<int>(classes.size()), gopts);
    log::info("grid search selected C=" + std::to_string(out.grid.box_c) +
              " gamma=" + std::to_string(out.grid.gamma) +
              " (cv accuracy " + std::to_string(out.grid.mean_accuracy) + ")");

    TrainOptions topts;
    topts.box_c = out.grid.box_c;
    topts.gamma = out.grid.gamma;
    topts.calibration_folds = cfg.calibration_folds;
    topts.seed = cfg.seed;
    topts.smo_tol = cfg.smo_tol;
    topts.jobs = cfg.jobs;
    out.model = fit(features, labels, classes, topts);
    out.model.meta.c_grid = gopts.c_grid;
    out.model.meta.gamma_grid = gopts.gamma_grid;
    out.model.meta.folds = gopts.folds;
    out.model.meta.seed = gopts.seed;
    out.model.meta.cv_accuracy = out.grid.mean_accuracy;
    return out;
}

inline void cmd_train(const fs::path& manifest_path, const PipelineConfig& cfg,
                      const fs::path& model_out, bool compare_rgb) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    {
        const auto images = extract_split_features(manifest, cfg, "train", /*rgb_mode=*/false);
        const TrainedArtifacts art = train_on_features(images, manifest.classes, cfg);
        save_model(art.model, model_out.string());
        write_cv_table_csv(art.grid, fs::path(model_out).replace_extension(".cv.csv"));
    }
    if (compare_rgb) {
        const auto images = extract_split_features(manifest, cfg, "train", /*rgb_mode=*/true);
        const TrainedArtifacts art = train_on_features(images, manifest.classes, cfg);
        const fs::path rgb_out = rgb_variant_path(model_out);
        save_model(art.model, rgb_out.string());
        write_cv_table_csv(art.grid, fs::path(rgb_out).replace_extension(".cv.csv"));
    }
}

inline EvaluationReport run_eval(const DatasetManifest& manifest, const PipelineConfig& cfg,
                                 const MulticlassModel& model, bool rgb_mode,
                                 const fs::path& out_dir, const std::string& prefix) {
    int rejected = 0;
    const std::vector<ClassifiedImage> images =
        classify_split(manifest, cfg, model, "test", rgb_mode, &rejected);
    EvaluationReport report = evaluate_images(images, model.class_count(), cfg.metric, cfg.tau,
                                              cfg.tau_grid);
    report.rejected_images = rejected;

    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / (prefix + "report.json"));
        if (!out) throw DataError("run_eval: cannot write report");
        out << report_to_json(report, model.classes, iso_timestamp()).dump(1) << "\n";
    }
    write_sweep_csv(report, out_dir / (prefix + "sweep.csv"));
    write_confusion_csv(report.confusion, model.classes, out_dir / (prefix + "confusion.csv"));
    const fs::path overlay_dir = out_dir / "overlays";
    fs::create_directories(overlay_dir);
    for (const auto& img : images) {
        write_classification_overlay(overlay_dir / (prefix + img.image_id + "_classes.png"), img);
        write_confidence_overlay(overlay_dir / (prefix + img.image_id + "_confidence.png"), img,
                                 cfg.metric);
    }
    return report;
}

inline void cmd_eval(const fs::path& manifest_path, const PipelineConfig& cfg,
                     const fs::path& model_path, const fs::path& out_dir, bool compare_rgb) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const MulticlassModel model = load_model(model_path.string());
    run_eval(manifest, cfg, model, /*rgb_mode=*/false, out_dir, "");
    if (compare_rgb) {
        const MulticlassModel rgb_model = load_model(rgb_variant_path(model_path).string());
        run_eval(manifest, cfg, rgb_model, /*rgb_mode=*/true, out_dir, "rgb_");
    }
}

inline void cmd_sweep(const fs::path& manifest_path, const PipelineConfig& cfg,
                      const fs::path& model_path, const fs::path& out_csv) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const MulticlassModel model = load_model(model_path.string());
    int rejected = 0;
    const auto images = classify_split(manifest, cfg, model, "test", false, &rejected);
    EvaluationReport report =
        evaluate_images(images, model.class_count(), cfg.metric, cfg.tau, cfg.tau_grid);
    report.rejected_images = rejected;
    write_sweep_csv(report, out_csv);
}

inline nlohmann::json loo_results_to_json(const std::vector<LooOrganResult>& results,
                                          ConfidenceMetric metric, double tau,
                                          const std::string& timestamp) {
    nlohmann::json rows = nlohmann::json::array();
    double mean_ex = 0.0, mean_in = 0.0;
    for (const auto& r : results) {
        rows.push_back({{"organ", r.organ},
                        {"organ_name", r.organ_name},
                        {"pct_lc_excluded", r.pct_lc_excluded},
                        {"pct_lc_included", r.pct_lc_included},
                        {"n_excluded", r.n_excluded},
                        {"n_included", r.n_included}});
        mean_ex += r.pct_lc_excluded;
        mean_in += r.pct_lc_included;
    }
    nlohmann::json j;
    j["format"] = "spectag-loo-report/1";
    j["generated_at"] = timestamp;
    j["metric"] = metric_name(metric);
    j["tau"] = tau;
    j["organs"] = std::move(rows);
    j["mean_pct_lc_excluded"] = results.empty() ? 0.0 : mean_ex / results.size();
    j["mean_pct_lc_included"] = results.empty() ? 0.0 : mean_in / results.size();
    return j;
}

// Leave-one-organ-out study. Hyperparameters come from a trained model when
// given, otherwise from a fresh grid search on the full training split.
inline std::vector<LooOrganResult> run_loo(const DatasetManifest& manifest,
                                           const PipelineConfig& cfg,
                                           const std::optional<fs::path>& model_path,
                                           double tau) {
    const auto train_images = extract_split_features(manifest, cfg, "train", false);
    const auto test_images = extract_split_features(manifest, cfg, "test", false);
    std::vector<std::vector<double>> train_features, test_features;
    std::vector<int> train_labels, test_labels;
    flatten_features(train_images, /*exclude_mixed=*/true, train_features, train_labels);
    flatten_features(test_images, /*exclude_mixed=*/false, test_features, test_labels);

    TrainOptions topts;
    topts.calibration_folds = cfg.calibration_folds;
    topts.seed = cfg.seed;
    topts.smo_tol = cfg.smo_tol;
    topts.jobs = cfg.jobs;
    if (model_path) {
        const MulticlassModel model = load_model(model_path->string());
        topts.box_c = model.box_c;
        topts.gamma = model.gamma;
    } else {
        GridSearchOptions gopts;
        gopts.c_grid = cfg.c_grid();
        gopts.gamma_grid = cfg.gamma_grid();
        gopts.folds = cfg.cv_folds;
        gopts.seed = cfg.seed;
        gopts.smo_tol = cfg.smo_tol;
        gopts.jobs = cfg.jobs;
        const GridSearchResult grid = grid_search(
            train_features, train_labels, static_cast<int>(manifest.classes.size()), gopts);
        topts.box_c = grid.box_c;
        topts.gamma = grid.gamma;
    }
    return leave_one_organ_out(train_features, train_labels, manifest.classes, test_features,
                               test_labels, topts, cfg.metric, tau);
}

inline void cmd_loo(const fs::path& manifest_path, const PipelineConfig& cfg,
                    const std::optional<fs::path>& model_path, const fs::path& out_path,
                    double tau) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const auto results = run_loo(manifest, cfg, model_path, tau);
    std::ofstream out(out_path);
    if (!out) throw DataError("cmd_loo: cannot open " + out_path.string());
    out << loo_results_to_json(results, cfg.metric, tau, iso_timestamp()).dump(1) << "\n";
}

inline void cmd_features(const fs::path& manifest_path, const PipelineConfig& cfg,
                         const std::string& split, const fs::path& out_csv) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const auto images = extract_split_features(manifest, cfg, split, false);
    std::ofstream out(out_csv);
    if (!out) throw DataError("cmd_features: cannot open " + out_csv.string());
    const size_t dim = [&]() -> size_t {
        for (const auto& img : images)
            if (!img.vectors.empty()) return img.vectors.front().size();
        return 0;
    }();
    out << "image_id,spx_id";
    for (size_t d = 0; d < dim; ++d) out << ",f" << d;
    out << ",gt_label\n";
    out.precision(17);
    for (const auto& img : images)
        for (size_t k = 0; k < img.vectors.size(); ++k) {
            out << img.image_id << "," << img.spx_ids[k];
            for (double v : img.vectors[k]) out << "," << v;
            out << "," << img.gt_labels[k] << "\n";
        }
}

} // namespace spectag
