#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "spectag/confidence.hpp"
#include "spectag/dataset.hpp"
#include "spectag/features.hpp"
#include "spectag/image.hpp"
#include "spectag/multiclass.hpp"
#include "spectag/stack_io.hpp"
#include "spectag/superpixel.hpp"

namespace spectag {

struct SuperpixelPrediction {
    int32_t spx_id = -1;
    bool no_prediction = false; // degenerate superpixel, excluded everywhere
    int predicted = -1;         // argmax of probabilities
    std::vector<double> probabilities;
    double score_gc = 0.0;
    double score_ppci = 0.0;
    double score_max = 0.0;
    bool confident = false; // per the configured metric and tau
    int gt_class = kUnlabeled;
    bool gt_mixed = false;          // majority below the mixed threshold
    double gt_majority = 0.0;       // majority fraction over labeled pixels
    int region_size = 0;
    int64_t usable_pixels = 0;

    double score(ConfidenceMetric metric) const {
        switch (metric) {
            case ConfidenceMetric::kGini: return score_gc;
            case ConfidenceMetric::kPpci: return score_ppci;
            case ConfidenceMetric::kMax: return score_max;
        }
        return score_gc;
    }
};

struct ClassifiedImage {
    std::string image_id;
    SuperpixelSegmentation segmentation;
    PixelMask mask;
    std::vector<SuperpixelPrediction> predictions;
    std::set<int> truth_tags;
    int degenerate_count = 0;
};

// Full per-image pipeline: normalize -> mask -> diffuse -> segment (on the
// simulated RGB) -> features -> probabilities -> confidence.
inline ClassifiedImage classify_image(const ChannelStack& raw, const CalibrationPair& calib,
                                      const MulticlassModel& model, const PipelineConfig& cfg,
                                      const GroundTruth* gt = nullptr) {
    ClassifiedImage out;
    const ChannelStack sr = normalize_reflectance(raw, calib);
    const std::array<int, 3> rgb_idx = rgb_band_indices(sr, cfg.rgb_wavelengths);
    out.mask = mask_specular(sr, rgb_idx, cfg.v_threshold);

    ChannelStack filtered = sr;
    for (Grid& channel : filtered.channels)
        channel = anisotropic_diffusion(channel, cfg.diffusion_iterations, cfg.diffusion_kappa,
                                        cfg.diffusion_step, &out.mask);

    const ChannelStack rgb = simulate_rgb(filtered, rgb_idx);
    out.segmentation = lsc_segment(rgb, cfg.avg_size, cfg.compactness);

    const SpxFeatures feats = assemble_features(filtered, out.segmentation, out.mask, cfg.lbp);
    out.degenerate_count = static_cast<int>(feats.degenerate_ids.size());
    const std::vector<int64_t> usable = region_stats(out.segmentation, out.mask);

    if (gt) {
        if (gt->width != raw.width || gt->height != raw.height)
            throw DataError("classify_image: ground-truth dimensions differ");
        for (int l : gt->labels)
            if (l != kUnlabeled && l >= model.class_count())
                throw DataError("classify_image: ground-truth class id exceeds model classes");
        for (int l : gt->labels)
            if (l != kUnlabeled) out.truth_tags.insert(l);
    }

    out.predictions.resize(out.segmentation.count);
    for (int id = 0; id < out.segmentation.count; ++id) {
        SuperpixelPrediction& pred = out.predictions[id];
        pred.spx_id = id;
        pred.no_prediction = true;
        pred.region_size = static_cast<int>(out.segmentation.regions[id].size());
        pred.usable_pixels = usable[id];
        if (gt) {
            std::map<int, int64_t> counts;
            int64_t labeled = 0;
            for (int32_t p : out.segmentation.regions[id]) {
                const int l = gt->labels[static_cast<size_t>(p)];
                if (l == kUnlabeled) continue;
                ++counts[l];
                ++labeled;
            }
            if (labeled > 0) {
                auto best = counts.begin();
                for (auto it = counts.begin(); it != counts.end(); ++it)
                    if (it->second > best->second) best = it;
                pred.gt_class = best->first;
                pred.gt_majority = static_cast<double>(best->second) / labeled;
                pred.gt_mixed = pred.gt_majority < cfg.majority_fraction;
            }
        }
    }
    for (size_t k = 0; k < feats.spx_ids.size(); ++k) {
        SuperpixelPrediction& pred = out.predictions[feats.spx_ids[k]];
        pred.no_prediction = false;
        pred.probabilities = predict_proba(model, feats.vectors[k]);
        pred.predicted = predict_class(pred.probabilities);
        pred.score_gc = gini_coefficient(pred.probabilities);
        pred.score_ppci = ppci(pred.probabilities);
        pred.score_max = max_confidence(pred.probabilities);
        pred.confident = pred.score(cfg.metric) > cfg.tau;
    }
    return out;
}

struct ImageTags {
    std::set<int> tags;
    std::set<int> truth;
    bool abstained = false; // no confident superpixel at all
};

// Tag set from confident superpixels only; tau absent means the Base case
// (every prediction counts).
inline ImageTags tag_image(const std::vector<SuperpixelPrediction>& preds, ConfidenceMetric metric,
                           std::optional<double> tau) {
    ImageTags tags;
    for (const auto& p : preds) {
        if (p.no_prediction) continue;
        if (tau && !(p.score(metric) > *tau)) continue;
        tags.tags.insert(p.predicted);
    }
    tags.abstained = tags.tags.empty();
    return tags;
}

// Ratio of correctly classified confident superpixels to all confident ones;
// absent when nothing is confident.
inline std::optional<double> acc_spx(const std::vector<const SuperpixelPrediction*>& preds,
                                     ConfidenceMetric metric, std::optional<double> tau) {
    int64_t confident = 0, correct = 0;
    for (const auto* p : preds) {
        if (p->no_prediction || p->gt_class == kUnlabeled) continue;
        if (tau && !(p->score(metric) > *tau)) continue;
        ++confident;
        correct += p->predicted == p->gt_class;
    }
    if (confident == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(confident);
}

inline std::optional<double> acc_spx(const std::vector<SuperpixelPrediction>& preds,
                                     ConfidenceMetric metric, std::optional<double> tau) {
    std::vector<const SuperpixelPrediction*> ptrs;
    ptrs.reserve(preds.size());
    for (const auto& p : preds) ptrs.push_back(&p);
    return acc_spx(ptrs, metric, tau);
}

struct TagAccuracy {
    std::optional<double> recall;    // mean |pred ∩ truth| / |truth|
    std::optional<double> precision; // auxiliary: mean |pred ∩ truth| / |pred|
    int abstained_images = 0;        // excluded from the means
    int empty_truth_images = 0;      // excluded with a warning upstream
};

inline TagAccuracy acc_tag(const std::vector<ImageTags>& images) {
    TagAccuracy out;
    double recall_sum = 0.0, precision_sum = 0.0;
    int used = 0;
    for (const auto& img : images) {
        if (img.truth.empty()) {
            ++out.empty_truth_images;
            continue;
        }
        if (img.abstained) {
            ++out.abstained_images;
            continue;
        }
        int64_t inter = 0;
        for (int t : img.tags) inter += img.truth.count(t);
        recall_sum += static_cast<double>(inter) / static_cast<double>(img.truth.size());
        precision_sum += static_cast<double>(inter) / static_cast<double>(img.tags.size());
        ++used;
    }
    if (used > 0) {
        out.recall = recall_sum / used;
        out.precision = precision_sum / used;
    }
    return out;
}

struct ConfusionMatrix {
    std::vector<std::vector<int64_t>> counts;  // rows: truth, cols: prediction
    std::vector<std::vector<double>> percent;  // rows normalized to 100
};

inline ConfusionMatrix confusion_matrix(const std::vector<const SuperpixelPrediction*>& preds,
                                        int n_classes, ConfidenceMetric metric,
                                        std::optional<double> tau) {
    ConfusionMatrix cm;
    cm.counts.assign(n_classes, std::vector<int64_t>(n_classes, 0));
    cm.percent.assign(n_classes, std::vector<double>(n_classes, 0.0));
    for (const auto* p : preds) {
        if (p->no_prediction || p->gt_class == kUnlabeled) continue;
        if (tau && !(p->score(metric) > *tau)) continue;
        if (p->gt_class < n_classes && p->predicted >= 0 && p->predicted < n_classes)
            ++cm.counts[p->gt_class][p->predicted];
    }
    for (int r = 0; r < n_classes; ++r) {
        int64_t row = 0;
        for (int64_t v : cm.counts[r]) row += v;
        if (row == 0) continue;
        for (int c = 0; c < n_classes; ++c)
            cm.percent[r][c] = 100.0 * static_cast<double>(cm.counts[r][c]) / row;
    }
    return cm;
}

// Type-7 quantile (linear interpolation), matching common statistics stacks.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double pos = q * (values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double median(const std::vector<double>& values) { return quantile(values, 0.5); }
inline double interquartile_range(const std::vector<double>& values) {
    return quantile(values, 0.75) - quantile(values, 0.25);
}

struct TauRow {
    std::optional<double> tau; // absent = Base case
    std::optional<double> pooled_acc;
    std::optional<double> median_acc;
    std::optional<double> iqr_acc;
    std::optional<double> mean_acc;
    double confident_fraction = 1.0;
    std::optional<double> acc_tag_recall;
    std::optional<double> acc_tag_precision;
    int abstained_images = 0;
    int images_with_acc = 0;
};

// Statistics for one threshold over per-image prediction sets.
inline TauRow evaluate_threshold(const std::vector<ClassifiedImage>& images,
                                 ConfidenceMetric metric, std::optional<double> tau) {
    TauRow row;
    row.tau = tau;
    std::vector<double> per_image;
    std::vector<const SuperpixelPrediction*> pooled;
    std::vector<ImageTags> tags;
    int64_t n_confident = 0, n_total = 0;
    for (const auto& img : images) {
        for (const auto& p : img.predictions) {
            if (p.no_prediction) continue;
            pooled.push_back(&p);
            ++n_total;
            n_confident += !tau || p.score(metric) > *tau;
        }
        const auto acc = acc_spx(img.predictions, metric, tau);
        if (acc) per_image.push_back(*acc);
        ImageTags t = tag_image(img.predictions, metric, tau);
        t.truth = img.truth_tags;
        tags.push_back(std::move(t));
    }
    row.pooled_acc = acc_spx(pooled, metric, tau);
    row.images_with_acc = static_cast<int>(per_image.size());
    if (!per_image.empty()) {
        row.median_acc = median(per_image);
        row.iqr_acc = interquartile_range(per_image);
        double mean = 0.0;
        for (double a : per_image) mean += a;
        row.mean_acc = mean / per_image.size();
    }
    row.confident_fraction =
        n_total > 0 ? static_cast<double>(n_confident) / static_cast<double>(n_total) : 0.0;
    const TagAccuracy ta = acc_tag(tags);
    row.acc_tag_recall = ta.recall;
    row.acc_tag_precision = ta.precision;
    row.abstained_images = ta.abstained_images;
    return row;
}

struct EvaluationReport {
    std::string metric;
    double tau = 0.9;
    TauRow base;
    std::vector<TauRow> tau_rows;
    ConfusionMatrix confusion;       // at the configured tau
    ConfusionMatrix confusion_base;  // unfiltered
    int64_t total_superpixels = 0;
    int64_t degenerate_superpixels = 0;
    int64_t mixed_superpixels = 0;
    int rejected_images = 0; // calibration failures
    std::vector<std::string> image_ids;
};

inline EvaluationReport evaluate_images(const std::vector<ClassifiedImage>& images, int n_classes,
                                        ConfidenceMetric metric, double tau,
                                        const std::vector<double>& tau_grid) {
    EvaluationReport report;
    report.metric = metric_name(metric);
    report.tau = tau;
    report.base = evaluate_threshold(images, metric, std::nullopt);
    for (double t : tau_grid) report.tau_rows.push_back(evaluate_threshold(images, metric, t));
    std::vector<const SuperpixelPrediction*> pooled;
    for (const auto& img : images) {
        report.image_ids.push_back(img.image_id);
        report.degenerate_superpixels += img.degenerate_count;
        for (const auto& p : img.predictions) {
            ++report.total_superpixels;
            report.mixed_superpixels += p.gt_mixed;
            if (!p.no_prediction) pooled.push_back(&p);
        }
    }
    report.confusion = confusion_matrix(pooled, n_classes, metric, tau);
    report.confusion_base = confusion_matrix(pooled, n_classes, metric, std::nullopt);
    return report;
}

struct LooOrganResult {
    int organ = -1;
    std::string organ_name;
    double pct_lc_excluded = 0.0; // %LC over superpixels of the held-out organ
    double pct_lc_included = 0.0; // %LC over superpixels of the trained organs
    int64_t n_excluded = 0;
    int64_t n_included = 0;
};

// Leave-one-organ-out: for each organ, retrain without it and measure the
// fraction of low-confidence superpixels (score <= tau) separately on the
// held-out organ and on the remaining organs.
inline std::vector<LooOrganResult> leave_one_organ_out(
    const std::vector<std::vector<double>>& train_features, const std::vector<int>& train_labels,
    const std::vector<std::string>& classes,
    const std::vector<std::vector<double>>& test_features, const std::vector<int>& test_labels,
    const TrainOptions& opts, ConfidenceMetric metric, double tau) {
    const int j_count = static_cast<int>(classes.size());
    if (j_count < 3) throw DataError("leave_one_organ_out: need at least 3 classes");
    if (test_features.size() != test_labels.size())
        throw DataError("leave_one_organ_out: test feature/label count mismatch");

    std::vector<LooOrganResult> results;
    for (int organ = 0; organ < j_count; ++organ) {
        std::vector<std::vector<double>> feats;
        std::vector<int> labels;
        std::vector<std::string> reduced;
        std::vector<int> remap(j_count, -1);
        for (int c = 0; c < j_count; ++c) {
            if (c == organ) continue;
            remap[c] = static_cast<int>(reduced.size());
            reduced.push_back(classes[c]);
        }
        for (size_t i = 0; i < train_features.size(); ++i) {
            if (train_labels[i] == organ) continue;
            feats.push_back(train_features[i]);
            labels.push_back(remap[train_labels[i]]);
        }
        const MulticlassModel model = fit(feats, labels, reduced, opts);

        LooOrganResult res;
        res.organ = organ;
        res.organ_name = classes[organ];
        int64_t lc_ex = 0, lc_in = 0;
        for (size_t i = 0; i < test_features.size(); ++i) {
            if (test_labels[i] == kUnlabeled) continue;
            const std::vector<double> p = predict_proba(model, test_features[i]);
            const bool low_confidence = !(confidence_score(metric, p) > tau);
            if (test_labels[i] == organ) {
                ++res.n_excluded;
                lc_ex += low_confidence;
            } else {
                ++res.n_included;
                lc_in += low_confidence;
            }
        }
        res.pct_lc_excluded =
            res.n_excluded > 0 ? 100.0 * static_cast<double>(lc_ex) / res.n_excluded : 0.0;
        res.pct_lc_included =
            res.n_included > 0 ? 100.0 * static_cast<double>(lc_in) / res.n_included : 0.0;
        results.push_back(std::move(res));
    }
    return results;
}

// --- report serialization --------------------------------------------------

namespace report_detail {

inline nlohmann::json opt(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

inline nlohmann::json tau_row_to_json(const TauRow& row) {
    nlohmann::json j;
    j["tau"] = row.tau ? nlohmann::json(*row.tau) : nlohmann::json("base");
    j["acc_spx_pooled"] = opt(row.pooled_acc);
    j["acc_spx_median"] = opt(row.median_acc);
    j["acc_spx_iqr"] = opt(row.iqr_acc);
    j["acc_spx_mean"] = opt(row.mean_acc);
    j["confident_fraction"] = row.confident_fraction;
    j["acc_tag"] = opt(row.acc_tag_recall);
    j["acc_tag_precision"] = opt(row.acc_tag_precision);
    j["abstained_images"] = row.abstained_images;
    j["images_with_acc"] = row.images_with_acc;
    return j;
}

} // namespace report_detail

inline nlohmann::json report_to_json(const EvaluationReport& report,
                                     const std::vector<std::string>& classes,
                                     const std::string& timestamp) {
    nlohmann::json j;
    j["format"] = "spectag-report/1";
    j["generated_at"] = timestamp; // isolated header field; everything else is deterministic
    j["metric"] = report.metric;
    j["tau"] = report.tau;
    j["classes"] = classes;
    j["base"] = report_detail::tau_row_to_json(report.base);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.tau_rows) rows.push_back(report_detail::tau_row_to_json(row));
    j["tau_sweep"] = std::move(rows);
    j["confusion_at_tau"] = {{"counts", report.confusion.counts},
                             {"percent", report.confusion.percent}};
    j["confusion_base"] = {{"counts", report.confusion_base.counts},
                           {"percent", report.confusion_base.percent}};
    j["counts"] = {{"total_superpixels", report.total_superpixels},
                   {"degenerate_superpixels", report.degenerate_superpixels},
                   {"mixed_superpixels", report.mixed_superpixels},
                   {"rejected_images", report.rejected_images},
                   {"images", report.image_ids.size()}};
    j["images"] = report.image_ids;
    return j;
}

inline void write_sweep_csv(const EvaluationReport& report, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_sweep_csv: cannot open " + path.string());
    out << "tau,acc_spx_pooled,acc_spx_median,acc_spx_iqr,acc_spx_mean,confident_fraction,"
           "acc_tag,abstained_images\n";
    auto emit = [&](const TauRow& row) {
        auto cell = [&](const std::optional<double>& v) {
            return v ? std::to_string(*v) : std::string();
        };
        out << (row.tau ? std::to_string(*row.tau) : "base") << "," << cell(row.pooled_acc) << ","
            << cell(row.median_acc) << "," << cell(row.iqr_acc) << "," << cell(row.mean_acc) << ","
            << row.confident_fraction << "," << cell(row.acc_tag_recall) << ","
            << row.abstained_images << "\n";
    };
    emit(report.base);
    for (const auto& row : report.tau_rows) emit(row);
}

inline void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes,
                                const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_confusion_csv: cannot open " + path.string());
    out << "truth\\prediction";
    for (const auto& c : classes) out << "," << c;
    out << "\n";
    for (size_t r = 0; r < classes.size(); ++r) {
        out << classes[r];
        for (size_t c = 0; c < classes.size(); ++c) out << "," << cm.percent[r][c];
        out << "\n";
    }
}

// --- overlays ---------------------------------------------------------------

// Classification map: class colors for confident superpixels, gray for
// low-confidence, dark gray for no-prediction regions, black for masked
// pixels.
inline void write_classification_overlay(const fs::path& path, const ClassifiedImage& img) {
    const int w = img.segmentation.width;
    const int h = img.segmentation.height;
    std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3, 0);
    for (size_t p = 0; p < img.segmentation.labels.size(); ++p) {
        pngio::Rgb color = {128, 128, 128};
        const auto& pred = img.predictions[img.segmentation.labels[p]];
        if (pred.no_prediction)
            color = {64, 64, 64};
        else if (pred.confident)
            color = class_color(pred.predicted);
        if (img.mask.masked(p)) color = {0, 0, 0};
        rgb[p * 3] = color[0];
        rgb[p * 3 + 1] = color[1];
        rgb[p * 3 + 2] = color[2];
    }
    pngio::write_rgb8(path.string(), w, h, rgb);
}

// Confidence map: score-scaled grayscale with masked / no-prediction pixels
// in a magenta sentinel.
inline void write_confidence_overlay(const fs::path& path, const ClassifiedImage& img,
                                     ConfidenceMetric metric) {
    const int w = img.segmentation.width;
    const int h = img.segmentation.height;
    std::vector<uint8_t> rgb(static_cast<size_t>(w) * h * 3, 0);
    for (size_t p = 0; p < img.segmentation.labels.size(); ++p) {
        const auto& pred = img.predictions[img.segmentation.labels[p]];
        uint8_t r, g, b;
        if (img.mask.masked(p) || pred.no_prediction) {
            r = 255;
            g = 0;
            b = 255;
        } else {
            const double s = std::clamp(pred.score(metric), 0.0, 1.0);
            r = g = b = static_cast<uint8_t>(std::lround(s * 255.0));
        }
        rgb[p * 3] = r;
        rgb[p * 3 + 1] = g;
        rgb[p * 3 + 2] = b;
    }
    pngio::write_rgb8(path.string(), w, h, rgb);
}

// Superpixel boundary overlay for debugging segmentations.
inline void write_boundary_overlay(const fs::path& path, const SuperpixelSegmentation& seg) {
    std::vector<uint8_t> rgb(static_cast<size_t>(seg.width) * seg.height * 3, 0);
    for (int y = 0; y < seg.height; ++y)
        for (int x = 0; x < seg.width; ++x) {
            const size_t p = static_cast<size_t>(y) * seg.width + x;
            const bool boundary =
                (x + 1 < seg.width && seg.labels[p] != seg.labels[p + 1]) ||
                (y + 1 < seg.height && seg.labels[p] != seg.labels[p + seg.width]);
            const uint8_t v = boundary ? 255 : 32;
            rgb[p * 3] = v;
            rgb[p * 3 + 1] = v;
            rgb[p * 3 + 2] = v;
        }
    pngio::write_rgb8(path.string(), seg.width, seg.height, rgb);
}

} // namespace spectag
