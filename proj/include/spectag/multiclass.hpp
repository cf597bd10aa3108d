#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "spectag/coupling.hpp"
#include "spectag/errors.hpp"
#include "spectag/parallel.hpp"
#include "spectag/platt.hpp"
#include "spectag/seeding.hpp"
#include "spectag/svm.hpp"

namespace spectag {

// 10 values evenly spaced on the log10 scale between 10^emin and 10^emax.
inline std::vector<double> log10_grid(double emin, double emax, int count) {
    if (count < 1) throw ConfigError("log10_grid: count must be >= 1");
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = std::pow(10.0, emin);
        return grid;
    }
    for (int k = 0; k < count; ++k)
        grid[k] = std::pow(10.0, emin + k * (emax - emin) / (count - 1));
    return grid;
}

inline std::vector<double> default_c_grid() { return log10_grid(1.0, 10.0, 10); }
inline std::vector<double> default_gamma_grid() { return log10_grid(-8.0, 1.0, 10); }

// Seeded stratified fold assignment; samples of each class are shuffled and
// dealt round-robin. Throws when any fold's training portion misses a class.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int n_classes, int folds,
                                         uint64_t seed) {
    if (folds < 2) throw ConfigError("stratified_folds: need at least 2 folds");
    std::vector<std::vector<int>> per_class(n_classes);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw DataError("stratified_folds: label out of range");
        per_class[labels[i]].push_back(static_cast<int>(i));
    }
    std::vector<int> fold_of(labels.size(), -1);
    std::mt19937_64 rng(seed);
    for (int c = 0; c < n_classes; ++c) {
        auto& idx = per_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = static_cast<int>(k % folds);
    }
    // every fold's training part must still contain every class
    for (int f = 0; f < folds; ++f)
        for (int c = 0; c < n_classes; ++c) {
            bool found = false;
            for (int i : per_class[c])
                if (fold_of[i] != f) {
                    found = true;
                    break;
                }
            if (!found)
                throw DataError("stratification error: training part of fold " +
                                std::to_string(f) + " lacks class " + std::to_string(c));
        }
    return fold_of;
}

struct PairModel {
    BinarySvmModel svm;
    SigmoidCalibration calibration;
};

struct TrainingMeta {
    std::vector<double> c_grid;
    std::vector<double> gamma_grid;
    int folds = 0;
    uint64_t seed = 0;
    double cv_accuracy = 0.0;
};

struct MulticlassModel {
    std::vector<std::string> classes;
    Standardizer standardizer;
    double box_c = 0.0;
    double gamma = 0.0;
    std::vector<PairModel> pairs; // one per unordered class pair, (i<j) order
    TrainingMeta meta;

    int class_count() const { return static_cast<int>(classes.size()); }
};

struct TrainOptions {
    double box_c = 1e4;
    double gamma = 1e-5;
    int calibration_folds = 5; // internal cross-fit for sigmoid decisions
    uint64_t seed = 13;
    double smo_tol = 1e-3;
    int jobs = 0;
};

// Trains the one-against-one model: a global standardizer, then per class
// pair a binary SVM plus a sigmoid calibrated on cross-fitted decision
// values.
inline MulticlassModel fit(const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels,
                           const std::vector<std::string>& classes, const TrainOptions& opts) {
    const int j_count = static_cast<int>(classes.size());
    if (j_count < 2) throw DataError("fit: need at least 2 classes");
    if (features.size() != labels.size() || features.empty())
        throw DataError("fit: feature/label count mismatch");
    std::vector<int> class_count(j_count, 0);
    for (int l : labels) {
        if (l < 0 || l >= j_count) throw DataError("fit: label out of range");
        ++class_count[l];
    }
    for (int c = 0; c < j_count; ++c)
        if (class_count[c] < 2)
            throw DataError("fit: class '" + classes[c] + "' has fewer than 2 samples");

    MulticlassModel model;
    model.classes = classes;
    model.box_c = opts.box_c;
    model.gamma = opts.gamma;
    model.standardizer.fit(features);
    std::vector<std::vector<double>> xs(features.size());
    for (size_t i = 0; i < features.size(); ++i) xs[i] = model.standardizer.apply(features[i]);

    struct PairTask {
        int pos, neg;
    };
    std::vector<PairTask> tasks;
    for (int i = 0; i < j_count; ++i)
        for (int j = i + 1; j < j_count; ++j) tasks.push_back({i, j});
    model.pairs.resize(tasks.size());

    parallel_for(0, static_cast<int>(tasks.size()), opts.jobs, [&](int t) {
        const auto [pos, neg] = tasks[t];
        std::vector<int> idx;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == pos || labels[i] == neg) idx.push_back(static_cast<int>(i));
        const int m = static_cast<int>(idx.size());
        std::vector<int8_t> y(m);
        for (int k = 0; k < m; ++k) y[k] = labels[idx[k]] == pos ? 1 : -1;

        // pair kernel matrix, shared by the calibration folds and final fit
        std::vector<double> kmat(static_cast<size_t>(m) * m);
        for (int a = 0; a < m; ++a) {
            kmat[static_cast<size_t>(a) * m + a] = 1.0;
            for (int b = a + 1; b < m; ++b) {
                const double k =
                    std::exp(-opts.gamma * squared_distance(xs[idx[a]], xs[idx[b]]));
                kmat[static_cast<size_t>(a) * m + b] = k;
                kmat[static_cast<size_t>(b) * m + a] = k;
            }
        }

        // cross-fitted decision values for the sigmoid
        int pos_n = 0, neg_n = 0;
        for (int8_t v : y) (v > 0 ? pos_n : neg_n) += 1;
        const int folds = std::max(2, std::min({opts.calibration_folds, pos_n, neg_n}));
        std::vector<int> pair_labels(m);
        for (int k = 0; k < m; ++k) pair_labels[k] = y[k] > 0 ? 0 : 1;
        const std::vector<int> fold_of =
            stratified_folds(pair_labels, 2, folds, mix_seed(opts.seed, static_cast<uint64_t>(t)));
        std::vector<double> cal_decisions(m, 0.0);
        SmoOptions smo_opts;
        smo_opts.tol = opts.smo_tol;
        smo_opts.throw_on_max = false; // calibration folds tolerate capped solves
        for (int f = 0; f < folds; ++f) {
            std::vector<int> sub;
            for (int k = 0; k < m; ++k)
                if (fold_of[k] != f) sub.push_back(k);
            std::vector<int8_t> ysub(sub.size());
            for (size_t k = 0; k < sub.size(); ++k) ysub[k] = y[sub[k]];
            auto kernel = [&](int a, int b) {
                return kmat[static_cast<size_t>(sub[a]) * m + sub[b]];
            };
            const SmoSolution s = smo_solve(kernel, ysub, opts.box_c, smo_opts);
            for (int k = 0; k < m; ++k) {
                if (fold_of[k] != f) continue;
                double d = s.bias;
                for (size_t a = 0; a < sub.size(); ++a)
                    d += s.alpha[a] * ysub[a] * kmat[static_cast<size_t>(sub[a]) * m + k];
                cal_decisions[k] = d;
            }
        }
        PairModel pm;
        pm.calibration = platt_fit(cal_decisions, y);

        // final model on the full pair
        SmoOptions final_opts;
        final_opts.tol = opts.smo_tol;
        auto kernel_all = [&](int a, int b) { return kmat[static_cast<size_t>(a) * m + b]; };
        const SmoSolution s = smo_solve(kernel_all, y, opts.box_c, final_opts);
        pm.svm.gamma = opts.gamma;
        pm.svm.box_c = opts.box_c;
        pm.svm.bias = s.bias;
        pm.svm.class_pos = pos;
        pm.svm.class_neg = neg;
        pm.svm.converged = s.converged;
        pm.svm.final_violation = s.final_violation;
        pm.svm.iterations = s.iterations;
        const double eps = 1e-12 * std::max(1.0, opts.box_c);
        for (int k = 0; k < m; ++k)
            if (s.alpha[k] > eps) {
                pm.svm.support_vectors.push_back(xs[idx[k]]);
                pm.svm.alpha_y.push_back(s.alpha[k] * y[k]);
            }
        model.pairs[t] = std::move(pm);
    });
    model.meta.seed = opts.seed;
    return model;
}

constexpr double kPairProbabilityClamp = 1e-9;

// Pairwise probability matrix for a standardized sample.
inline std::vector<std::vector<double>> pairwise_probabilities(const MulticlassModel& model,
                                                               std::span<const double> xs) {
    const int j_count = model.class_count();
    std::vector<std::vector<double>> r(j_count, std::vector<double>(j_count, 0.0));
    for (const PairModel& pm : model.pairs) {
        const double d = pm.svm.decision(xs);
        double prob = pm.calibration.apply(d);
        prob = std::clamp(prob, kPairProbabilityClamp, 1.0 - kPairProbabilityClamp);
        r[pm.svm.class_pos][pm.svm.class_neg] = prob;
        r[pm.svm.class_neg][pm.svm.class_pos] = 1.0 - prob;
    }
    return r;
}

inline std::vector<double> predict_proba(const MulticlassModel& model,
                                         std::span<const double> x) {
    const std::vector<double> xs = model.standardizer.apply(x);
    return pairwise_couple(pairwise_probabilities(model, xs));
}

inline int predict_class(const std::vector<double>& probabilities) {
    int best = 0;
    for (size_t j = 1; j < probabilities.size(); ++j)
        if (probabilities[j] > probabilities[best]) best = static_cast<int>(j);
    return best;
}

struct GridSearchOptions {
    std::vector<double> c_grid = default_c_grid();
    std::vector<double> gamma_grid = default_gamma_grid();
    int folds = 10;
    uint64_t seed = 13;
    double smo_tol = 1e-3;
    int jobs = 0;
};

struct GridSearchCell {
    double box_c = 0.0;
    double gamma = 0.0;
    double mean_accuracy = 0.0;
    std::vector<double> fold_accuracies;
};

struct GridSearchResult {
    double box_c = 0.0;
    double gamma = 0.0;
    double mean_accuracy = 0.0;
    std::vector<GridSearchCell> table; // C-major, gamma-minor
};

// Grid search over (C, gamma) with stratified k-fold cross-validation.
// Prediction inside the grid uses one-against-one majority voting; ties in
// accuracy prefer smaller C, then smaller gamma.
inline GridSearchResult grid_search(const std::vector<std::vector<double>>& features,
                                    const std::vector<int>& labels, int n_classes,
                                    const GridSearchOptions& opts) {
    if (opts.c_grid.empty() || opts.gamma_grid.empty())
        throw ConfigError("grid_search: grids must be nonempty");
    if (opts.folds < 2) throw ConfigError("grid_search: folds must be >= 2");
    if (features.size() != labels.size() || features.empty())
        throw DataError("grid_search: feature/label count mismatch");

    const int n = static_cast<int>(features.size());
    const int n_gamma = static_cast<int>(opts.gamma_grid.size());
    const int n_c = static_cast<int>(opts.c_grid.size());
    const int n_cells = n_gamma * n_c;

    Standardizer std_all;
    std_all.fit(features);
    std::vector<std::vector<double>> xs(features.size());
    for (size_t i = 0; i < features.size(); ++i) xs[i] = std_all.apply(features[i]);

    // squared distances once; every fold/pair/gamma reuses them
    std::vector<double> dist2(static_cast<size_t>(n) * n, 0.0);
    parallel_for(0, n, opts.jobs, [&](int i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = squared_distance(xs[i], xs[j]);
            dist2[static_cast<size_t>(i) * n + j] = d;
            dist2[static_cast<size_t>(j) * n + i] = d;
        }
    });

    const std::vector<int> fold_of = stratified_folds(labels, n_classes, opts.folds, opts.seed);
    std::vector<std::vector<double>> fold_acc(opts.folds,
                                              std::vector<double>(n_cells, 0.0));

    parallel_for(0, opts.folds, opts.jobs, [&](int f) {
        std::vector<int> val_idx;
        for (int i = 0; i < n; ++i)
            if (fold_of[i] == f) val_idx.push_back(i);
        if (val_idx.empty()) return;
        std::vector<int> val_slot(n, -1);
        for (size_t v = 0; v < val_idx.size(); ++v) val_slot[val_idx[v]] = static_cast<int>(v);

        // votes[v][cell * J + class]
        std::vector<uint16_t> votes(val_idx.size() * static_cast<size_t>(n_cells) * n_classes, 0);

        for (int pos = 0; pos < n_classes; ++pos) {
            for (int neg = pos + 1; neg < n_classes; ++neg) {
                std::vector<int> tr, va;
                for (int i = 0; i < n; ++i) {
                    if (labels[i] != pos && labels[i] != neg) continue;
                    (fold_of[i] == f ? va : tr).push_back(i);
                }
                if (va.empty()) continue;
                const int m = static_cast<int>(tr.size());
                std::vector<int8_t> y(m);
                for (int k = 0; k < m; ++k) y[k] = labels[tr[k]] == pos ? 1 : -1;

                std::vector<double> ktr(static_cast<size_t>(m) * m);
                std::vector<double> kva(static_cast<size_t>(m) * va.size());
                for (int g = 0; g < n_gamma; ++g) {
                    const double gamma = opts.gamma_grid[g];
                    for (int a = 0; a < m; ++a) {
                        ktr[static_cast<size_t>(a) * m + a] = 1.0;
                        const double* drow = &dist2[static_cast<size_t>(tr[a]) * n];
                        for (int b = a + 1; b < m; ++b) {
                            const double k = std::exp(-gamma * drow[tr[b]]);
                            ktr[static_cast<size_t>(a) * m + b] = k;
                            ktr[static_cast<size_t>(b) * m + a] = k;
                        }
                        for (size_t v = 0; v < va.size(); ++v)
                            kva[static_cast<size_t>(a) * va.size() + v] =
                                std::exp(-gamma * drow[va[v]]);
                    }
                    auto kernel = [&](int a, int b) {
                        return ktr[static_cast<size_t>(a) * m + b];
                    };
                    SmoOptions smo_opts;
                    smo_opts.tol = opts.smo_tol;
                    smo_opts.throw_on_max = false; // capped cells score their iterate
                    for (int ci = 0; ci < n_c; ++ci) {
                        const SmoSolution s = smo_solve(kernel, y, opts.c_grid[ci], smo_opts);
                        const int cell = ci * n_gamma + g;
                        for (size_t v = 0; v < va.size(); ++v) {
                            double d = s.bias;
                            for (int a = 0; a < m; ++a)
                                if (s.alpha[a] > 0.0)
                                    d += s.alpha[a] * y[a] *
                                         kva[static_cast<size_t>(a) * va.size() + v];
                            const int winner = d > 0.0 ? pos : neg;
                            ++votes[(static_cast<size_t>(val_slot[va[v]]) * n_cells + cell) *
                                        n_classes +
                                    winner];
                        }
                    }
                }
            }
        }
        for (int cell = 0; cell < n_cells; ++cell) {
            int correct = 0;
            for (size_t v = 0; v < val_idx.size(); ++v) {
                const uint16_t* vv =
                    &votes[(v * static_cast<size_t>(n_cells) + cell) * n_classes];
                int best = 0;
                for (int c = 1; c < n_classes; ++c)
                    if (vv[c] > vv[best]) best = c; // ties keep the lower class id
                correct += best == labels[val_idx[v]];
            }
            fold_acc[f][cell] = static_cast<double>(correct) / static_cast<double>(val_idx.size());
        }
    });

    GridSearchResult result;
    result.table.reserve(static_cast<size_t>(n_cells));
    int best_cell = -1;
    for (int ci = 0; ci < n_c; ++ci)
        for (int g = 0; g < n_gamma; ++g) {
            GridSearchCell cell;
            cell.box_c = opts.c_grid[ci];
            cell.gamma = opts.gamma_grid[g];
            double sum = 0.0;
            for (int f = 0; f < opts.folds; ++f) {
                cell.fold_accuracies.push_back(fold_acc[f][ci * n_gamma + g]);
                sum += fold_acc[f][ci * n_gamma + g];
            }
            cell.mean_accuracy = sum / opts.folds;
            result.table.push_back(std::move(cell));
            const GridSearchCell& cur = result.table.back();
            if (best_cell < 0 || cur.mean_accuracy > result.table[best_cell].mean_accuracy)
                best_cell = static_cast<int>(result.table.size()) - 1;
        }
    result.box_c = result.table[best_cell].box_c;
    result.gamma = result.table[best_cell].gamma;
    result.mean_accuracy = result.table[best_cell].mean_accuracy;
    return result;
}

// --- persistence ---------------------------------------------------------

inline nlohmann::json model_to_json(const MulticlassModel& model) {
    nlohmann::json j;
    j["format"] = "spectag-model/1";
    j["classes"] = model.classes;
    j["box_c"] = model.box_c;
    j["gamma"] = model.gamma;
    j["standardizer"] = {{"mean", model.standardizer.mean},
                         {"stddev", model.standardizer.stddev}};
    j["meta"] = {{"c_grid", model.meta.c_grid},
                 {"gamma_grid", model.meta.gamma_grid},
                 {"folds", model.meta.folds},
                 {"seed", model.meta.seed},
                 {"cv_accuracy", model.meta.cv_accuracy}};
    nlohmann::json pairs = nlohmann::json::array();
    for (const PairModel& pm : model.pairs) {
        nlohmann::json pj;
        pj["class_pos"] = pm.svm.class_pos;
        pj["class_neg"] = pm.svm.class_neg;
        pj["bias"] = pm.svm.bias;
        pj["gamma"] = pm.svm.gamma;
        pj["box_c"] = pm.svm.box_c;
        pj["alpha_y"] = pm.svm.alpha_y;
        pj["support_vectors"] = pm.svm.support_vectors;
        pj["calibration"] = {{"slope_a", pm.calibration.slope_a},
                             {"offset_b", pm.calibration.offset_b},
                             {"degenerate", pm.calibration.degenerate}};
        pairs.push_back(std::move(pj));
    }
    j["pairs"] = std::move(pairs);
    return j;
}

inline MulticlassModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != "spectag-model/1")
        throw DataError("model file: unknown or missing format tag");
    MulticlassModel model;
    model.classes = j.at("classes").get<std::vector<std::string>>();
    model.box_c = j.at("box_c").get<double>();
    model.gamma = j.at("gamma").get<double>();
    model.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    model.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
    const auto& meta = j.at("meta");
    model.meta.c_grid = meta.at("c_grid").get<std::vector<double>>();
    model.meta.gamma_grid = meta.at("gamma_grid").get<std::vector<double>>();
    model.meta.folds = meta.at("folds").get<int>();
    model.meta.seed = meta.at("seed").get<uint64_t>();
    model.meta.cv_accuracy = meta.at("cv_accuracy").get<double>();
    for (const auto& pj : j.at("pairs")) {
        PairModel pm;
        pm.svm.class_pos = pj.at("class_pos").get<int>();
        pm.svm.class_neg = pj.at("class_neg").get<int>();
        pm.svm.bias = pj.at("bias").get<double>();
        pm.svm.gamma = pj.at("gamma").get<double>();
        pm.svm.box_c = pj.at("box_c").get<double>();
        pm.svm.alpha_y = pj.at("alpha_y").get<std::vector<double>>();
        pm.svm.support_vectors =
            pj.at("support_vectors").get<std::vector<std::vector<double>>>();
        pm.calibration.slope_a = pj.at("calibration").at("slope_a").get<double>();
        pm.calibration.offset_b = pj.at("calibration").at("offset_b").get<double>();
        pm.calibration.degenerate = pj.at("calibration").at("degenerate").get<bool>();
        model.pairs.push_back(std::move(pm));
    }
    const size_t expected =
        model.classes.size() * (model.classes.size() - 1) / 2;
    if (model.pairs.size() != expected)
        throw DataError("model file: pair count does not match class count");
    return model;
}

inline void save_model(const MulticlassModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_model: cannot open " + path);
    out << model_to_json(model).dump(1) << "\n";
    if (!out) throw DataError("save_model: write failed for " + path);
}

inline MulticlassModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_model: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_model: " + path + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace spectag
