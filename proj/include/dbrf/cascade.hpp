#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dbrf/common.hpp"
#include "dbrf/dataset.hpp"
#include "dbrf/evolve.hpp"
#include "dbrf/forest.hpp"
#include "dbrf/hem.hpp"

namespace dbrf {

/// Hyperparameters of cascade training. Zero-valued feature_subsample and
/// min_hard_rows resolve at train time (sqrt width, 2 * n_classes).
struct TrainConfig {
    int n_iterations = 10;
    int n_trees = 200;
    SplitCriterion split_criterion = SplitCriterion::gini;
    LeafMetric hem_metric = LeafMetric::f1;
    double evolution_ratio = 0.2;
    bool evolution_enabled = true;
    bool smart_iteration_enabled = true;
    int patience = 5;   // rule 1: consecutive validation-accuracy drops before stopping
    int k_folds = 5;
    int min_hard_rows = 0;  // 0 = 2 * n_classes
    std::uint64_t master_seed = 0;
    TreeLimits limits;
    int feature_subsample = 0;

    // Ablation switches (library-only, not exposed on the CLI).
    bool keep_pre_elimination_sigma = false;  // keep sigma computed before tree elimination
    bool discard_annulled_level = false;      // drop a level whose division was annulled

    void validate() const {
        if (n_iterations < 1) throw ConfigError("config: n_iterations must be >= 1");
        if (n_trees < 1) throw ConfigError("config: n_trees must be >= 1");
        if (!(evolution_ratio >= 0.0 && evolution_ratio < 1.0))
            throw ConfigError("config: evolution_ratio must be in [0, 1)");
        if (patience < 1) throw ConfigError("config: patience must be >= 1");
        if (k_folds < 2) throw ConfigError("config: k_folds must be >= 2");
        if (min_hard_rows < 0) throw ConfigError("config: min_hard_rows must be >= 0");
        if (limits.min_samples_leaf < 1 || limits.min_samples_split < 2)
            throw ConfigError("config: invalid tree limits");
    }

    ForestConfig forest_config() const {
        ForestConfig fc;
        fc.n_trees = n_trees;
        fc.criterion = split_criterion;
        fc.limits = limits;
        fc.feature_subsample = feature_subsample;
        return fc;
    }
};

/// One trained iteration: the surviving forest and its leaf-score table.
/// level_index is 1-based, matching the cascade order F_1..F_n.
struct CascadeLevel {
    Forest forest;
    LeafScoreTable score_table;
    int level_index = 0;
};

/// Per-feature summary of the training data, kept for decision-boundary
/// grids (bounds and fill-in values for unplotted features).
struct FeatureStat {
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
};

struct CascadeModel {
    std::vector<CascadeLevel> levels;
    FeatureSchema schema;
    TrainConfig config;
    std::vector<FeatureStat> feature_stats;

    std::size_t n_levels() const { return levels.size(); }
    int n_classes() const { return static_cast<int>(schema.n_classes()); }

    void validate() const {
        if (levels.empty()) throw InvariantError("model: no levels");
        schema.validate();
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const CascadeLevel& lv = levels[i];
            if (lv.level_index != static_cast<int>(i) + 1)
                throw InvariantError("model: level_index out of order at level " + std::to_string(i));
            lv.forest.validate();
            if (lv.forest.n_classes != n_classes())
                throw InvariantError("model: level n_classes mismatch");
            for (const auto& t : lv.forest.trees)
                if (t.n_features != static_cast<int>(schema.n_features()))
                    throw InvariantError("model: level feature width mismatch");
            lv.score_table.validate_against(lv.forest);
        }
        if (!feature_stats.empty() && feature_stats.size() != schema.n_features())
            throw InvariantError("model: feature_stats width mismatch");
    }
};

enum class IterationRule { none, annul_division, early_stop };

inline const char* to_string(IterationRule r) {
    switch (r) {
        case IterationRule::none: return "none";
        case IterationRule::annul_division: return "annul_division";
        case IterationRule::early_stop: return "early_stop";
    }
    return "?";
}

/// Per-iteration training record; accuracies are NaN when smart iteration
/// was off (or the easy side was empty).
struct LevelReport {
    std::int64_t n_rows_in = 0;
    std::int64_t n_easy = 0;
    std::int64_t n_hard = 0;
    std::vector<std::int64_t> class_counts_in;
    std::vector<std::int64_t> class_counts_hard;
    double validation_accuracy = std::numeric_limits<double>::quiet_NaN();
    double easy_validation_accuracy = std::numeric_limits<double>::quiet_NaN();
    IterationRule rule_triggered = IterationRule::none;
};

struct TrainReport {
    std::vector<LevelReport> levels;
    std::string termination_reason;  // exhausted_iterations | early_stop | hard_set_exhausted
};

/// Master seed of one cascade level. Level 1 trains with the user's seed
/// unchanged, so a one-level cascade is bit-identical to a plain forest.
inline std::uint64_t level_master_seed(std::uint64_t master_seed, int level_index) {
    return level_index <= 1 ? master_seed
                            : mix64(master_seed, 0x1e7e1000ull + static_cast<std::uint64_t>(level_index));
}

/// Stratified k-fold out-of-fold evaluation: accuracy plus the per-row
/// out-of-fold predictions (index-aligned with the dataset).
struct ValidationResult {
    double accuracy = 0.0;
    std::vector<int> oof_predictions;
};

/// Out-of-fold validation accuracy with forests of the given configuration.
/// Every row is predicted exactly once, by the fold forest that did not see
/// it during training.
inline ValidationResult validation_accuracy(const Dataset& d, const TrainConfig& cfg,
                                            std::uint64_t seed) {
    cfg.validate();
    const std::size_t k = static_cast<std::size_t>(cfg.k_folds);
    if (d.n_rows() < k)
        throw ConfigError("validation_accuracy: dataset has " + std::to_string(d.n_rows()) +
                          " rows, fewer than k_folds = " + std::to_string(k));

    const auto folds = kfold_indices(d.n_rows(), k, &d.labels, mix64(seed, 0xcf01d5ull));
    ValidationResult result;
    result.oof_predictions.assign(d.n_rows(), -1);

    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& [train_idx, valid_idx] = folds[f];
        Dataset fold_train = d.subset(train_idx);
        Forest forest = fit_forest(fold_train, cfg.forest_config(), mix64(seed, f));
        const std::vector<std::size_t>& vidx = valid_idx;
        parallel_for(vidx.size(), [&](std::size_t i) {
            result.oof_predictions[vidx[i]] = predict_forest(forest, d.row(vidx[i]));
        }, 64);
    }

    std::size_t hits = 0;
    for (std::size_t r = 0; r < d.n_rows(); ++r)
        if (result.oof_predictions[r] == d.labels[r]) ++hits;
    result.accuracy = static_cast<double>(hits) / static_cast<double>(d.n_rows());
    return result;
}

/// Train a DBRF cascade:
///
/// For up to n_iterations: fit a forest on the current data, score its
/// leaves, optionally eliminate the weakest trees (rebuilding scores and
/// sigma over the survivors), and split the data into easy/hard. Smart
/// iteration guards the division: a division whose easy side validates
/// worse than the whole set is annulled (data kept), and training stops
/// after `patience` consecutive drops of the validation accuracy. Hard
/// examples become the next iteration's data; training also stops when too
/// few hard rows (or a single class) remain.
inline std::pair<CascadeModel, TrainReport> train_cascade(const Dataset& train,
                                                          const TrainConfig& cfg) {
    cfg.validate();
    if (train.n_rows() == 0) throw ConfigError("train_cascade: empty training set");
    train.validate();

    CascadeModel model;
    model.schema = train.schema;
    model.config = cfg;
    model.feature_stats.resize(train.n_features());
    for (std::size_t c = 0; c < train.n_features(); ++c) {
        std::vector<double> col(train.n_rows());
        for (std::size_t r = 0; r < train.n_rows(); ++r) col[r] = train.at(r, c);
        std::sort(col.begin(), col.end());
        model.feature_stats[c].min = col.front();
        model.feature_stats[c].max = col.back();
        model.feature_stats[c].median = col.size() % 2 == 1
                                            ? col[col.size() / 2]
                                            : 0.5 * (col[col.size() / 2 - 1] + col[col.size() / 2]);
    }

    const int min_hard = cfg.min_hard_rows > 0 ? cfg.min_hard_rows
                                               : 2 * static_cast<int>(train.n_classes());

    TrainReport report;
    Dataset data = train;
    double prev_val_acc = std::numeric_limits<double>::quiet_NaN();
    int consecutive_drops = 0;
    report.termination_reason = "exhausted_iterations";

    for (int iter = 1; iter <= cfg.n_iterations; ++iter) {
        const std::uint64_t seed = level_master_seed(cfg.master_seed, iter);

        Forest forest = fit_forest(data, cfg.forest_config(), seed);
        LeafScoreTable table = build_score_table(forest, data, cfg.hem_metric);

        if (cfg.evolution_enabled && cfg.evolution_ratio > 0.0 && forest.trees.size() > 1) {
            FitnessReport fitness = select_survivors(tree_fitness(forest, table),
                                                     cfg.evolution_ratio);
            if (!fitness.eliminated.empty()) {
                forest = keep_trees(forest, fitness.survivors);
                // Voting happens among the survivors, so sigma is recomputed
                // over them unless the ablation switch keeps the old one.
                const double old_sigma = table.sigma;
                table = build_score_table(forest, data, cfg.hem_metric);
                if (cfg.keep_pre_elimination_sigma) table.sigma = old_sigma;
            }
        }

        const std::vector<char> mask = easy_mask(forest, table, data);
        std::vector<std::size_t> easy_rows, hard_rows;
        for (std::size_t r = 0; r < mask.size(); ++r)
            (mask[r] ? easy_rows : hard_rows).push_back(r);

        LevelReport lr;
        lr.n_rows_in = static_cast<std::int64_t>(data.n_rows());
        lr.n_easy = static_cast<std::int64_t>(easy_rows.size());
        lr.n_hard = static_cast<std::int64_t>(hard_rows.size());
        lr.class_counts_in = data.class_counts();

        bool stop_now = false;
        bool annulled = false;
        if (cfg.smart_iteration_enabled) {
            ValidationResult val = validation_accuracy(data, cfg, mix64(seed, 0x5a11dull));
            lr.validation_accuracy = val.accuracy;
            if (!easy_rows.empty()) {
                std::size_t hits = 0;
                for (std::size_t r : easy_rows)
                    if (val.oof_predictions[r] == data.labels[r]) ++hits;
                lr.easy_validation_accuracy =
                    static_cast<double>(hits) / static_cast<double>(easy_rows.size());
                // Rule 2: a division whose easy side validates worse than the
                // whole set is not trusted; keep the data for the next round.
                if (lr.easy_validation_accuracy < lr.validation_accuracy) {
                    annulled = true;
                    lr.rule_triggered = IterationRule::annul_division;
                }
            }
            // Rule 1: early termination after `patience` consecutive drops.
            if (!std::isnan(prev_val_acc) && val.accuracy < prev_val_acc)
                ++consecutive_drops;
            else
                consecutive_drops = 0;
            prev_val_acc = val.accuracy;
            if (consecutive_drops >= cfg.patience) {
                stop_now = true;
                lr.rule_triggered = IterationRule::early_stop;
                report.termination_reason = "early_stop";
            }
        }

        Dataset hard = data.subset(hard_rows);
        lr.class_counts_hard.assign(train.n_classes(), 0);
        for (int y : hard.labels) lr.class_counts_hard[static_cast<std::size_t>(y)]++;

        const bool keep_level = !(annulled && cfg.discard_annulled_level);
        if (keep_level) {
            CascadeLevel level;
            level.forest = std::move(forest);
            level.score_table = std::move(table);
            level.level_index = static_cast<int>(model.levels.size()) + 1;
            model.levels.push_back(std::move(level));
        }
        report.levels.push_back(std::move(lr));

        if (stop_now) break;
        if (!annulled) data = std::move(hard);

        if (iter < cfg.n_iterations) {
            // The next iteration needs enough rows for k-fold validation and
            // at least two classes to be worth training on.
            std::size_t floor_rows = static_cast<std::size_t>(min_hard);
            if (cfg.smart_iteration_enabled)
                floor_rows = std::max(floor_rows, static_cast<std::size_t>(cfg.k_folds));
            int distinct = 0;
            for (std::int64_t c : data.class_counts())
                if (c > 0) ++distinct;
            if (data.n_rows() < floor_rows || distinct < 2) {
                report.termination_reason = "hard_set_exhausted";
                break;
            }
        }
    }

    if (model.levels.empty())
        throw InvariantError("train_cascade: every iteration was discarded");
    model.validate();
    return {model, report};
}

/// Route one row through the cascade: the exit level (1-based position in
/// the model) is the first whose forest finds the row easy, or the last.
inline std::size_t cascade_exit_level(const CascadeModel& m, std::span<const double> x) {
    for (std::size_t i = 0; i + 1 < m.levels.size(); ++i) {
        const CascadeLevel& lv = m.levels[i];
        bool easy = true;
        for (std::size_t t = 0; t < lv.forest.trees.size(); ++t) {
            int leaf = route(lv.forest.trees[t], x);
            if (!(lv.score_table.scores[t][static_cast<std::size_t>(leaf)] > lv.score_table.sigma)) {
                easy = false;
                break;
            }
        }
        if (easy) return i + 1;
    }
    return m.levels.size();
}

struct CascadePredictions {
    std::vector<int> predicted;       // class index per row
    std::vector<int> level_used;      // 1-based exit level per row
};

/// Cascaded test procedure: rows exit with the vote of the first level that
/// finds them easy; whatever reaches the last level is predicted there.
inline CascadePredictions predict_cascade(const CascadeModel& m, const Dataset& test) {
    if (test.schema.n_features() != m.schema.n_features())
        throw DataError("predict_cascade: feature width mismatch");
    CascadePredictions out;
    out.predicted.resize(test.n_rows());
    out.level_used.resize(test.n_rows());
    parallel_for(test.n_rows(), [&](std::size_t r) {
        auto x = test.row(r);
        const std::size_t exit = cascade_exit_level(m, x);
        out.level_used[r] = static_cast<int>(exit);
        out.predicted[r] = predict_forest(m.levels[exit - 1].forest, x);
    }, 64);
    return out;
}

/// Negative:positive ratio of each level's input rows (binary models;
/// class 0 counts as negative, class 1 as positive). A level without
/// positives reports infinity.
inline std::vector<double> class_balance_trace(const TrainReport& report) {
    std::vector<double> ratios;
    for (const auto& lv : report.levels) {
        if (lv.class_counts_in.size() != 2)
            throw ConfigError("class_balance_trace: report is not binary-labelled");
        const double neg = static_cast<double>(lv.class_counts_in[0]);
        const double pos = static_cast<double>(lv.class_counts_in[1]);
        ratios.push_back(pos == 0.0 ? std::numeric_limits<double>::infinity() : neg / pos);
    }
    return ratios;
}

/// TrainReport as CSV, one row per level.
inline void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "level,n_rows_in,n_easy,n_hard,class_counts_in,class_counts_hard,"
           "validation_accuracy,easy_validation_accuracy,rule_triggered,termination_reason\n";
    auto join = [](const std::vector<std::int64_t>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ';';
            s += std::to_string(v[i]);
        }
        return s;
    };
    auto num = [](double v) {
        if (std::isnan(v)) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < report.levels.size(); ++i) {
        const LevelReport& lv = report.levels[i];
        out << (i + 1) << ',' << lv.n_rows_in << ',' << lv.n_easy << ',' << lv.n_hard << ','
            << join(lv.class_counts_in) << ',' << join(lv.class_counts_hard) << ','
            << num(lv.validation_accuracy) << ',' << num(lv.easy_validation_accuracy) << ','
            << to_string(lv.rule_triggered) << ','
            << (i + 1 == report.levels.size() ? report.termination_reason : std::string()) << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace dbrf
