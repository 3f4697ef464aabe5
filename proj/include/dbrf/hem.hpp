#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbrf/common.hpp"
#include "dbrf/dataset.hpp"
#include "dbrf/forest.hpp"

namespace dbrf {

/// Leaf-quality metric. All five are oriented so that larger is better;
/// gini and entropy are the negated impurities (maximum 0 at a pure leaf).
enum class LeafMetric { supp, conf, f1, gini, entropy };

/// Training-time statistics of one leaf rule at one cascade level.
/// candidate_count is the number of level rows routed to the leaf,
/// total_rows the size of the level's training set.
struct LeafStats {
    int tree_index = 0;
    int leaf_id = 0;
    std::int64_t candidate_count = 0;
    std::int64_t majority_count = 0;
    std::vector<std::int64_t> class_counts;
    std::int64_t total_rows = 0;
};

/// Worst possible score of a metric; assigned to leaves no training row
/// reached, so an unexercised rule can never look good.
inline double metric_minimum(LeafMetric metric, std::size_t n_classes) {
    switch (metric) {
        case LeafMetric::supp:
        case LeafMetric::conf:
        case LeafMetric::f1: return 0.0;
        case LeafMetric::gini: return 1.0 / static_cast<double>(n_classes) - 1.0;
        case LeafMetric::entropy: return -std::log(static_cast<double>(n_classes));
    }
    throw ConfigError("unknown leaf metric");
}

/// Score one leaf:
///   supp    = |C| / |X|
///   conf    = majority / |C|
///   f1      = harmonic mean of supp and conf
///   gini    = sum p^2 - 1          (in [1/c - 1, 0])
///   entropy = sum_{p>0} p ln p     (in [-ln c, 0])
inline double score_leaf(const LeafStats& stats, LeafMetric metric) {
    if (stats.candidate_count < 1) throw ConfigError("score_leaf: empty candidate set");
    if (stats.total_rows < 1) throw ConfigError("score_leaf: total_rows must be >= 1");
    const double supp = static_cast<double>(stats.candidate_count) /
                        static_cast<double>(stats.total_rows);
    const double conf = static_cast<double>(stats.majority_count) /
                        static_cast<double>(stats.candidate_count);
    switch (metric) {
        case LeafMetric::supp: return supp;
        case LeafMetric::conf: return conf;
        case LeafMetric::f1:
            return supp + conf == 0.0 ? 0.0 : 2.0 * supp * conf / (supp + conf);
        case LeafMetric::gini: {
            double sum_sq = 0.0;
            for (std::int64_t c : stats.class_counts) {
                double p = static_cast<double>(c) / static_cast<double>(stats.candidate_count);
                sum_sq += p * p;
            }
            return sum_sq - 1.0;
        }
        case LeafMetric::entropy: {
            double s = 0.0;
            for (std::int64_t c : stats.class_counts) {
                if (c == 0) continue;
                double p = static_cast<double>(c) / static_cast<double>(stats.candidate_count);
                s += p * std::log(p);
            }
            return s > 0.0 ? 0.0 : s;  // clamp +0.0 noise on pure leaves
        }
    }
    throw ConfigError("unknown leaf metric");
}

/// Per-leaf quality scores of one forest, plus the easiness threshold sigma
/// (the mean of every stored score). scores[t][l] is tree t's leaf l.
struct LeafScoreTable {
    LeafMetric metric = LeafMetric::f1;
    std::vector<std::vector<double>> scores;
    double sigma = 0.0;

    void validate_against(const Forest& f) const {
        if (scores.size() != f.trees.size())
            throw InvariantError("score table covers " + std::to_string(scores.size()) +
                                 " trees, forest has " + std::to_string(f.trees.size()));
        for (std::size_t t = 0; t < scores.size(); ++t) {
            const std::size_t want = static_cast<std::size_t>(f.trees[t].n_leaves);
            if (scores[t].size() != want) {
                const std::size_t missing = scores[t].size() < want ? scores[t].size() : want;
                throw InvariantError("score table tree " + std::to_string(t) + ": covers " +
                                     std::to_string(scores[t].size()) + " of " +
                                     std::to_string(want) + " leaves (first mismatch at leaf " +
                                     std::to_string(missing) + ")");
            }
        }
    }
};

/// Gather per-leaf class counts and score every leaf of every tree on the
/// level's training data. Leaves that receive no rows score at the metric's
/// minimum. sigma is the arithmetic mean over all entries.
inline LeafScoreTable build_score_table(const Forest& f, const Dataset& d, LeafMetric metric) {
    if (d.n_rows() == 0) throw ConfigError("build_score_table: empty dataset");
    const LeafAssignments routed = route_all(f, d);

    LeafScoreTable table;
    table.metric = metric;
    table.scores.resize(f.trees.size());

    const std::size_t n_classes = d.n_classes();
    const std::int64_t total = static_cast<std::int64_t>(d.n_rows());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        const std::size_t n_leaves = static_cast<std::size_t>(f.trees[t].n_leaves);
        std::vector<std::int64_t> counts(n_leaves * n_classes, 0);
        for (std::size_t r = 0; r < d.n_rows(); ++r)
            counts[static_cast<std::size_t>(routed.at(r, t)) * n_classes +
                   static_cast<std::size_t>(d.labels[r])]++;

        table.scores[t].resize(n_leaves);
        for (std::size_t l = 0; l < n_leaves; ++l) {
            LeafStats stats;
            stats.tree_index = static_cast<int>(t);
            stats.leaf_id = static_cast<int>(l);
            stats.total_rows = total;
            stats.class_counts.assign(counts.begin() + static_cast<std::ptrdiff_t>(l * n_classes),
                                      counts.begin() + static_cast<std::ptrdiff_t>((l + 1) * n_classes));
            for (std::int64_t c : stats.class_counts) {
                stats.candidate_count += c;
                stats.majority_count = std::max(stats.majority_count, c);
            }
            table.scores[t][l] = stats.candidate_count == 0
                                     ? metric_minimum(metric, n_classes)
                                     : score_leaf(stats, metric);
            sum += table.scores[t][l];
            ++count;
        }
    }
    table.sigma = count == 0 ? 0.0 : sum / static_cast<double>(count);
    return table;
}

/// A row is easy iff in every tree of the forest the leaf containing it
/// scores strictly above sigma.
inline std::vector<char> easy_mask(const Forest& f, const LeafScoreTable& table, const Dataset& d) {
    table.validate_against(f);
    std::vector<char> easy(d.n_rows(), 0);
    parallel_for(d.n_rows(), [&](std::size_t r) {
        auto x = d.row(r);
        for (std::size_t t = 0; t < f.trees.size(); ++t) {
            int leaf = route(f.trees[t], x);
            if (!(table.scores[t][static_cast<std::size_t>(leaf)] > table.sigma)) return;
        }
        easy[r] = 1;
    }, 64);
    return easy;
}

/// Split a dataset into (easy, hard) by cross-tree voting. Row order within
/// each side follows the input; together the sides partition the row_ids.
inline std::pair<Dataset, Dataset> partition_easy_hard(const Forest& f, const LeafScoreTable& table,
                                                       const Dataset& d) {
    const std::vector<char> mask = easy_mask(f, table, d);
    std::vector<std::size_t> easy_rows, hard_rows;
    for (std::size_t r = 0; r < mask.size(); ++r)
        (mask[r] ? easy_rows : hard_rows).push_back(r);
    return {d.subset(easy_rows), d.subset(hard_rows)};
}

inline const char* to_string(LeafMetric m) {
    switch (m) {
        case LeafMetric::supp: return "supp";
        case LeafMetric::conf: return "conf";
        case LeafMetric::f1: return "f1";
        case LeafMetric::gini: return "gini";
        case LeafMetric::entropy: return "entropy";
    }
    return "?";
}

inline LeafMetric leaf_metric_from_string(const std::string& s) {
    if (s == "supp") return LeafMetric::supp;
    if (s == "conf") return LeafMetric::conf;
    if (s == "f1") return LeafMetric::f1;
    if (s == "gini") return LeafMetric::gini;
    if (s == "entropy") return LeafMetric::entropy;
    throw ConfigError("unknown leaf metric: " + s);
}

inline const char* to_string(SplitCriterion c) {
    return c == SplitCriterion::gini ? "gini" : "entropy";
}

inline SplitCriterion criterion_from_string(const std::string& s) {
    if (s == "gini") return SplitCriterion::gini;
    if (s == "entropy") return SplitCriterion::entropy;
    throw ConfigError("unknown split criterion: " + s);
}

}  // namespace dbrf
