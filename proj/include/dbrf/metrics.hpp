#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "dbrf/cascade.hpp"
#include "dbrf/common.hpp"

namespace dbrf {

struct EvalResult {
    double accuracy = 0.0;
    std::optional<double> auc;                       // binary only
    std::vector<std::vector<std::int64_t>> confusion;  // [truth][predicted]
    std::int64_t n = 0;
};

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size() || truth.empty())
        throw ConfigError("accuracy: prediction/truth length mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

inline std::vector<std::vector<std::int64_t>> confusion_matrix(std::span<const int> predicted,
                                                               std::span<const int> truth,
                                                               int n_classes) {
    if (predicted.size() != truth.size())
        throw ConfigError("confusion_matrix: length mismatch");
    std::vector<std::vector<std::int64_t>> m(static_cast<std::size_t>(n_classes),
                                             std::vector<std::int64_t>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < truth.size(); ++i)
        m.at(static_cast<std::size_t>(truth[i])).at(static_cast<std::size_t>(predicted[i]))++;
    return m;
}

/// Binary ROC-AUC in the Mann-Whitney form: the probability that a random
/// positive outscores a random negative, ties counted half. Computed from
/// midranks in O(n log n); equal to explicit pairwise counting.
inline double auc_roc(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size() || truth.empty())
        throw ConfigError("auc_roc: score/truth length mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : truth) {
        if (y == 1) ++n_pos;
        else if (y == 0) ++n_neg;
        else throw ConfigError("auc_roc: truth labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw ConfigError("auc_roc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of positive midranks.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (truth[order[k]] == 1) rank_sum += midrank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline EvalResult evaluate(std::span<const int> predicted, std::span<const int> truth,
                           int n_classes, std::span<const double> scores = {}) {
    EvalResult r;
    r.n = static_cast<std::int64_t>(truth.size());
    r.accuracy = accuracy(predicted, truth);
    r.confusion = confusion_matrix(predicted, truth, n_classes);
    if (n_classes == 2 && !scores.empty()) r.auc = auc_roc(scores, truth);
    return r;
}

/// Positive-class score of a binary cascade on one row: the fraction of
/// trees voting class 1 at the level the row exits from.
inline double positive_score(const CascadeModel& m, std::span<const double> x) {
    if (m.n_classes() != 2) throw ConfigError("positive_score: model is not binary");
    const std::size_t exit = cascade_exit_level(m, x);
    const Forest& forest = m.levels[exit - 1].forest;
    const auto votes = vote_counts(forest, x);
    return static_cast<double>(votes[1]) / static_cast<double>(forest.trees.size());
}

/// positive_score for every row (parallel).
inline std::vector<double> positive_scores_all(const CascadeModel& m, const Dataset& d) {
    std::vector<double> out(d.n_rows());
    parallel_for(d.n_rows(), [&](std::size_t r) { out[r] = positive_score(m, d.row(r)); }, 64);
    return out;
}

}  // namespace dbrf
