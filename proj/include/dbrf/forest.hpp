#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "dbrf/common.hpp"
#include "dbrf/dataset.hpp"
#include "dbrf/tree.hpp"

namespace dbrf {

struct ForestConfig {
    int n_trees = 200;
    SplitCriterion criterion = SplitCriterion::gini;
    TreeLimits limits;
    int feature_subsample = 0;  // 0 = ceil(sqrt(n_features))
    bool bootstrap = true;      // off: every tree sees the full data (tests)

    int resolve_subsample(std::size_t n_features) const {
        if (feature_subsample > 0) return feature_subsample;
        return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_features))));
    }
};

/// Bagged ensemble of CART trees over a fixed class set.
struct Forest {
    std::vector<DecisionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    int n_classes = 0;
    ForestConfig config;

    std::size_t n_trees() const { return trees.size(); }

    void validate() const {
        if (trees.empty()) throw InvariantError("forest: no trees");
        if (tree_seeds.size() != trees.size())
            throw InvariantError("forest: tree_seeds length mismatch");
        for (const auto& t : trees) {
            if (t.n_classes != n_classes) throw InvariantError("forest: n_classes mismatch");
            t.validate();
        }
    }
};

/// Train a forest: tree i fits a bootstrap sample of |D| rows drawn with
/// replacement from a generator seeded by master_seed ^ i. Trees are built
/// in parallel; the result is identical under any thread count.
inline Forest fit_forest(const Dataset& d, const ForestConfig& config, std::uint64_t master_seed) {
    if (d.n_rows() == 0) throw ConfigError("fit_forest: empty dataset");
    if (config.n_trees < 1) throw ConfigError("fit_forest: n_trees must be >= 1");

    Forest f;
    f.n_classes = static_cast<int>(d.n_classes());
    f.config = config;
    f.config.feature_subsample = config.resolve_subsample(d.n_features());
    f.trees.resize(static_cast<std::size_t>(config.n_trees));
    f.tree_seeds.resize(static_cast<std::size_t>(config.n_trees));
    for (std::size_t i = 0; i < f.tree_seeds.size(); ++i)
        f.tree_seeds[i] = master_seed ^ static_cast<std::uint64_t>(i);

    const std::size_t n = d.n_rows();
    parallel_for(f.trees.size(), [&](std::size_t i) {
        std::vector<std::size_t> sample;
        sample.reserve(n);
        if (config.bootstrap) {
            Rng rng(mix64(f.tree_seeds[i], 0xb002ull));
            for (std::size_t j = 0; j < n; ++j) sample.push_back(rng.below(n));
        } else {
            sample.resize(n);
            std::iota(sample.begin(), sample.end(), 0);
        }
        f.trees[i] = fit_tree(d, sample, config.criterion, config.limits,
                              f.config.feature_subsample, f.tree_seeds[i]);
    });
    return f;
}

/// Per-class vote counts of the forest on one row.
inline std::vector<int> vote_counts(const Forest& f, std::span<const double> x) {
    std::vector<int> votes(static_cast<std::size_t>(f.n_classes), 0);
    for (const auto& t : f.trees) votes[static_cast<std::size_t>(predict_tree(t, x))]++;
    return votes;
}

/// Plurality vote over the trees; ties break to the smallest class index.
inline int predict_forest(const Forest& f, std::span<const double> x) {
    auto votes = vote_counts(f, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return static_cast<int>(best);
}

/// Forest predictions for every row of a dataset (parallel over rows).
inline std::vector<int> predict_forest_all(const Forest& f, const Dataset& d) {
    std::vector<int> out(d.n_rows());
    parallel_for(d.n_rows(), [&](std::size_t r) { out[r] = predict_forest(f, d.row(r)); },
                 64);
    return out;
}

/// Leaf assignment matrix: entry (row, tree) is the leaf_id the row routes
/// to in that tree. Row-major, n_rows x n_trees.
struct LeafAssignments {
    std::vector<std::int32_t> ids;
    std::size_t n_rows = 0;
    std::size_t n_trees = 0;

    std::int32_t at(std::size_t row, std::size_t tree) const { return ids[row * n_trees + tree]; }
};

inline LeafAssignments route_all(const Forest& f, const Dataset& d) {
    LeafAssignments a;
    a.n_rows = d.n_rows();
    a.n_trees = f.trees.size();
    a.ids.resize(a.n_rows * a.n_trees);
    parallel_for(a.n_rows, [&](std::size_t r) {
        auto x = d.row(r);
        for (std::size_t t = 0; t < a.n_trees; ++t)
            a.ids[r * a.n_trees + t] = route(f.trees[t], x);
    }, 64);
    return a;
}

}  // namespace dbrf
