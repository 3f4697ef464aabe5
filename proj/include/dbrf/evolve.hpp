#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dbrf/common.hpp"
#include "dbrf/forest.hpp"
#include "dbrf/hem.hpp"

namespace dbrf {

/// Outcome of one evolution step: per-tree fitness, the elimination
/// threshold (minimum surviving fitness), and the two index lists.
struct FitnessReport {
    std::vector<double> fitness;      // by tree index
    double threshold = 0.0;
    std::vector<int> survivors;       // ascending tree indices
    std::vector<int> eliminated;      // ascending tree indices
};

/// Fitness of each tree: the mean score of its leaves under the table's
/// metric.
inline std::vector<double> tree_fitness(const Forest& f, const LeafScoreTable& table) {
    table.validate_against(f);
    std::vector<double> fitness(f.trees.size());
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        const auto& leaf_scores = table.scores[t];
        if (leaf_scores.empty())
            throw InvariantError("tree_fitness: tree " + std::to_string(t) + " has no leaf scores");
        double sum = 0.0;
        for (double s : leaf_scores) sum += s;
        fitness[t] = sum / static_cast<double>(leaf_scores.size());
    }
    return fitness;
}

/// Eliminate the floor(ratio * n) lowest-fitness trees. Ties break so the
/// tree with the larger index goes first, keeping the result deterministic;
/// at least one tree always survives.
inline FitnessReport select_survivors(const std::vector<double>& fitness, double ratio) {
    if (fitness.empty()) throw ConfigError("select_survivors: empty fitness map");
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw ConfigError("select_survivors: elimination ratio must be in [0, 1)");

    const std::size_t n = fitness.size();
    std::size_t k = static_cast<std::size_t>(ratio * static_cast<double>(n));
    if (k >= n) k = n - 1;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (fitness[static_cast<std::size_t>(a)] != fitness[static_cast<std::size_t>(b)])
            return fitness[static_cast<std::size_t>(a)] < fitness[static_cast<std::size_t>(b)];
        return a > b;  // equal fitness: larger index eliminated first
    });

    FitnessReport report;
    report.fitness = fitness;
    report.eliminated.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    report.survivors.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(report.eliminated.begin(), report.eliminated.end());
    std::sort(report.survivors.begin(), report.survivors.end());
    report.threshold = fitness[static_cast<std::size_t>(
        *std::min_element(report.survivors.begin(), report.survivors.end(), [&](int a, int b) {
            return fitness[static_cast<std::size_t>(a)] < fitness[static_cast<std::size_t>(b)];
        }))];
    return report;
}

/// Forest restricted to the given trees (order preserved).
inline Forest keep_trees(const Forest& f, const std::vector<int>& tree_indices) {
    if (tree_indices.empty()) throw ConfigError("keep_trees: no survivors");
    Forest out;
    out.n_classes = f.n_classes;
    out.config = f.config;
    out.config.n_trees = static_cast<int>(tree_indices.size());
    for (int t : tree_indices) {
        out.trees.push_back(f.trees.at(static_cast<std::size_t>(t)));
        out.tree_seeds.push_back(f.tree_seeds.at(static_cast<std::size_t>(t)));
    }
    return out;
}

}  // namespace dbrf
