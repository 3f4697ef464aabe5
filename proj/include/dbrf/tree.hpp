#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbrf/common.hpp"
#include "dbrf/dataset.hpp"

namespace dbrf {

enum class SplitCriterion { gini, entropy };

struct TreeLimits {
    std::optional<int> max_depth;  // nullopt = unlimited
    int min_samples_leaf = 1;
    int min_samples_split = 2;
};

/// Node of a flat binary CART tree. feature < 0 marks a leaf; decision nodes
/// send rows with value <= threshold left, > threshold right. Child indices
/// are strictly greater than the parent's (preorder layout), so the node
/// array is acyclic by construction.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf_id = -1;                // leaves only, dense 0..n_leaves-1
    std::vector<std::int64_t> class_counts;   // leaves only
    std::int64_t n_samples = 0;               // leaves only

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int n_classes = 0;
    int n_leaves = 0;
    int n_features = 0;

    void validate() const;
};

/// Gini or entropy impurity of a class-count vector.
/// gini = 1 - sum p^2; entropy = -sum p ln p. Zero exactly when pure.
inline double impurity(std::span<const std::int64_t> class_counts, SplitCriterion criterion) {
    std::int64_t n = 0;
    for (std::int64_t c : class_counts) {
        if (c < 0) throw ConfigError("impurity: negative class count");
        n += c;
    }
    if (n == 0) throw ConfigError("impurity: all class counts are zero");
    if (criterion == SplitCriterion::gini) {
        double sum_sq = 0.0;
        for (std::int64_t c : class_counts) {
            double p = static_cast<double>(c) / static_cast<double>(n);
            sum_sq += p * p;
        }
        return 1.0 - sum_sq;
    }
    double h = 0.0;
    for (std::int64_t c : class_counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h < 0.0 ? 0.0 : h;  // clamp -0.0 from rounding on pure nodes
}

/// Route a feature row to its unique leaf; returns the leaf_id.
inline int route(const DecisionTree& t, std::span<const double> x) {
    if (static_cast<int>(x.size()) != t.n_features)
        throw ConfigError("route: row width " + std::to_string(x.size()) +
                          " does not match training width " + std::to_string(t.n_features));
    const TreeNode* node = &t.nodes[0];
    while (!node->is_leaf())
        node = &t.nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold
                            ? node->left : node->right];
    return node->leaf_id;
}

/// Leaf node a row routes to (for callers that need the class counts).
inline const TreeNode& route_node(const DecisionTree& t, std::span<const double> x) {
    if (static_cast<int>(x.size()) != t.n_features)
        throw ConfigError("route: row width " + std::to_string(x.size()) +
                          " does not match training width " + std::to_string(t.n_features));
    const TreeNode* node = &t.nodes[0];
    while (!node->is_leaf())
        node = &t.nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold
                            ? node->left : node->right];
    return *node;
}

/// Majority class of a count vector; ties break to the smallest class index.
inline int argmax_class(std::span<const std::int64_t> counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;
    return static_cast<int>(best);
}

/// Predicted class of the leaf the row routes to.
inline int predict_tree(const DecisionTree& t, std::span<const double> x) {
    return argmax_class(route_node(t, x).class_counts);
}

inline void DecisionTree::validate() const {
    if (nodes.empty()) throw InvariantError("tree: empty node array");
    std::vector<bool> leaf_seen(static_cast<std::size_t>(n_leaves), false);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const TreeNode& nd = nodes[i];
        if (nd.is_leaf()) {
            if (nd.leaf_id < 0 || nd.leaf_id >= n_leaves)
                throw InvariantError("tree: leaf_id out of range at node " + std::to_string(i));
            if (leaf_seen[static_cast<std::size_t>(nd.leaf_id)])
                throw InvariantError("tree: duplicate leaf_id " + std::to_string(nd.leaf_id));
            leaf_seen[static_cast<std::size_t>(nd.leaf_id)] = true;
            if (static_cast<int>(nd.class_counts.size()) != n_classes)
                throw InvariantError("tree: class_counts width mismatch at node " + std::to_string(i));
            std::int64_t sum = 0;
            for (std::int64_t c : nd.class_counts) {
                if (c < 0) throw InvariantError("tree: negative class count at node " + std::to_string(i));
                sum += c;
            }
            if (sum != nd.n_samples || nd.n_samples < 1)
                throw InvariantError("tree: class_counts do not sum to n_samples at node " +
                                     std::to_string(i));
        } else {
            if (nd.feature >= n_features)
                throw InvariantError("tree: feature index out of range at node " + std::to_string(i));
            if (nd.left <= static_cast<std::int32_t>(i) || nd.right <= static_cast<std::int32_t>(i) ||
                nd.left >= static_cast<std::int32_t>(nodes.size()) ||
                nd.right >= static_cast<std::int32_t>(nodes.size()))
                throw InvariantError("tree: child index invalid at node " + std::to_string(i));
        }
    }
    for (int l = 0; l < n_leaves; ++l)
        if (!leaf_seen[static_cast<std::size_t>(l)])
            throw InvariantError("tree: missing leaf_id " + std::to_string(l));
}

namespace detail {

/// Split-search workspace reused across all nodes of one tree.
struct TreeBuilder {
    const Dataset& data;
    SplitCriterion criterion;
    TreeLimits limits;
    int mtry;
    std::uint64_t tree_seed;

    std::vector<TreeNode> nodes;
    std::vector<std::size_t> rows;            // permuted in place; node owns [begin,end)
    std::vector<std::pair<double, std::size_t>> sorted;  // (value, position in rows)
    std::vector<std::size_t> scratch_rows;
    std::vector<int> feat_perm;
    std::vector<std::int64_t> left_counts, right_counts, node_counts;
    std::vector<double> xlogx;                // xlogx[i] = i * ln(i)
    std::uint64_t node_ordinal = 0;
    int n_classes = 0;
    int next_leaf = 0;

    // Relative guard against rounding noise masquerading as gain; genuine
    // useful splits clear it by many orders of magnitude.
    static constexpr double kMinGain = 1e-10;

    TreeBuilder(const Dataset& d, std::span<const std::size_t> row_idx, SplitCriterion crit,
                const TreeLimits& lim, int feature_subsample, std::uint64_t seed)
        : data(d), criterion(crit), limits(lim), mtry(feature_subsample), tree_seed(seed),
          rows(row_idx.begin(), row_idx.end()), n_classes(static_cast<int>(d.n_classes())) {
        left_counts.resize(static_cast<std::size_t>(n_classes));
        right_counts.resize(static_cast<std::size_t>(n_classes));
        node_counts.resize(static_cast<std::size_t>(n_classes));
        feat_perm.resize(d.n_features());
        sorted.reserve(rows.size());
        scratch_rows.reserve(rows.size());
        if (criterion == SplitCriterion::entropy) {
            xlogx.resize(rows.size() + 1);
            xlogx[0] = 0.0;
            for (std::size_t i = 1; i < xlogx.size(); ++i) {
                double di = static_cast<double>(i);
                xlogx[i] = di * std::log(di);
            }
        }
    }

    struct Candidate {
        bool found = false;
        int feature = -1;
        double threshold = 0.0;
        std::size_t left_size = 0;
        double score = -std::numeric_limits<double>::infinity();
    };

    /// Impurity proxy to maximize: gini uses sum(c^2)/n per side, entropy
    /// uses sum(c ln c) - n ln n per side. Both increase strictly with the
    /// true impurity decrease.
    double side_score(std::span<const std::int64_t> counts, std::int64_t n) const {
        if (criterion == SplitCriterion::gini) {
            std::int64_t sum_sq = 0;
            for (std::int64_t c : counts) sum_sq += c * c;
            return static_cast<double>(sum_sq) / static_cast<double>(n);
        }
        double s = 0.0;
        for (std::int64_t c : counts) s += xlogx[static_cast<std::size_t>(c)];
        return s - xlogx_of(n);
    }

    double xlogx_of(std::int64_t n) const {
        if (static_cast<std::size_t>(n) < xlogx.size()) return xlogx[static_cast<std::size_t>(n)];
        double dn = static_cast<double>(n);
        return dn * std::log(dn);
    }

    /// Best threshold on one feature for rows[begin,end). Midpoints between
    /// consecutive distinct sorted values are the candidates.
    void scan_feature(int feature, std::size_t begin, std::size_t end, Candidate& best,
                      double parent_score) {
        const std::size_t m = end - begin;
        sorted.clear();
        for (std::size_t i = begin; i < end; ++i)
            sorted.push_back({data.at(rows[i], static_cast<std::size_t>(feature)), i});
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front().first == sorted.back().first) return;  // constant feature

        std::fill(left_counts.begin(), left_counts.end(), 0);
        std::copy(node_counts.begin(), node_counts.end(), right_counts.begin());

        const std::int64_t msl = limits.min_samples_leaf;
        std::int64_t gini_left_sq = 0, gini_right_sq = 0;
        double ent_left = 0.0, ent_right = 0.0;
        if (criterion == SplitCriterion::gini) {
            for (std::int64_t c : right_counts) gini_right_sq += c * c;
        } else {
            for (std::int64_t c : right_counts) ent_right += xlogx[static_cast<std::size_t>(c)];
        }

        for (std::size_t i = 0; i + 1 < m; ++i) {
            const std::size_t cls = static_cast<std::size_t>(data.labels[rows[sorted[i].second]]);
            if (criterion == SplitCriterion::gini) {
                gini_left_sq += 2 * left_counts[cls] + 1;
                gini_right_sq -= 2 * right_counts[cls] - 1;
            } else {
                ent_left += xlogx[static_cast<std::size_t>(left_counts[cls] + 1)] -
                            xlogx[static_cast<std::size_t>(left_counts[cls])];
                ent_right += xlogx[static_cast<std::size_t>(right_counts[cls] - 1)] -
                             xlogx[static_cast<std::size_t>(right_counts[cls])];
            }
            left_counts[cls]++;
            right_counts[cls]--;

            if (sorted[i].first == sorted[i + 1].first) continue;  // not a boundary
            const std::int64_t nl = static_cast<std::int64_t>(i) + 1;
            const std::int64_t nr = static_cast<std::int64_t>(m) - nl;
            if (nl < msl || nr < msl) continue;

            double score;
            if (criterion == SplitCriterion::gini)
                score = static_cast<double>(gini_left_sq) / static_cast<double>(nl) +
                        static_cast<double>(gini_right_sq) / static_cast<double>(nr);
            else
                score = ent_left - xlogx_of(nl) + ent_right - xlogx_of(nr);

            if (score > best.score &&
                score > parent_score + kMinGain * (1.0 + std::abs(parent_score))) {
                best.found = true;
                best.feature = feature;
                best.threshold = sorted[i].first + 0.5 * (sorted[i + 1].first - sorted[i].first);
                best.left_size = static_cast<std::size_t>(nl);
                best.score = score;
            }
        }
    }

    struct PendingNode {
        std::size_t begin, end;
        int depth;
        std::int32_t parent;  // -1 for the root
        bool is_left_child;
    };

    /// Greedy partitioning, depth-first with an explicit stack (keeps deep
    /// trees off the call stack). Nodes are appended in preorder, so child
    /// indices always exceed the parent's.
    void build_all() {
        std::vector<PendingNode> pending;
        pending.push_back({0, rows.size(), 0, -1, false});
        while (!pending.empty()) {
            const PendingNode task = pending.back();
            pending.pop_back();
            const std::size_t m = task.end - task.begin;
            const std::int32_t node_index = static_cast<std::int32_t>(nodes.size());
            nodes.emplace_back();
            if (task.parent >= 0) {
                TreeNode& p = nodes[static_cast<std::size_t>(task.parent)];
                (task.is_left_child ? p.left : p.right) = node_index;
            }
            const std::uint64_t ordinal = node_ordinal++;

            std::fill(node_counts.begin(), node_counts.end(), 0);
            for (std::size_t i = task.begin; i < task.end; ++i)
                node_counts[static_cast<std::size_t>(data.labels[rows[i]])]++;
            const std::int64_t majority = *std::max_element(node_counts.begin(), node_counts.end());

            bool make_leaf = majority == static_cast<std::int64_t>(m) ||
                             m < static_cast<std::size_t>(limits.min_samples_split) ||
                             m < 2 * static_cast<std::size_t>(limits.min_samples_leaf) ||
                             (limits.max_depth && task.depth >= *limits.max_depth);

            Candidate best;
            if (!make_leaf) {
                // Feature subsample without replacement, seeded from (tree
                // seed, node ordinal) so results do not depend on build order.
                Rng rng(mix64(tree_seed, ordinal));
                const int n_feat = static_cast<int>(data.n_features());
                std::iota(feat_perm.begin(), feat_perm.end(), 0);
                const double parent_score = side_score(node_counts, static_cast<std::int64_t>(m));
                for (int j = 0; j < mtry; ++j) {
                    std::size_t pick = static_cast<std::size_t>(j) +
                                       rng.below(static_cast<std::size_t>(n_feat - j));
                    std::swap(feat_perm[static_cast<std::size_t>(j)], feat_perm[pick]);
                    scan_feature(feat_perm[static_cast<std::size_t>(j)], task.begin, task.end,
                                 best, parent_score);
                }
                make_leaf = !best.found;
            }

            if (make_leaf) {
                TreeNode& leaf = nodes[static_cast<std::size_t>(node_index)];
                leaf.leaf_id = next_leaf++;
                leaf.class_counts = node_counts;
                leaf.n_samples = static_cast<std::int64_t>(m);
                continue;
            }

            // Stable two-way partition of the node's rows around the threshold.
            scratch_rows.clear();
            std::size_t fill = task.begin;
            for (std::size_t i = task.begin; i < task.end; ++i) {
                if (data.at(rows[i], static_cast<std::size_t>(best.feature)) <= best.threshold)
                    rows[fill++] = rows[i];
                else
                    scratch_rows.push_back(rows[i]);
            }
            std::copy(scratch_rows.begin(), scratch_rows.end(),
                      rows.begin() + static_cast<std::ptrdiff_t>(fill));
            const std::size_t mid = task.begin + best.left_size;

            nodes[static_cast<std::size_t>(node_index)].feature = best.feature;
            nodes[static_cast<std::size_t>(node_index)].threshold = best.threshold;
            // Right is pushed first so the left subtree is built next (preorder).
            pending.push_back({mid, task.end, task.depth + 1, node_index, false});
            pending.push_back({task.begin, mid, task.depth + 1, node_index, true});
        }
    }
};

}  // namespace detail

/// Fit a CART tree on the given rows (duplicates allowed, e.g. a bootstrap
/// sample). At every node `feature_subsample` features are drawn without
/// replacement; candidate thresholds are midpoints between consecutive
/// distinct values; the split with the largest impurity decrease wins and
/// zero-gain splits become leaves. Deterministic for a given seed.
inline DecisionTree fit_tree(const Dataset& d, std::span<const std::size_t> row_idx,
                             SplitCriterion criterion, const TreeLimits& limits,
                             int feature_subsample, std::uint64_t seed) {
    if (row_idx.empty()) throw ConfigError("fit_tree: empty row index list");
    if (feature_subsample < 1 || feature_subsample > static_cast<int>(d.n_features()))
        throw ConfigError("fit_tree: feature_subsample must be in [1, n_features]");
    if (limits.min_samples_leaf < 1 || limits.min_samples_split < 2)
        throw ConfigError("fit_tree: invalid limits");

    detail::TreeBuilder builder(d, row_idx, criterion, limits, feature_subsample, seed);
    builder.nodes.reserve(2 * row_idx.size());
    builder.build_all();

    DecisionTree t;
    t.nodes = std::move(builder.nodes);
    t.n_classes = static_cast<int>(d.n_classes());
    t.n_leaves = builder.next_leaf;
    t.n_features = static_cast<int>(d.n_features());
    return t;
}

}  // namespace dbrf
