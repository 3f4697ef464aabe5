#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "dbrf/forest.hpp"
#include "support/synthetic.hpp"

using namespace dbrf;

TEST_CASE("one tree on pure-class data", "[forest]") {
    auto d = testsupport::dataset_from_rows({{1.0}, {2.0}}, {1, 1}, 2);
    ForestConfig cfg;
    cfg.n_trees = 1;
    Forest f = fit_forest(d, cfg, 0);
    REQUIRE(f.trees.size() == 1);
    CHECK(f.trees[0].n_leaves == 1);
    CHECK(predict_forest(f, d.row(0)) == 1);
}

TEST_CASE("fit_forest is deterministic per master seed", "[forest]") {
    Rng rng(77);
    Dataset d = testsupport::random_dataset(rng);
    ForestConfig cfg;
    cfg.n_trees = 11;
    Forest a = fit_forest(d, cfg, 12345);
    Forest b = fit_forest(d, cfg, 12345);
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
            CHECK(a.trees[t].nodes[i].feature == b.trees[t].nodes[i].feature);
            CHECK(a.trees[t].nodes[i].threshold == b.trees[t].nodes[i].threshold);
            CHECK(a.trees[t].nodes[i].class_counts == b.trees[t].nodes[i].class_counts);
        }
    }
    Forest c = fit_forest(d, cfg, 54321);
    bool any_diff = false;
    for (std::size_t t = 0; t < a.trees.size() && !any_diff; ++t)
        any_diff = a.trees[t].nodes.size() != c.trees[t].nodes.size();
    CHECK((any_diff || a.trees[0].nodes.size() != c.trees[0].nodes.size() ||
           a.trees[0].nodes[0].threshold != c.trees[0].nodes[0].threshold));
}

TEST_CASE("forest training is thread-count independent", "[forest]") {
    Rng rng(3);
    Dataset d = testsupport::random_dataset(rng, 50, 90);
    ForestConfig cfg;
    cfg.n_trees = 8;
    set_max_threads(1);
    Forest serial = fit_forest(d, cfg, 42);
    set_max_threads(4);
    Forest parallel = fit_forest(d, cfg, 42);
    set_max_threads(0);
    REQUIRE(serial.trees.size() == parallel.trees.size());
    for (std::size_t t = 0; t < serial.trees.size(); ++t) {
        REQUIRE(serial.trees[t].nodes.size() == parallel.trees[t].nodes.size());
        for (std::size_t i = 0; i < serial.trees[t].nodes.size(); ++i) {
            REQUIRE(serial.trees[t].nodes[i].threshold == parallel.trees[t].nodes[i].threshold);
            REQUIRE(serial.trees[t].nodes[i].leaf_id == parallel.trees[t].nodes[i].leaf_id);
        }
    }
}

TEST_CASE("majority vote and tie rule", "[forest]") {
    // Hand-built forest: three single-leaf trees with fixed votes.
    auto make_stump = [](std::vector<std::int64_t> counts) {
        DecisionTree t;
        TreeNode leaf;
        leaf.leaf_id = 0;
        leaf.n_samples = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
        leaf.class_counts = std::move(counts);
        t.nodes.push_back(leaf);
        t.n_classes = 2;
        t.n_leaves = 1;
        t.n_features = 1;
        return t;
    };
    Forest f;
    f.n_classes = 2;
    f.trees = {make_stump({1, 9}), make_stump({2, 8}), make_stump({7, 3})};  // votes 1,1,0
    f.tree_seeds = {0, 1, 2};
    CHECK(predict_forest(f, std::vector<double>{0.0}) == 1);

    Forest g;
    g.n_classes = 2;
    g.trees = {make_stump({1, 9}), make_stump({9, 1})};  // votes 1,0 -> tie -> 0
    g.tree_seeds = {0, 1};
    CHECK(predict_forest(g, std::vector<double>{0.0}) == 0);
}

TEST_CASE("single-tree forest without bootstrap equals the tree", "[forest][property]") {
    Rng rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        Dataset d = testsupport::random_dataset(rng);
        ForestConfig cfg;
        cfg.n_trees = 1;
        cfg.bootstrap = false;
        cfg.feature_subsample = static_cast<int>(d.n_features());
        Forest f = fit_forest(d, cfg, rng.next());
        for (std::size_t r = 0; r < d.n_rows(); ++r)
            REQUIRE(predict_forest(f, d.row(r)) == predict_tree(f.trees[0], d.row(r)));
    }
}

TEST_CASE("vote-count identity", "[forest][property]") {
    Rng rng(23);
    Dataset d = testsupport::random_dataset(rng);
    ForestConfig cfg;
    cfg.n_trees = 15;
    Forest f = fit_forest(d, cfg, 7);
    for (std::size_t r = 0; r < std::min<std::size_t>(d.n_rows(), 50); ++r) {
        auto votes = vote_counts(f, d.row(r));
        const int winner = predict_forest(f, d.row(r));
        for (std::size_t c = 0; c < votes.size(); ++c)
            REQUIRE(votes[static_cast<std::size_t>(winner)] >= votes[c]);
        CHECK(std::accumulate(votes.begin(), votes.end(), 0) == 15);
    }
}

TEST_CASE("route_all matches per-row routing", "[forest]") {
    Rng rng(29);
    Dataset d = testsupport::random_dataset(rng);
    ForestConfig cfg;
    cfg.n_trees = 5;
    Forest f = fit_forest(d, cfg, 1);
    LeafAssignments a = route_all(f, d);
    REQUIRE(a.n_rows == d.n_rows());
    REQUIRE(a.n_trees == 5);
    for (std::size_t r = 0; r < d.n_rows(); ++r)
        for (std::size_t t = 0; t < f.trees.size(); ++t)
            REQUIRE(a.at(r, t) == route(f.trees[t], d.row(r)));
}

TEST_CASE("route_all on single-leaf trees is all zeros", "[forest]") {
    auto d = testsupport::dataset_from_rows({{1.0}, {2.0}, {3.0}}, {0, 0, 0}, 2);
    ForestConfig cfg;
    cfg.n_trees = 4;
    Forest f = fit_forest(d, cfg, 9);
    LeafAssignments a = route_all(f, d);
    for (auto id : a.ids) CHECK(id == 0);
}

TEST_CASE("fit_forest rejects bad input", "[forest]") {
    Dataset empty;
    empty.schema.class_names = {"a", "b"};
    CHECK_THROWS_AS(fit_forest(empty, {}, 0), ConfigError);
    Rng rng(5);
    Dataset d = testsupport::random_dataset(rng);
    ForestConfig cfg;
    cfg.n_trees = 0;
    CHECK_THROWS_AS(fit_forest(d, cfg, 0), ConfigError);
}
