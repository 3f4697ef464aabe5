#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "dbrf/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace dbrf;
using Catch::Matchers::WithinAbs;

TEST_CASE("accuracy basics", "[metrics]") {
    std::vector<int> truth{0, 1, 0, 0};
    CHECK(accuracy(std::vector<int>{0, 1, 0, 0}, truth) == 1.0);
    CHECK_THAT(accuracy(std::vector<int>{0, 1, 1, 0}, truth), WithinAbs(0.75, 1e-15));
    CHECK(accuracy(std::vector<int>{1, 0, 1, 1}, truth) == 0.0);
    CHECK_THROWS_AS(accuracy(std::vector<int>{0}, truth), ConfigError);
}

TEST_CASE("accuracy equals confusion trace over n", "[metrics][property]") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        const int c = 2 + static_cast<int>(rng.below(4));
        std::vector<int> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<int>(rng.below(static_cast<std::size_t>(c)));
            truth[i] = static_cast<int>(rng.below(static_cast<std::size_t>(c)));
        }
        auto m = confusion_matrix(pred, truth, c);
        std::int64_t trace = 0, total = 0;
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j) {
                total += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (i == j) trace += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        REQUIRE(total == static_cast<std::int64_t>(n));
        REQUIRE_THAT(accuracy(pred, truth),
                     WithinAbs(static_cast<double>(trace) / static_cast<double>(n), 1e-15));
    }
}

TEST_CASE("auc known values", "[metrics]") {
    // Perfect separation.
    CHECK(auc_roc(std::vector<double>{0.9, 0.8, 0.2, 0.1},
                  std::vector<int>{1, 1, 0, 0}) == 1.0);
    // All ties.
    CHECK_THAT(auc_roc(std::vector<double>{0.5, 0.5, 0.5, 0.5},
                       std::vector<int>{1, 0, 1, 0}),
               WithinAbs(0.5, 1e-15));
    // pos {0.9, 0.4}, neg {0.8, 0.2, 0.1}: 5 wins of 6 pairs.
    CHECK_THAT(auc_roc(std::vector<double>{0.9, 0.4, 0.8, 0.2, 0.1},
                       std::vector<int>{1, 1, 0, 0, 0}),
               WithinAbs(5.0 / 6.0, 1e-12));
}

TEST_CASE("auc rejects degenerate input", "[metrics]") {
    CHECK_THROWS_AS(auc_roc(std::vector<double>{0.5, 0.6}, std::vector<int>{1, 1}), ConfigError);
    CHECK_THROWS_AS(auc_roc(std::vector<double>{0.5}, std::vector<int>{1, 0}), ConfigError);
    CHECK_THROWS_AS(auc_roc(std::vector<double>{0.5, 0.6}, std::vector<int>{0, 2}), ConfigError);
}

TEST_CASE("auc matches pairwise counting on random data", "[metrics][oracle]") {
    Rng rng(13);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n = 2 + rng.below(100);
        std::vector<double> scores(n);
        std::vector<int> truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid of scores so ties actually happen.
            scores[i] = static_cast<double>(rng.below(8)) / 8.0;
            truth[i] = rng.uniform() < 0.4 ? 1 : 0;
        }
        truth[0] = 1;
        truth[1] = 0;
        REQUIRE_THAT(auc_roc(scores, truth),
                     WithinAbs(oracle::pairwise_auc(scores, truth), 1e-12));
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms", "[metrics][property]") {
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(80);
        std::vector<double> scores(n);
        std::vector<int> truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform();
            truth[i] = rng.uniform() < 0.5 ? 1 : 0;
        }
        truth[0] = 1;
        truth[1] = 0;
        const double base = auc_roc(scores, truth);
        std::vector<double> warped(n);
        for (std::size_t i = 0; i < n; ++i)
            warped[i] = std::exp(3.0 * scores[i]) + 7.0;  // strictly increasing
        REQUIRE_THAT(auc_roc(warped, truth), WithinAbs(base, 1e-12));
        // Negation flips the ranking; without ties AUC complements.
        std::vector<double> neg(n);
        for (std::size_t i = 0; i < n; ++i) neg[i] = -scores[i];
        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end())
            REQUIRE_THAT(auc_roc(neg, truth), WithinAbs(1.0 - base, 1e-12));
    }
}

TEST_CASE("positive_score of a cascade", "[metrics]") {
    // A two-blob binary problem; every tree should vote positive far inside
    // the positive blob.
    Dataset d = testsupport::make_imbalanced(60, 60, 2, 8.0, 5);
    TrainConfig cfg;
    cfg.n_iterations = 1;
    cfg.n_trees = 9;
    cfg.smart_iteration_enabled = false;
    cfg.evolution_enabled = false;
    cfg.master_seed = 3;
    auto [model, report] = train_cascade(d, cfg);

    std::vector<double> deep_positive{8.0, 0.0};
    const double sp = positive_score(model, deep_positive);
    CHECK(sp == 1.0);
    std::vector<double> deep_negative{-4.0, 0.0};
    CHECK(positive_score(model, deep_negative) == 0.0);

    auto all = positive_scores_all(model, d);
    for (double s : all) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
    // Score times tree count is an integer vote count.
    for (double s : all) {
        const double votes = s * static_cast<double>(model.levels[0].forest.trees.size());
        CHECK_THAT(votes, WithinAbs(std::round(votes), 1e-9));
    }
}

TEST_CASE("positive_score requires a binary model", "[metrics]") {
    Dataset d = testsupport::make_blobs({20, 20, 20}, 2, 6.0, 1.0, 9);
    TrainConfig cfg;
    cfg.n_iterations = 1;
    cfg.n_trees = 3;
    cfg.smart_iteration_enabled = false;
    cfg.evolution_enabled = false;
    auto [model, report] = train_cascade(d, cfg);
    CHECK_THROWS_AS(positive_score(model, d.row(0)), ConfigError);
}
