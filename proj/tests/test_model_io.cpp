#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbrf/model_io.hpp"
#include "support/synthetic.hpp"

using namespace dbrf;
namespace fs = std::filesystem;

namespace {

CascadeModel trained_model(std::uint64_t seed, int iterations = 2) {
    Dataset d = testsupport::make_blobs({50, 50}, 3, 4.0, 1.8, seed);
    TrainConfig cfg;
    cfg.n_trees = 8;
    cfg.n_iterations = iterations;
    cfg.master_seed = seed;
    return train_cascade(d, cfg).first;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("save/load round-trips predictions", "[persist]") {
    CascadeModel m = trained_model(3);
    auto path = fs::temp_directory_path() / "dbrf_model_rt.json";
    save_model(m, path);
    CascadeModel loaded = load_model(path);

    REQUIRE(loaded.levels.size() == m.levels.size());
    CHECK(loaded.schema.class_names == m.schema.class_names);
    CHECK(loaded.config.n_trees == m.config.n_trees);
    CHECK(loaded.config.master_seed == m.config.master_seed);

    // 100 random probe rows, bit-identical outputs.
    Rng rng(8);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
        rows.push_back({rng.uniform() * 12.0 - 6.0, rng.uniform() * 12.0 - 6.0,
                        rng.uniform() * 12.0 - 6.0});
        labels.push_back(static_cast<int>(rng.below(3)));
    }
    Dataset probe = testsupport::dataset_from_rows(rows, labels, 3);
    probe.schema = m.schema;
    auto a = predict_cascade(m, probe);
    auto b = predict_cascade(loaded, probe);
    REQUIRE(a.predicted == b.predicted);
    REQUIRE(a.level_used == b.level_used);
}

TEST_CASE("model file begins with format_version", "[persist]") {
    CascadeModel m = trained_model(5, 1);
    auto path = fs::temp_directory_path() / "dbrf_model_fv.json";
    save_model(m, path);
    const std::string text = slurp(path);
    const auto first_key = text.find('"');
    REQUIRE(first_key != std::string::npos);
    CHECK(text.substr(first_key, 16) == "\"format_version\"");
}

TEST_CASE("save-load-save is byte identical", "[persist]") {
    CascadeModel m = trained_model(7);
    auto p1 = fs::temp_directory_path() / "dbrf_model_a.json";
    auto p2 = fs::temp_directory_path() / "dbrf_model_b.json";
    save_model(m, p1);
    save_model(load_model(p1), p2);
    REQUIRE(slurp(p1) == slurp(p2));
}

TEST_CASE("corrupted file is an error, not a crash", "[persist]") {
    auto path = fs::temp_directory_path() / "dbrf_model_bad.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_model(path), DataError);
    std::ofstream(path) << "[1,2,3]";
    CHECK_THROWS_AS(load_model(path), DataError);
    CHECK_THROWS_AS(load_model(fs::temp_directory_path() / "dbrf_no_such.json"), DataError);
}

TEST_CASE("unsupported version is rejected", "[persist]") {
    CascadeModel m = trained_model(9, 1);
    auto path = fs::temp_directory_path() / "dbrf_model_v999.json";
    save_model(m, path);
    std::string text = slurp(path);
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"format_version\": 1").size(), "\"format_version\": 999");
    std::ofstream(path, std::ios::binary) << text;
    CHECK_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("format_version 999"));
}

TEST_CASE("missing score-table entry names the tree", "[persist]") {
    CascadeModel m = trained_model(11, 1);
    auto path = fs::temp_directory_path() / "dbrf_model_gap.json";
    // Chop one leaf score off the first tree's list.
    m.levels[0].score_table.scores[0].pop_back();
    CHECK_THROWS_WITH(save_model(m, path), Catch::Matchers::ContainsSubstring("tree 0"));

    // And via the file: write a valid model, corrupt the scores array.
    CascadeModel ok = trained_model(11, 1);
    save_model(ok, path);
    auto j = nlohmann::ordered_json::parse(slurp(path));
    auto& scores = j["levels"][0]["score_table"]["scores"][0];
    REQUIRE(scores.is_array());
    scores.erase(scores.size() - 1);
    std::ofstream(path, std::ios::binary) << j.dump(1) << '\n';
    try {
        load_model(path);
        FAIL("expected an invariant error");
    } catch (const InvariantError& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("tree 0"));
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("leaf"));
    }
}

TEST_CASE("model invariants are rechecked on load", "[persist]") {
    CascadeModel m = trained_model(13, 1);
    auto path = fs::temp_directory_path() / "dbrf_model_inv.json";
    save_model(m, path);
    auto j = nlohmann::ordered_json::parse(slurp(path));
    // Corrupt a leaf's class counts so they no longer sum to n_samples.
    for (auto& node : j["levels"][0]["forest"]["trees"][0]["nodes"]) {
        if (node.contains("leaf_id")) {
            node["class_counts"][0] = node["class_counts"][0].get<long long>() + 1;
            break;
        }
    }
    std::ofstream(path, std::ios::binary) << j.dump(1) << '\n';
    CHECK_THROWS_AS(load_model(path), InvariantError);
}
