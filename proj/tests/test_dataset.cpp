#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "dbrf/dataset.hpp"
#include "support/synthetic.hpp"

using namespace dbrf;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

fs::path data_dir() {
    const char* env = std::getenv("DBRF_DATA_DIR");
    return env ? fs::path(env) : fs::path("data");
}

}  // namespace

TEST_CASE("load_csv reads the iris file", "[dataset]") {
    Dataset d = load_csv(data_dir() / "iris.csv", "species");
    CHECK(d.n_rows() == 150);
    CHECK(d.n_features() == 4);
    CHECK(d.n_classes() == 3);
    for (const auto& col : d.schema.columns) CHECK(col.kind == ColumnKind::numeric);
    CHECK(d.schema.class_names == std::vector<std::string>{"setosa", "versicolor", "virginica"});
    // Label defaults to the last column.
    Dataset d2 = load_csv(data_dir() / "iris.csv");
    CHECK(d2.labels == d.labels);
}

TEST_CASE("load_csv minimal two-class file", "[dataset]") {
    auto p = write_temp("dbrf_two_rows.csv", "x,y\n1.5,a\n2.5,b\n");
    Dataset d = load_csv(p, "y");
    REQUIRE(d.n_rows() == 2);
    CHECK(d.n_classes() == 2);
    CHECK(std::set<int>(d.labels.begin(), d.labels.end()) == std::set<int>{0, 1});
}

TEST_CASE("load_csv missing-cell policies", "[dataset]") {
    auto p = write_temp("dbrf_missing.csv", "a,b,y\n1,2,u\n,3,v\n4,5,v\n6,?,v\n");
    Dataset dropped = load_csv(p, "y", MissingPolicy::drop);
    CHECK(dropped.n_rows() == 2);  // two rows have a missing cell
    CHECK(dropped.row_ids == std::vector<std::int64_t>{0, 2});

    Dataset imputed = load_csv(p, "y", MissingPolicy::impute);
    CHECK(imputed.n_rows() == 4);
    // Column a: present values 1,4,6 -> median 4. Column b: 2,3,5 -> median 3.
    CHECK(imputed.at(1, 0) == 4.0);
    CHECK(imputed.at(3, 1) == 3.0);
}

TEST_CASE("load_csv drops exactly the one bad row", "[dataset]") {
    auto p = write_temp("dbrf_one_bad.csv", "a,y\n1,u\n,v\n3,u\n4,v\n");
    Dataset all = load_csv(p, "y", MissingPolicy::impute);
    Dataset kept = load_csv(p, "y", MissingPolicy::drop);
    CHECK(all.n_rows() - kept.n_rows() == 1);
}

TEST_CASE("load_csv categorical encoding round-trips", "[dataset]") {
    auto p = write_temp("dbrf_cats.csv",
                        "color,size,y\nred,1,a\nblue,2,b\ngreen,3,a\nblue,4,b\nred,5,a\n");
    Dataset d = load_csv(p, "y");
    REQUIRE(d.schema.columns[0].kind == ColumnKind::categorical);
    REQUIRE(d.schema.columns[1].kind == ColumnKind::numeric);
    // First-appearance codes.
    CHECK(d.schema.categorical_maps[0] == std::vector<std::string>{"red", "blue", "green"});
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(1, 0) == 1.0);
    CHECK(d.at(2, 0) == 2.0);
    CHECK(d.at(3, 0) == 1.0);
    // decode(encode(v)) == v for every cell.
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const auto& name = d.schema.decode_category(0, static_cast<std::size_t>(d.at(r, 0)));
        CHECK(d.schema.encode_category(0, name) == d.at(r, 0));
    }
}

TEST_CASE("load_csv error cases", "[dataset]") {
    CHECK_THROWS_AS(load_csv("/nonexistent/path.csv"), DataError);
    auto one_class = write_temp("dbrf_one_class.csv", "a,y\n1,u\n2,u\n");
    CHECK_THROWS_AS(load_csv(one_class, "y"), DataError);
    auto no_label = write_temp("dbrf_no_label.csv", "a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(no_label, "nope"), DataError);
    auto dup = write_temp("dbrf_dup.csv", "a,a,y\n1,2,u\n3,4,v\n");
    CHECK_THROWS_AS(load_csv(dup, "y"), DataError);
    auto all_missing = write_temp("dbrf_all_missing.csv", "a,y\n,u\n,v\n");
    CHECK_THROWS_AS(load_csv(all_missing, "y", MissingPolicy::drop), DataError);
    auto ragged = write_temp("dbrf_ragged.csv", "a,b,y\n1,2,u\n3,v\n");
    CHECK_THROWS_AS(load_csv(ragged, "y"), DataError);
}

TEST_CASE("load_csv determinism", "[dataset]") {
    Dataset a = load_csv(data_dir() / "iris.csv");
    Dataset b = load_csv(data_dir() / "iris.csv");
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.row_ids == b.row_ids);
}

TEST_CASE("write_csv then load_csv round-trips", "[dataset]") {
    auto p = write_temp("dbrf_cats2.csv",
                        "color,size,y\nred,1,a\nblue,2,b\ngreen,3,a\nblue,4,b\nred,5,a\n");
    Dataset d = load_csv(p, "y");
    auto p2 = fs::temp_directory_path() / "dbrf_rt.csv";
    write_csv(d, p2);
    Dataset d2 = load_csv(p2, "y");
    CHECK(d2.features == d.features);
    CHECK(d2.labels == d.labels);
    CHECK(d2.schema.class_names == d.schema.class_names);
}

TEST_CASE("load_csv_with_schema matches training encoding", "[dataset]") {
    auto p = write_temp("dbrf_sch_train.csv", "color,y\nred,a\nblue,b\ngreen,a\n");
    Dataset train = load_csv(p, "y");
    // Different row order: self-encoding would assign different codes.
    auto p2 = write_temp("dbrf_sch_test.csv", "color,y\ngreen,b\nred,a\n");
    Dataset test = load_csv_with_schema(p2, train.schema);
    CHECK(test.at(0, 0) == 2.0);  // green kept its training-time code
    CHECK(test.at(1, 0) == 0.0);

    auto unseen = write_temp("dbrf_sch_unseen.csv", "color,y\nyellow,a\n");
    CHECK_THROWS_WITH(load_csv_with_schema(unseen, train.schema),
                      Catch::Matchers::ContainsSubstring("color"));
    auto missing_col = write_temp("dbrf_sch_miss.csv", "hue,y\nred,a\n");
    CHECK_THROWS_WITH(load_csv_with_schema(missing_col, train.schema),
                      Catch::Matchers::ContainsSubstring("color"));
}

TEST_CASE("train_test_split basic contract", "[dataset]") {
    Dataset iris = load_csv(data_dir() / "iris.csv");
    SplitSpec spec{0.67, false, 7};
    auto [train, test] = train_test_split(iris, spec);
    CHECK((train.n_rows() == 100 || train.n_rows() == 101));
    CHECK(train.n_rows() + test.n_rows() == 150);

    std::set<std::int64_t> ids(train.row_ids.begin(), train.row_ids.end());
    for (auto id : test.row_ids) CHECK(ids.insert(id).second);
    CHECK(ids.size() == 150);

    auto [train2, test2] = train_test_split(iris, spec);
    CHECK(train2.row_ids == train.row_ids);
    CHECK(train2.features == train.features);
}

TEST_CASE("train_test_split stratified on two rows", "[dataset]") {
    auto d = testsupport::dataset_from_rows({{0.0}, {1.0}}, {0, 1}, 2);
    auto [train, test] = train_test_split(d, {0.5, true, 3});
    REQUIRE(train.n_rows() == 1);
    REQUIRE(test.n_rows() == 1);
    CHECK(train.labels[0] != test.labels[0]);
}

TEST_CASE("train_test_split stratified proportions", "[dataset]") {
    Dataset iris = load_csv(data_dir() / "iris.csv");
    auto [train, test] = train_test_split(iris, {0.67, true, 11});
    auto counts = train.class_counts();
    for (auto c : counts) {
        // 50 * 0.67 = 33.5 -> within one row.
        CHECK(c >= 33);
        CHECK(c <= 34);
    }
}

TEST_CASE("train_test_split rejects bad input", "[dataset]") {
    auto d = testsupport::dataset_from_rows({{0.0}}, {0}, 2);
    CHECK_THROWS_AS(train_test_split(d, {0.5, false, 0}), ConfigError);
    auto d2 = testsupport::dataset_from_rows({{0.0}, {1.0}}, {0, 1}, 2);
    CHECK_THROWS_AS(train_test_split(d2, {0.0, false, 0}), ConfigError);
}

TEST_CASE("kfold sizes and partition", "[dataset]") {
    auto folds = kfold_indices(10, 5, nullptr, 1);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> all;
    for (const auto& [train, valid] : folds) {
        CHECK(valid.size() == 2);
        CHECK(train.size() == 8);
        for (auto i : valid) CHECK(all.insert(i).second);
    }
    CHECK(all.size() == 10);

    auto folds7 = kfold_indices(7, 3, nullptr, 1);
    std::multiset<std::size_t> sizes;
    for (const auto& [train, valid] : folds7) sizes.insert(valid.size());
    CHECK(sizes == std::multiset<std::size_t>{3, 2, 2});
}

TEST_CASE("kfold stratified keeps class balance", "[dataset]") {
    std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
    auto folds = kfold_indices(8, 2, &labels, 9);
    for (const auto& [train, valid] : folds) {
        int zeros = 0, ones = 0;
        for (auto i : valid) (labels[i] == 0 ? zeros : ones)++;
        CHECK(zeros == 2);
        CHECK(ones == 2);
    }
}

TEST_CASE("kfold rejects out-of-range k", "[dataset]") {
    CHECK_THROWS_AS(kfold_indices(5, 1, nullptr, 0), ConfigError);
    CHECK_THROWS_AS(kfold_indices(5, 6, nullptr, 0), ConfigError);
}

TEST_CASE("splits and folds partition row ids on random data", "[dataset][property]") {
    Rng rng(123);
    for (int trial = 0; trial < 30; ++trial) {
        Dataset d = testsupport::random_dataset(rng);
        SplitSpec spec{0.1 + 0.8 * rng.uniform(), rng.next() % 2 == 0, rng.next()};
        auto [train, test] = train_test_split(d, spec);
        std::set<std::int64_t> ids(train.row_ids.begin(), train.row_ids.end());
        for (auto id : test.row_ids) REQUIRE(ids.insert(id).second);
        REQUIRE(ids.size() == d.n_rows());

        const std::size_t k = 2 + rng.below(4);
        if (d.n_rows() >= k) {
            auto folds = kfold_indices(d.n_rows(), k, &d.labels, rng.next());
            std::set<std::size_t> seen;
            std::size_t min_size = d.n_rows(), max_size = 0;
            for (const auto& [tr, va] : folds) {
                min_size = std::min(min_size, va.size());
                max_size = std::max(max_size, va.size());
                for (auto i : va) REQUIRE(seen.insert(i).second);
            }
            REQUIRE(seen.size() == d.n_rows());
            REQUIRE(max_size - min_size <= 1);
        }
    }
}
