#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "dbrf/cascade.hpp"
#include "dbrf/common.hpp"

namespace dbrf {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

using json = nlohmann::ordered_json;  // fields serialize in insertion order

inline json schema_to_json(const FeatureSchema& s) {
    json cols = json::array();
    for (const auto& c : s.columns)
        cols.push_back({{"kind", c.kind == ColumnKind::numeric ? "numeric" : "categorical"},
                        {"name", c.name}});
    return {{"columns", cols},
            {"label_column", s.label_column},
            {"categorical_maps", s.categorical_maps},
            {"class_names", s.class_names}};
}

inline FeatureSchema schema_from_json(const json& j) {
    FeatureSchema s;
    for (const auto& c : j.at("columns")) {
        const std::string kind = c.at("kind").get<std::string>();
        if (kind != "numeric" && kind != "categorical")
            throw DataError("model file: unknown column kind '" + kind + "'");
        s.columns.push_back({c.at("name").get<std::string>(),
                             kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical});
    }
    s.label_column = j.at("label_column").get<std::string>();
    s.categorical_maps = j.at("categorical_maps").get<std::vector<std::vector<std::string>>>();
    s.class_names = j.at("class_names").get<std::vector<std::string>>();
    return s;
}

inline json config_to_json(const TrainConfig& c) {
    json j{{"n_iterations", c.n_iterations},
           {"n_trees", c.n_trees},
           {"split_criterion", to_string(c.split_criterion)},
           {"hem_metric", to_string(c.hem_metric)},
           {"evolution_ratio", c.evolution_ratio},
           {"evolution_enabled", c.evolution_enabled},
           {"smart_iteration_enabled", c.smart_iteration_enabled},
           {"patience", c.patience},
           {"k_folds", c.k_folds},
           {"min_hard_rows", c.min_hard_rows},
           {"master_seed", c.master_seed},
           {"min_samples_leaf", c.limits.min_samples_leaf},
           {"min_samples_split", c.limits.min_samples_split},
           {"feature_subsample", c.feature_subsample}};
    if (c.limits.max_depth) j["max_depth"] = *c.limits.max_depth;
    else j["max_depth"] = nullptr;
    return j;
}

inline TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.n_iterations = j.at("n_iterations").get<int>();
    c.n_trees = j.at("n_trees").get<int>();
    c.split_criterion = criterion_from_string(j.at("split_criterion").get<std::string>());
    c.hem_metric = leaf_metric_from_string(j.at("hem_metric").get<std::string>());
    c.evolution_ratio = j.at("evolution_ratio").get<double>();
    c.evolution_enabled = j.at("evolution_enabled").get<bool>();
    c.smart_iteration_enabled = j.at("smart_iteration_enabled").get<bool>();
    c.patience = j.at("patience").get<int>();
    c.k_folds = j.at("k_folds").get<int>();
    c.min_hard_rows = j.at("min_hard_rows").get<int>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.limits.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    c.limits.min_samples_split = j.at("min_samples_split").get<int>();
    if (!j.at("max_depth").is_null()) c.limits.max_depth = j.at("max_depth").get<int>();
    c.feature_subsample = j.at("feature_subsample").get<int>();
    return c;
}

inline json tree_to_json(const DecisionTree& t) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
        if (nd.is_leaf())
            nodes.push_back({{"leaf_id", nd.leaf_id},
                             {"class_counts", nd.class_counts},
                             {"n_samples", nd.n_samples}});
        else
            nodes.push_back({{"feature", nd.feature},
                             {"threshold", nd.threshold},
                             {"left", nd.left},
                             {"right", nd.right}});
    }
    return {{"nodes", nodes}, {"n_leaves", t.n_leaves}};
}

inline DecisionTree tree_from_json(const json& j, int n_classes, int n_features) {
    DecisionTree t;
    t.n_classes = n_classes;
    t.n_features = n_features;
    t.n_leaves = j.at("n_leaves").get<int>();
    for (const auto& nj : j.at("nodes")) {
        TreeNode nd;
        if (nj.contains("leaf_id")) {
            nd.leaf_id = nj.at("leaf_id").get<std::int32_t>();
            nd.class_counts = nj.at("class_counts").get<std::vector<std::int64_t>>();
            nd.n_samples = nj.at("n_samples").get<std::int64_t>();
        } else {
            nd.feature = nj.at("feature").get<int>();
            nd.threshold = nj.at("threshold").get<double>();
            nd.left = nj.at("left").get<std::int32_t>();
            nd.right = nj.at("right").get<std::int32_t>();
        }
        t.nodes.push_back(std::move(nd));
    }
    return t;
}

}  // namespace detail

/// Serialize a cascade model to a self-describing JSON file. format_version
/// leads, field order is fixed, and doubles round-trip exactly, so saving a
/// loaded model reproduces the file byte for byte.
inline void save_model(const CascadeModel& m, const std::filesystem::path& path) {
    using detail::json;
    m.validate();

    json levels = json::array();
    for (const auto& lv : m.levels) {
        json trees = json::array();
        for (const auto& t : lv.forest.trees) trees.push_back(detail::tree_to_json(t));
        json forest{{"trees", trees},
                    {"tree_seeds", lv.forest.tree_seeds},
                    {"n_classes", lv.forest.n_classes},
                    {"n_trees", lv.forest.config.n_trees},
                    {"bootstrap", lv.forest.config.bootstrap},
                    {"criterion", to_string(lv.forest.config.criterion)},
                    {"feature_subsample", lv.forest.config.feature_subsample},
                    {"min_samples_leaf", lv.forest.config.limits.min_samples_leaf},
                    {"min_samples_split", lv.forest.config.limits.min_samples_split}};
        if (lv.forest.config.limits.max_depth) forest["max_depth"] = *lv.forest.config.limits.max_depth;
        else forest["max_depth"] = nullptr;
        json table{{"metric", to_string(lv.score_table.metric)},
                   {"scores", lv.score_table.scores},
                   {"sigma", lv.score_table.sigma}};
        levels.push_back({{"forest", forest},
                          {"score_table", table},
                          {"level_index", lv.level_index}});
    }
    json stats = json::array();
    for (const auto& fs : m.feature_stats)
        stats.push_back({{"min", fs.min}, {"max", fs.max}, {"median", fs.median}});

    json root{{"format_version", kModelFormatVersion},
              {"schema", detail::schema_to_json(m.schema)},
              {"config", detail::config_to_json(m.config)},
              {"feature_stats", stats},
              {"levels", levels}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << root.dump(1) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

/// Load and fully re-validate a model file. Unknown versions, parse
/// failures, and invariant violations are reported as errors, never UB.
inline CascadeModel load_model(const std::filesystem::path& path) {
    using detail::json;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());

    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw DataError("model file " + path.string() + ": parse error: " + e.what());
    }

    try {
        if (!root.contains("format_version"))
            throw DataError("model file " + path.string() + ": missing format_version");
        const int version = root.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw DataError("model file " + path.string() + ": unsupported format_version " +
                            std::to_string(version));

        CascadeModel m;
        m.schema = detail::schema_from_json(root.at("schema"));
        m.config = detail::config_from_json(root.at("config"));
        for (const auto& sj : root.at("feature_stats"))
            m.feature_stats.push_back({sj.at("min").get<double>(), sj.at("max").get<double>(),
                                       sj.at("median").get<double>()});

        for (const auto& lj : root.at("levels")) {
            CascadeLevel lv;
            lv.level_index = lj.at("level_index").get<int>();
            const json& fj = lj.at("forest");
            lv.forest.n_classes = fj.at("n_classes").get<int>();
            lv.forest.tree_seeds = fj.at("tree_seeds").get<std::vector<std::uint64_t>>();
            lv.forest.config.n_trees = fj.at("n_trees").get<int>();
            lv.forest.config.bootstrap = fj.at("bootstrap").get<bool>();
            lv.forest.config.criterion = criterion_from_string(fj.at("criterion").get<std::string>());
            lv.forest.config.feature_subsample = fj.at("feature_subsample").get<int>();
            lv.forest.config.limits.min_samples_leaf = fj.at("min_samples_leaf").get<int>();
            lv.forest.config.limits.min_samples_split = fj.at("min_samples_split").get<int>();
            if (!fj.at("max_depth").is_null())
                lv.forest.config.limits.max_depth = fj.at("max_depth").get<int>();
            for (const auto& tj : fj.at("trees"))
                lv.forest.trees.push_back(detail::tree_from_json(
                    tj, lv.forest.n_classes, static_cast<int>(m.schema.n_features())));
            const json& sj = lj.at("score_table");
            lv.score_table.metric = leaf_metric_from_string(sj.at("metric").get<std::string>());
            lv.score_table.scores = sj.at("scores").get<std::vector<std::vector<double>>>();
            lv.score_table.sigma = sj.at("sigma").get<double>();
            m.levels.push_back(std::move(lv));
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw DataError("model file " + path.string() + ": malformed: " + e.what());
    }
}

}  // namespace dbrf
