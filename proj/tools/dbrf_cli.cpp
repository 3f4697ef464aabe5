// dbrf: train, apply, and benchmark dynamic boosted random forests on CSV
// datasets.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal invariant
// violation.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbrf/dbrf.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Run manifest: every command records its resolved configuration, input
// digests, outputs, and per-phase wall-clock times.
// ---------------------------------------------------------------------------

class Manifest {
public:
    Manifest(std::string command, std::uint64_t seed) {
        doc_["command"] = std::move(command);
        doc_["seed"] = seed;
        doc_["config"] = ordered_json::object();
        doc_["inputs"] = ordered_json::object();
        doc_["outputs"] = ordered_json::array();
        doc_["timings_seconds"] = ordered_json::object();
    }

    template <typename T>
    void config(const std::string& key, const T& value) { doc_["config"][key] = value; }

    void input(const fs::path& path) {
        doc_["inputs"][path.string()] = digest(path);
    }

    void output(const fs::path& path) { doc_["outputs"].push_back(path.string()); }

    void timing(const std::string& phase, double seconds) {
        doc_["timings_seconds"][phase] = seconds;
    }

    void write(const fs::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw dbrf::DataError("cannot write manifest: " + path.string());
        out << doc_.dump(1) << '\n';
    }

    /// FNV-1a over the file bytes, as 16 hex digits.
    static std::string digest(const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw dbrf::DataError("cannot open file: " + path.string());
        std::uint64_t h = 0xcbf29ce484222325ull;
        char buf[1 << 15];
        while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
            for (std::streamsize i = 0; i < in.gcount(); ++i)
                h = (h ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ull;
            if (!in) break;
        }
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
        return hex;
    }

private:
    ordered_json doc_;
};

class PhaseTimer {
public:
    explicit PhaseTimer(Manifest& m, std::string phase)
        : manifest_(m), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() { manifest_.timing(phase_, seconds()); }
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    Manifest& manifest_;
    std::string phase_;
    std::chrono::steady_clock::time_point start_;
};

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared flag bundles
// ---------------------------------------------------------------------------

struct DataFlags {
    std::string data;
    std::string label;
    std::string missing = "drop";

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", data, "input CSV file")->required();
        cmd->add_option("--label", label, "label column name (default: last column)");
        cmd->add_option("--missing", missing, "missing-cell policy")
            ->check(CLI::IsMember({"drop", "impute"}));
    }

    dbrf::Dataset load() const {
        return dbrf::load_csv(data, label,
                              missing == "drop" ? dbrf::MissingPolicy::drop
                                                : dbrf::MissingPolicy::impute);
    }
};

struct TrainFlags {
    dbrf::TrainConfig cfg;
    bool no_evolution = false;
    bool no_smart_iter = false;
    int max_depth = 0;
    std::vector<int> features;
    std::string criterion_str = "gini";
    std::string metric_str = "f1";

    TrainFlags() { cfg.master_seed = 42; }

    void attach(CLI::App* cmd) {
        cmd->add_option("--trees", cfg.n_trees, "trees per forest")->capture_default_str();
        cmd->add_option("--iters", cfg.n_iterations, "cascade iterations")->capture_default_str();
        cmd->add_option("--criterion", criterion_str, "tree split criterion")
            ->check(CLI::IsMember({"gini", "entropy"}))
            ->capture_default_str();
        cmd->add_option("--metric", metric_str, "leaf quality metric")
            ->check(CLI::IsMember({"supp", "conf", "f1", "gini", "entropy"}))
            ->capture_default_str();
        cmd->add_option("--evolution-ratio", cfg.evolution_ratio, "fraction of trees eliminated")
            ->capture_default_str();
        cmd->add_flag("--no-evolution", no_evolution, "disable the evolution mechanism");
        cmd->add_flag("--no-smart-iter", no_smart_iter, "disable smart iteration rules");
        cmd->add_option("--patience", cfg.patience, "consecutive drops before early stop")
            ->capture_default_str();
        cmd->add_option("--kfolds", cfg.k_folds, "validation folds")->capture_default_str();
        cmd->add_option("--min-hard-rows", cfg.min_hard_rows,
                        "stop when fewer hard rows remain (0 = 2*classes)");
        cmd->add_option("--seed", cfg.master_seed, "master random seed")->capture_default_str();
        cmd->add_option("--max-depth", max_depth, "tree depth limit (0 = unlimited)");
        cmd->add_option("--min-samples-leaf", cfg.limits.min_samples_leaf,
                        "minimum rows per leaf")->capture_default_str();
        cmd->add_option("--min-samples-split", cfg.limits.min_samples_split,
                        "minimum rows to split a node")->capture_default_str();
        cmd->add_option("--mtry", cfg.feature_subsample,
                        "features tried per split (0 = ceil(sqrt(width)))");
        cmd->add_option("--features", features, "train on these feature columns only (indices)")
            ->delimiter(',');
    }

    dbrf::TrainConfig resolve() {
        cfg.split_criterion = dbrf::criterion_from_string(criterion_str);
        cfg.hem_metric = dbrf::leaf_metric_from_string(metric_str);
        cfg.evolution_enabled = !no_evolution;
        cfg.smart_iteration_enabled = !no_smart_iter;
        if (max_depth > 0) cfg.limits.max_depth = max_depth;
        return cfg;
    }

    void describe(Manifest& m) const {
        m.config("trees", cfg.n_trees);
        m.config("iters", cfg.n_iterations);
        m.config("criterion", criterion_str);
        m.config("metric", metric_str);
        m.config("evolution_ratio", cfg.evolution_ratio);
        m.config("evolution", !no_evolution);
        m.config("smart_iteration", !no_smart_iter);
        m.config("patience", cfg.patience);
        m.config("kfolds", cfg.k_folds);
        m.config("min_hard_rows", cfg.min_hard_rows);
        m.config("max_depth", max_depth);
        m.config("min_samples_leaf", cfg.limits.min_samples_leaf);
        m.config("min_samples_split", cfg.limits.min_samples_split);
        m.config("mtry", cfg.feature_subsample);
        if (!features.empty()) m.config("features", features);
    }
};

unsigned resolve_threads(int threads_flag) {
    if (threads_flag > 0) dbrf::set_max_threads(static_cast<unsigned>(threads_flag));
    return dbrf::max_threads();
}

dbrf::Dataset apply_feature_selection(const dbrf::Dataset& d, const std::vector<int>& features) {
    if (features.empty()) return d;
    std::vector<std::size_t> cols;
    for (int f : features) {
        if (f < 0) throw dbrf::ConfigError("negative feature index");
        cols.push_back(static_cast<std::size_t>(f));
    }
    return d.select_features(cols);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCommand {
    DataFlags data;
    TrainFlags train;
    std::string model_out = "model.json";
    std::string report_out = "report.csv";
    std::string manifest_path;
    int threads = 0;

    int run() {
        Manifest manifest("train", train.cfg.master_seed);
        manifest.config("data", data.data);
        manifest.config("label", data.label);
        manifest.config("missing", data.missing);
        train.describe(manifest);
        manifest.config("threads", resolve_threads(threads));
        manifest.input(data.data);

        dbrf::Dataset d;
        {
            PhaseTimer t(manifest, "load");
            d = apply_feature_selection(data.load(), train.features);
        }
        std::cerr << "loaded " << d.n_rows() << " rows, " << d.n_features() << " features, "
                  << d.n_classes() << " classes\n";

        dbrf::CascadeModel model;
        dbrf::TrainReport report;
        {
            PhaseTimer t(manifest, "train");
            std::tie(model, report) = dbrf::train_cascade(d, train.resolve());
        }
        for (std::size_t i = 0; i < report.levels.size(); ++i) {
            const auto& lv = report.levels[i];
            std::cerr << "iter " << (i + 1) << ": rows=" << lv.n_rows_in << " easy=" << lv.n_easy
                      << " hard=" << lv.n_hard;
            if (!std::isnan(lv.validation_accuracy))
                std::cerr << " val=" << format_double(lv.validation_accuracy);
            if (lv.rule_triggered != dbrf::IterationRule::none)
                std::cerr << " rule=" << dbrf::to_string(lv.rule_triggered);
            std::cerr << "\n";
        }
        std::cerr << "trained " << model.levels.size() << " levels ("
                  << report.termination_reason << ")\n";

        {
            PhaseTimer t(manifest, "write");
            dbrf::save_model(model, model_out);
            dbrf::write_report_csv(report, report_out);
        }
        manifest.output(model_out);
        manifest.output(report_out);
        const fs::path mpath = manifest_path.empty() ? fs::path(model_out + ".manifest.json")
                                                     : fs::path(manifest_path);
        manifest.write(mpath);
        return 0;
    }
};

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictCommand {
    std::string model_path;
    std::string data_path;
    std::string out = "predictions.csv";
    std::string manifest_path;
    int threads = 0;

    int run() {
        dbrf::CascadeModel model = dbrf::load_model(model_path);
        Manifest manifest("predict", model.config.master_seed);
        manifest.config("model", model_path);
        manifest.config("data", data_path);
        manifest.config("threads", resolve_threads(threads));
        manifest.input(model_path);
        manifest.input(data_path);

        dbrf::Dataset d;
        {
            PhaseTimer t(manifest, "load");
            d = dbrf::load_csv_with_schema(data_path, model.schema);
        }
        dbrf::CascadePredictions preds;
        std::vector<double> pos_scores;
        {
            PhaseTimer t(manifest, "predict");
            preds = dbrf::predict_cascade(model, d);
            if (model.n_classes() == 2) pos_scores = dbrf::positive_scores_all(model, d);
        }
        {
            PhaseTimer t(manifest, "write");
            std::ofstream o(out, std::ios::binary);
            if (!o) throw dbrf::DataError("cannot write file: " + out);
            o << "row_id,prediction,level_used";
            if (!pos_scores.empty()) o << ",positive_score";
            o << "\n";
            for (std::size_t r = 0; r < d.n_rows(); ++r) {
                o << d.row_ids[r] << ',' << model.schema.decode_class(preds.predicted[r]) << ','
                  << preds.level_used[r];
                if (!pos_scores.empty()) o << ',' << format_double(pos_scores[r]);
                o << "\n";
            }
        }
        std::cerr << "predicted " << d.n_rows() << " rows across " << model.levels.size()
                  << " levels\n";
        manifest.output(out);
        manifest.write(manifest_path.empty() ? fs::path(out + ".manifest.json") : fs::path(manifest_path));
        return 0;
    }
};

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalCommand {
    std::string model_path;
    std::string data_path;
    std::string out;
    std::string manifest_path;
    int threads = 0;

    int run() {
        dbrf::CascadeModel model = dbrf::load_model(model_path);
        Manifest manifest("eval", model.config.master_seed);
        manifest.config("model", model_path);
        manifest.config("data", data_path);
        manifest.config("threads", resolve_threads(threads));
        manifest.input(model_path);
        manifest.input(data_path);

        dbrf::Dataset d;
        {
            PhaseTimer t(manifest, "load");
            d = dbrf::load_csv_with_schema(data_path, model.schema);
        }
        dbrf::EvalResult result;
        {
            PhaseTimer t(manifest, "evaluate");
            auto preds = dbrf::predict_cascade(model, d);
            std::vector<double> scores;
            if (model.n_classes() == 2) scores = dbrf::positive_scores_all(model, d);
            result = dbrf::evaluate(preds.predicted, d.labels, model.n_classes(), scores);
        }

        auto emit = [&](std::ostream& o) {
            o << "metric,value\n";
            o << "n," << result.n << "\n";
            o << "accuracy," << format_double(result.accuracy) << "\n";
            if (result.auc) o << "auc," << format_double(*result.auc) << "\n";
            for (std::size_t i = 0; i < result.confusion.size(); ++i)
                for (std::size_t j = 0; j < result.confusion[i].size(); ++j)
                    o << "confusion_" << model.schema.decode_class(static_cast<int>(i)) << '_'
                      << model.schema.decode_class(static_cast<int>(j)) << ','
                      << result.confusion[i][j] << "\n";
        };
        emit(std::cout);
        if (!out.empty()) {
            std::ofstream o(out, std::ios::binary);
            if (!o) throw dbrf::DataError("cannot write file: " + out);
            emit(o);
            manifest.output(out);
        }
        manifest.write(manifest_path.empty()
                           ? (out.empty() ? fs::path("eval.manifest.json")
                                          : fs::path(out + ".manifest.json"))
                           : fs::path(manifest_path));
        return 0;
    }
};

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkCommand {
    DataFlags data;
    TrainFlags train;
    int splits = 5;
    double train_fraction = 0.67;
    std::vector<std::string> baselines{"rf"};
    std::string out = "benchmark.csv";
    std::string details_out;
    std::string manifest_path;
    int threads = 0;

    struct Run {
        double accuracy = 0.0;
        std::optional<double> auc;
        double train_seconds = 0.0;
        double predict_seconds = 0.0;
        std::size_t levels = 1;
    };

    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    static double sample_std(const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    }

    int run() {
        if (splits < 1) throw dbrf::ConfigError("--splits must be >= 1");
        for (const auto& b : baselines)
            if (b != "rf") throw dbrf::ConfigError("unsupported baseline: " + b);

        Manifest manifest("benchmark", train.cfg.master_seed);
        manifest.config("data", data.data);
        manifest.config("label", data.label);
        manifest.config("missing", data.missing);
        manifest.config("splits", splits);
        manifest.config("train_fraction", train_fraction);
        manifest.config("baselines", baselines);
        train.describe(manifest);
        manifest.config("threads", resolve_threads(threads));
        manifest.input(data.data);

        dbrf::Dataset full;
        {
            PhaseTimer t(manifest, "load");
            full = apply_feature_selection(data.load(), train.features);
        }
        const dbrf::TrainConfig base_cfg = train.resolve();
        const bool binary = full.n_classes() == 2;

        std::map<std::string, std::vector<Run>> runs;
        {
            PhaseTimer t(manifest, "benchmark");
            for (int s = 0; s < splits; ++s) {
                const std::uint64_t seed = base_cfg.master_seed + static_cast<std::uint64_t>(s);
                auto [train_set, test_set] =
                    dbrf::train_test_split(full, {train_fraction, true, seed});

                // Plain RF baseline on the identical split.
                {
                    Run r;
                    auto t0 = std::chrono::steady_clock::now();
                    dbrf::Forest f = dbrf::fit_forest(train_set, base_cfg.forest_config(), seed);
                    r.train_seconds = std::chrono::duration<double>(
                                          std::chrono::steady_clock::now() - t0).count();
                    t0 = std::chrono::steady_clock::now();
                    auto preds = dbrf::predict_forest_all(f, test_set);
                    r.predict_seconds = std::chrono::duration<double>(
                                            std::chrono::steady_clock::now() - t0).count();
                    r.accuracy = dbrf::accuracy(preds, test_set.labels);
                    if (binary) {
                        std::vector<double> scores(test_set.n_rows());
                        dbrf::parallel_for(test_set.n_rows(), [&](std::size_t i) {
                            auto votes = dbrf::vote_counts(f, test_set.row(i));
                            scores[i] = static_cast<double>(votes[1]) /
                                        static_cast<double>(f.trees.size());
                        }, 64);
                        r.auc = dbrf::auc_roc(scores, test_set.labels);
                    }
                    runs["rf"].push_back(r);
                }
                // DBRF with the same seed on the same split.
                {
                    Run r;
                    dbrf::TrainConfig cfg = base_cfg;
                    cfg.master_seed = seed;
                    auto t0 = std::chrono::steady_clock::now();
                    auto [model, report] = dbrf::train_cascade(train_set, cfg);
                    r.train_seconds = std::chrono::duration<double>(
                                          std::chrono::steady_clock::now() - t0).count();
                    r.levels = model.levels.size();
                    t0 = std::chrono::steady_clock::now();
                    auto preds = dbrf::predict_cascade(model, test_set);
                    r.predict_seconds = std::chrono::duration<double>(
                                            std::chrono::steady_clock::now() - t0).count();
                    r.accuracy = dbrf::accuracy(preds.predicted, test_set.labels);
                    if (binary)
                        r.auc = dbrf::auc_roc(dbrf::positive_scores_all(model, test_set),
                                              test_set.labels);
                    runs["dbrf"].push_back(r);
                }
                std::cerr << "split " << (s + 1) << "/" << splits
                          << ": rf=" << format_double(runs["rf"].back().accuracy)
                          << " dbrf=" << format_double(runs["dbrf"].back().accuracy) << "\n";
            }
        }

        {
            PhaseTimer t(manifest, "write");
            std::ofstream o(out, std::ios::binary);
            if (!o) throw dbrf::DataError("cannot write file: " + out);
            o << "method,runs,mean_accuracy,std_accuracy,mean_auc,std_auc,"
                 "mean_train_seconds,std_train_seconds,mean_predict_seconds,std_predict_seconds\n";
            for (const auto& method : {std::string("rf"), std::string("dbrf")}) {
                const auto& rs = runs[method];
                std::vector<double> acc, auc, ts, ps;
                for (const auto& r : rs) {
                    acc.push_back(r.accuracy);
                    if (r.auc) auc.push_back(*r.auc);
                    ts.push_back(r.train_seconds);
                    ps.push_back(r.predict_seconds);
                }
                o << method << ',' << rs.size() << ',' << format_double(mean(acc)) << ','
                  << format_double(sample_std(acc)) << ',';
                if (!auc.empty())
                    o << format_double(mean(auc)) << ',' << format_double(sample_std(auc));
                else
                    o << ',';
                o << ',' << format_double(mean(ts)) << ',' << format_double(sample_std(ts)) << ','
                  << format_double(mean(ps)) << ',' << format_double(sample_std(ps)) << "\n";
            }
            if (!details_out.empty()) {
                std::ofstream det(details_out, std::ios::binary);
                if (!det) throw dbrf::DataError("cannot write file: " + details_out);
                det << "method,run,seed,accuracy,auc,train_seconds,predict_seconds,levels\n";
                for (const auto& [method, rs] : runs)
                    for (std::size_t i = 0; i < rs.size(); ++i) {
                        det << method << ',' << i << ','
                            << base_cfg.master_seed + static_cast<std::uint64_t>(i) << ','
                            << format_double(rs[i].accuracy) << ','
                            << (rs[i].auc ? format_double(*rs[i].auc) : std::string()) << ','
                            << format_double(rs[i].train_seconds) << ','
                            << format_double(rs[i].predict_seconds) << ',' << rs[i].levels << "\n";
                    }
                manifest.output(details_out);
            }
        }
        manifest.output(out);
        manifest.write(manifest_path.empty() ? fs::path(out + ".manifest.json") : fs::path(manifest_path));
        return 0;
    }
};

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

struct GridCommand {
    std::string model_path;
    std::vector<int> features;
    int resolution = 200;
    std::string bounds = "auto";
    std::string out = "grid.csv";
    std::string manifest_path;
    int threads = 0;

    int run() {
        if (features.size() != 2) throw dbrf::ConfigError("--features needs exactly two indices");
        if (resolution < 2) throw dbrf::ConfigError("--resolution must be >= 2");

        dbrf::CascadeModel model = dbrf::load_model(model_path);
        Manifest manifest("grid", model.config.master_seed);
        manifest.config("model", model_path);
        manifest.config("features", features);
        manifest.config("resolution", resolution);
        manifest.config("bounds", bounds);
        manifest.config("threads", resolve_threads(threads));
        manifest.input(model_path);

        const std::size_t width = model.schema.n_features();
        if (features[0] < 0 || features[1] < 0 ||
            static_cast<std::size_t>(features[0]) >= width ||
            static_cast<std::size_t>(features[1]) >= width)
            throw dbrf::ConfigError("feature index out of range (model has " +
                                    std::to_string(width) + " features)");
        const std::size_t fx = static_cast<std::size_t>(features[0]);
        const std::size_t fy = static_cast<std::size_t>(features[1]);

        double xmin, xmax, ymin, ymax;
        if (bounds == "auto") {
            if (model.feature_stats.size() != width)
                throw dbrf::DataError("model carries no feature statistics for auto bounds");
            auto margin = [](const dbrf::FeatureStat& s, double& lo, double& hi) {
                const double span = s.max - s.min;
                const double pad = span > 0.0 ? 0.05 * span : 0.5;
                lo = s.min - pad;
                hi = s.max + pad;
            };
            margin(model.feature_stats[fx], xmin, xmax);
            margin(model.feature_stats[fy], ymin, ymax);
        } else {
            if (std::sscanf(bounds.c_str(), "%lf:%lf:%lf:%lf", &xmin, &xmax, &ymin, &ymax) != 4)
                throw dbrf::ConfigError("--bounds must be auto or xmin:xmax:ymin:ymax");
        }

        // Unplotted features sit at their training medians.
        std::vector<double> base(width, 0.0);
        for (std::size_t c = 0; c < width && c < model.feature_stats.size(); ++c)
            base[c] = model.feature_stats[c].median;

        std::ofstream o(out, std::ios::binary);
        if (!o) throw dbrf::DataError("cannot write file: " + out);
        {
            PhaseTimer t(manifest, "grid");
            const int R = resolution;
            auto coord = [](double lo, double hi, int i, int R_) {
                return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(R_ - 1);
            };
            std::vector<int> preds(static_cast<std::size_t>(R) * static_cast<std::size_t>(R));
            dbrf::parallel_for(preds.size(), [&](std::size_t k) {
                std::vector<double> x = base;
                x[fx] = coord(xmin, xmax, static_cast<int>(k) / R, R);
                x[fy] = coord(ymin, ymax, static_cast<int>(k) % R, R);
                const std::size_t exit = dbrf::cascade_exit_level(model, x);
                preds[k] = dbrf::predict_forest(model.levels[exit - 1].forest, x);
            }, 64);
            o << "x,y,prediction\n";
            o.precision(10);
            for (int i = 0; i < R; ++i)
                for (int j = 0; j < R; ++j)
                    o << coord(xmin, xmax, i, R) << ',' << coord(ymin, ymax, j, R) << ','
                      << model.schema.decode_class(
                             preds[static_cast<std::size_t>(i) * static_cast<std::size_t>(R) +
                                   static_cast<std::size_t>(j)])
                      << "\n";
        }
        manifest.output(out);
        manifest.write(manifest_path.empty() ? fs::path(out + ".manifest.json") : fs::path(manifest_path));
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dbrf: dynamic boosted random forests"};
    app.require_subcommand(1);

    TrainCommand train_cmd;
    auto* train = app.add_subcommand("train", "train a cascade model on a CSV dataset");
    train_cmd.data.attach(train);
    train_cmd.train.attach(train);
    train->add_option("--model-out", train_cmd.model_out, "model file path")->capture_default_str();
    train->add_option("--report-out", train_cmd.report_out, "per-iteration report CSV")
        ->capture_default_str();
    train->add_option("--manifest", train_cmd.manifest_path, "run manifest path");
    train->add_option("--threads", train_cmd.threads, "worker thread cap (0 = auto)");

    PredictCommand predict_cmd;
    auto* predict = app.add_subcommand("predict", "predict a CSV dataset with a trained model");
    predict->add_option("--model", predict_cmd.model_path, "model file")->required();
    predict->add_option("--data", predict_cmd.data_path, "input CSV file")->required();
    predict->add_option("--out", predict_cmd.out, "predictions CSV")->capture_default_str();
    predict->add_option("--manifest", predict_cmd.manifest_path, "run manifest path");
    predict->add_option("--threads", predict_cmd.threads, "worker thread cap (0 = auto)");

    EvalCommand eval_cmd;
    auto* eval = app.add_subcommand("eval", "evaluate a trained model on labelled CSV data");
    eval->add_option("--model", eval_cmd.model_path, "model file")->required();
    eval->add_option("--data", eval_cmd.data_path, "labelled CSV file")->required();
    eval->add_option("--out", eval_cmd.out, "metrics CSV (also printed to stdout)");
    eval->add_option("--manifest", eval_cmd.manifest_path, "run manifest path");
    eval->add_option("--threads", eval_cmd.threads, "worker thread cap (0 = auto)");

    BenchmarkCommand bench_cmd;
    auto* bench = app.add_subcommand("benchmark", "compare RF and DBRF over repeated splits");
    bench_cmd.data.attach(bench);
    bench_cmd.train.attach(bench);
    bench->add_option("--splits", bench_cmd.splits, "number of train/test splits")
        ->capture_default_str();
    bench->add_option("--train-fraction", bench_cmd.train_fraction, "train share of each split")
        ->capture_default_str();
    bench->add_option("--baselines", bench_cmd.baselines, "baseline methods")->delimiter(',');
    bench->add_option("--out", bench_cmd.out, "summary table CSV")->capture_default_str();
    bench->add_option("--details", bench_cmd.details_out, "per-run details CSV");
    bench->add_option("--manifest", bench_cmd.manifest_path, "run manifest path");
    bench->add_option("--threads", bench_cmd.threads, "worker thread cap (0 = auto)");

    GridCommand grid_cmd;
    auto* grid = app.add_subcommand("grid", "export a decision-boundary grid as CSV");
    grid->add_option("--model", grid_cmd.model_path, "model file")->required();
    grid->add_option("--features", grid_cmd.features, "the two feature indices to sweep")
        ->required()
        ->delimiter(',');
    grid->add_option("--resolution", grid_cmd.resolution, "lattice points per axis")
        ->capture_default_str();
    grid->add_option("--bounds", grid_cmd.bounds, "auto or xmin:xmax:ymin:ymax")
        ->capture_default_str();
    grid->add_option("--out", grid_cmd.out, "grid CSV")->capture_default_str();
    grid->add_option("--manifest", grid_cmd.manifest_path, "run manifest path");
    grid->add_option("--threads", grid_cmd.threads, "worker thread cap (0 = auto)");

    try {
        app.parse(argc, argv);
        if (*train) return train_cmd.run();
        if (*predict) return predict_cmd.run();
        if (*eval) return eval_cmd.run();
        if (*bench) return bench_cmd.run();
        if (*grid) return grid_cmd.run();
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const dbrf::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const dbrf::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
