#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dbrf/common.hpp"

namespace dbrf {

enum class ColumnKind { numeric, categorical };

enum class MissingPolicy { drop, impute };

/// Column structure and encoding dictionaries of a loaded dataset.
///
/// Feature encoding: numeric columns are parsed as-is; categorical columns
/// are ordinal-encoded, codes assigned in first-appearance order. Class
/// names are sorted lexicographically so the label encoding of a given
/// label set does not depend on row order.
struct FeatureSchema {
    struct Column {
        std::string name;
        ColumnKind kind = ColumnKind::numeric;
    };

    std::vector<Column> columns;                          // features only
    std::string label_column;
    std::vector<std::vector<std::string>> categorical_maps;  // code -> string, empty for numeric
    std::vector<std::string> class_names;                 // class index -> label string

    std::size_t n_features() const { return columns.size(); }
    std::size_t n_classes() const { return class_names.size(); }

    /// Code for a categorical value, or nullopt if unseen.
    std::optional<double> encode_category(std::size_t col, const std::string& value) const {
        const auto& m = categorical_maps.at(col);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] == value) return static_cast<double>(i);
        return std::nullopt;
    }

    const std::string& decode_category(std::size_t col, std::size_t code) const {
        return categorical_maps.at(col).at(code);
    }

    std::optional<int> encode_class(const std::string& label) const {
        for (std::size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == label) return static_cast<int>(i);
        return std::nullopt;
    }

    const std::string& decode_class(int cls) const { return class_names.at(static_cast<std::size_t>(cls)); }

    void validate() const {
        if (class_names.size() < 2) throw InvariantError("schema: fewer than 2 classes");
        if (categorical_maps.size() != columns.size())
            throw InvariantError("schema: categorical_maps size mismatch");
        for (std::size_t c = 0; c < columns.size(); ++c) {
            bool cat = columns[c].kind == ColumnKind::categorical;
            if (cat && categorical_maps[c].empty())
                throw InvariantError("schema: empty category map for column " + columns[c].name);
            if (!cat && !categorical_maps[c].empty())
                throw InvariantError("schema: numeric column " + columns[c].name + " has a category map");
        }
    }
};

/// Dense row-major feature matrix plus encoded labels.
///
/// row_ids are stable 0-based positions in the originally loaded file and
/// survive splitting/partitioning, so any derived subset can be traced back.
struct Dataset {
    std::vector<double> features;       // n_rows * n_features, row-major
    std::vector<int> labels;            // class indices
    std::vector<std::int64_t> row_ids;
    FeatureSchema schema;

    std::size_t n_rows() const { return labels.size(); }
    std::size_t n_features() const { return schema.n_features(); }
    std::size_t n_classes() const { return schema.n_classes(); }

    double at(std::size_t row, std::size_t col) const {
        return features[row * schema.n_features() + col];
    }
    std::span<const double> row(std::size_t r) const {
        return {features.data() + r * schema.n_features(), schema.n_features()};
    }

    std::vector<std::int64_t> class_counts() const {
        std::vector<std::int64_t> counts(n_classes(), 0);
        for (int y : labels) counts[static_cast<std::size_t>(y)]++;
        return counts;
    }

    /// Copy the given rows (by position) into a new dataset, order preserved.
    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.schema = schema;
        const std::size_t w = n_features();
        out.features.reserve(rows.size() * w);
        out.labels.reserve(rows.size());
        out.row_ids.reserve(rows.size());
        for (std::size_t r : rows) {
            out.features.insert(out.features.end(), features.begin() + r * w,
                                features.begin() + (r + 1) * w);
            out.labels.push_back(labels[r]);
            out.row_ids.push_back(row_ids[r]);
        }
        return out;
    }

    /// Keep only the named feature columns (by index), adjusting the schema.
    Dataset select_features(const std::vector<std::size_t>& cols) const {
        Dataset out;
        out.schema.label_column = schema.label_column;
        out.schema.class_names = schema.class_names;
        for (std::size_t c : cols) {
            if (c >= n_features()) throw ConfigError("feature index out of range: " + std::to_string(c));
            out.schema.columns.push_back(schema.columns[c]);
            out.schema.categorical_maps.push_back(schema.categorical_maps[c]);
        }
        out.labels = labels;
        out.row_ids = row_ids;
        out.features.reserve(n_rows() * cols.size());
        for (std::size_t r = 0; r < n_rows(); ++r)
            for (std::size_t c : cols) out.features.push_back(at(r, c));
        return out;
    }

    void validate() const {
        schema.validate();
        if (labels.size() != row_ids.size())
            throw InvariantError("dataset: labels/row_ids length mismatch");
        if (features.size() != labels.size() * schema.n_features())
            throw InvariantError("dataset: feature matrix size mismatch");
        const int c = static_cast<int>(schema.n_classes());
        for (int y : labels)
            if (y < 0 || y >= c) throw InvariantError("dataset: label out of range");
        std::unordered_set<std::int64_t> seen(row_ids.begin(), row_ids.end());
        if (seen.size() != row_ids.size()) throw InvariantError("dataset: duplicate row_ids");
    }
};

// ---------------------------------------------------------------------------
// CSV loading
// ---------------------------------------------------------------------------

namespace detail {

/// One CSV record. Handles quoted fields with "" escapes; trims unquoted
/// whitespace (UCI files pad cells with spaces). Returns false at EOF.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool in_quotes = false, any = false, field_quoted = false;
    auto push = [&] {
        if (!field_quoted) {
            std::size_t b = field.find_first_not_of(" \t");
            std::size_t e = field.find_last_not_of(" \t");
            field = b == std::string::npos ? std::string() : field.substr(b, e - b + 1);
        }
        out.push_back(std::move(field));
        field.clear();
        field_quoted = false;
    };
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') { field.push_back('"'); in.get(); }
                else in_quotes = false;
            } else field.push_back(c);
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
            field_quoted = true;
        } else if (c == ',') {
            push();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            push();
            return true;
        } else field.push_back(c);
    }
    if (!any) return false;
    if (!field.empty() && field.back() == '\r') field.pop_back();
    push();
    return true;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

/// Missing cells: empty strings and the UCI "?" marker.
inline bool is_missing(const std::string& cell) { return cell.empty() || cell == "?"; }

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Load a CSV file with a header row into an encoded Dataset.
///
/// label_column empty selects the last column. Numeric columns are those
/// whose every non-missing cell parses as a finite number; all others are
/// ordinal-encoded in first-appearance order. Rows with missing cells are
/// dropped or imputed (median / mode) per policy; rows with a missing label
/// are always dropped.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& label_column = "",
                        MissingPolicy policy = MissingPolicy::drop) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());

    std::vector<std::string> header;
    if (!detail::read_csv_record(in, header) || header.empty())
        throw DataError(path.string() + ": missing header row");
    {
        std::unordered_set<std::string> names;
        for (const auto& h : header) {
            if (h.empty()) throw DataError(path.string() + ": empty column name in header");
            if (!names.insert(h).second)
                throw DataError(path.string() + ": duplicate column name '" + h + "'");
        }
    }

    std::string label_name = label_column.empty() ? header.back() : label_column;
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_name) label_idx = i;
    if (label_idx == header.size())
        throw DataError(path.string() + ": label column '" + label_name + "' not found");
    if (header.size() < 2)
        throw DataError(path.string() + ": no feature columns besides the label");

    std::vector<std::vector<std::string>> cells;  // raw rows
    std::vector<std::string> record;
    std::size_t line = 1;
    while (detail::read_csv_record(in, record)) {
        ++line;
        if (record.size() == 1 && record[0].empty()) continue;  // blank line
        if (record.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(record.size()));
        cells.push_back(record);
    }

    const std::size_t n_cols = header.size();
    // Column kinds: numeric iff every non-missing cell parses as a finite double.
    std::vector<bool> numeric(n_cols, true);
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (c == label_idx) continue;
        double tmp;
        for (const auto& row : cells) {
            if (detail::is_missing(row[c])) continue;
            if (!detail::parse_double(row[c], tmp)) { numeric[c] = false; break; }
        }
    }

    // Resolve missing cells.
    std::vector<bool> keep(cells.size(), true);
    for (std::size_t r = 0; r < cells.size(); ++r)
        if (detail::is_missing(cells[r][label_idx])) keep[r] = false;
    if (policy == MissingPolicy::drop) {
        for (std::size_t r = 0; r < cells.size(); ++r) {
            if (!keep[r]) continue;
            for (std::size_t c = 0; c < n_cols; ++c)
                if (detail::is_missing(cells[r][c])) { keep[r] = false; break; }
        }
    } else {
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (c == label_idx) continue;
            if (numeric[c]) {
                std::vector<double> present;
                double v;
                for (std::size_t r = 0; r < cells.size(); ++r)
                    if (keep[r] && !detail::is_missing(cells[r][c]) &&
                        detail::parse_double(cells[r][c], v))
                        present.push_back(v);
                if (present.empty()) throw DataError(path.string() + ": column '" + header[c] +
                                                     "' has no usable values to impute from");
                double med = detail::median_of(std::move(present));
                std::ostringstream os;
                os.precision(17);
                os << med;
                for (std::size_t r = 0; r < cells.size(); ++r)
                    if (keep[r] && detail::is_missing(cells[r][c])) cells[r][c] = os.str();
            } else {
                std::map<std::string, std::size_t> freq;
                std::vector<std::string> order;
                for (std::size_t r = 0; r < cells.size(); ++r) {
                    if (!keep[r] || detail::is_missing(cells[r][c])) continue;
                    if (freq.emplace(cells[r][c], 0).second) order.push_back(cells[r][c]);
                    freq[cells[r][c]]++;
                }
                if (order.empty()) throw DataError(path.string() + ": column '" + header[c] +
                                                   "' has no usable values to impute from");
                std::string mode = order.front();  // tie -> first appearing
                for (const auto& s : order)
                    if (freq[s] > freq[mode]) mode = s;
                for (std::size_t r = 0; r < cells.size(); ++r)
                    if (keep[r] && detail::is_missing(cells[r][c])) cells[r][c] = mode;
            }
        }
    }

    // Build schema.
    Dataset d;
    d.schema.label_column = label_name;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (c == label_idx) continue;
        feature_cols.push_back(c);
        d.schema.columns.push_back({header[c], numeric[c] ? ColumnKind::numeric
                                                          : ColumnKind::categorical});
        d.schema.categorical_maps.emplace_back();
    }
    {
        std::unordered_set<std::string> seen;
        for (std::size_t r = 0; r < cells.size(); ++r)
            if (keep[r]) seen.insert(cells[r][label_idx]);
        d.schema.class_names.assign(seen.begin(), seen.end());
        std::sort(d.schema.class_names.begin(), d.schema.class_names.end());
    }
    if (d.schema.class_names.size() < 2)
        throw DataError(path.string() + ": fewer than 2 distinct labels after applying the missing-value policy");

    // Encode rows.
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (!keep[r]) continue;
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            const std::string& cell = cells[r][feature_cols[f]];
            if (d.schema.columns[f].kind == ColumnKind::numeric) {
                double v;
                detail::parse_double(cell, v);
                d.features.push_back(v);
            } else {
                auto& m = d.schema.categorical_maps[f];
                std::size_t code = 0;
                for (; code < m.size(); ++code)
                    if (m[code] == cell) break;
                if (code == m.size()) m.push_back(cell);  // first appearance
                d.features.push_back(static_cast<double>(code));
            }
        }
        d.labels.push_back(*d.schema.encode_class(cells[r][label_idx]));
        d.row_ids.push_back(static_cast<std::int64_t>(r));
    }
    if (d.labels.empty())
        throw DataError(path.string() + ": all rows removed by the missing-value policy");
    d.validate();
    return d;
}

/// Re-encode a CSV file under an existing schema (the training-time one),
/// so codes and class indices match the model bit for bit. Unseen category
/// values, unknown labels, and missing cells are errors naming the column.
inline Dataset load_csv_with_schema(const std::filesystem::path& path, const FeatureSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());

    std::vector<std::string> header;
    if (!detail::read_csv_record(in, header) || header.empty())
        throw DataError(path.string() + ": missing header row");

    // Map each schema column (and the label) to its position in this file.
    auto find_col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw DataError(path.string() + ": schema mismatch: column '" + name + "' not found");
    };
    std::vector<std::size_t> positions;
    for (const auto& col : schema.columns) positions.push_back(find_col(col.name));
    std::size_t label_pos = find_col(schema.label_column);

    Dataset d;
    d.schema = schema;
    std::vector<std::string> record;
    std::size_t line = 1;
    while (detail::read_csv_record(in, record)) {
        ++line;
        if (record.size() == 1 && record[0].empty()) continue;
        if (record.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(record.size()));
        for (std::size_t f = 0; f < schema.columns.size(); ++f) {
            const std::string& cell = record[positions[f]];
            const std::string& col = schema.columns[f].name;
            if (detail::is_missing(cell))
                throw DataError(path.string() + ":" + std::to_string(line) +
                                ": missing value in column '" + col + "'");
            if (schema.columns[f].kind == ColumnKind::numeric) {
                double v;
                if (!detail::parse_double(cell, v))
                    throw DataError(path.string() + ":" + std::to_string(line) +
                                    ": non-numeric value '" + cell + "' in column '" + col + "'");
                d.features.push_back(v);
            } else {
                auto code = schema.encode_category(f, cell);
                if (!code)
                    throw DataError(path.string() + ":" + std::to_string(line) + ": value '" +
                                    cell + "' in column '" + col + "' not seen at training time");
                d.features.push_back(*code);
            }
        }
        auto cls = schema.encode_class(record[label_pos]);
        if (!cls)
            throw DataError(path.string() + ":" + std::to_string(line) + ": label '" +
                            record[label_pos] + "' not seen at training time");
        d.labels.push_back(*cls);
        d.row_ids.push_back(static_cast<std::int64_t>(line - 2));
    }
    if (d.labels.empty()) throw DataError(path.string() + ": no data rows");
    d.validate();
    return d;
}

/// Write a dataset back to CSV, decoding categorical codes and class indices.
inline void write_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out.precision(17);
    for (const auto& col : d.schema.columns) out << col.name << ',';
    out << d.schema.label_column << '\n';
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (std::size_t c = 0; c < d.n_features(); ++c) {
            if (d.schema.columns[c].kind == ColumnKind::categorical)
                out << d.schema.decode_category(c, static_cast<std::size_t>(d.at(r, c)));
            else
                out << d.at(r, c);
            out << ',';
        }
        out << d.schema.decode_class(d.labels[r]) << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.67;
    bool stratified = false;
    std::uint64_t seed = 0;
};

namespace detail {

/// Largest-remainder apportionment of `target` across groups proportional to
/// their sizes; each group contributes at most its size.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& group_sizes,
                                          double fraction, std::size_t target) {
    std::vector<std::size_t> take(group_sizes.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t total = 0;
    for (std::size_t g = 0; g < group_sizes.size(); ++g) {
        double exact = fraction * static_cast<double>(group_sizes[g]);
        take[g] = std::min(group_sizes[g], static_cast<std::size_t>(exact));
        total += take[g];
        remainders.push_back({exact - static_cast<double>(take[g]), g});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [rem, g] : remainders) {
        if (total >= target) break;
        if (take[g] < group_sizes[g]) { take[g]++; total++; }
    }
    // If rounding overshot (all remainders 0 but target smaller), trim.
    for (std::size_t g = group_sizes.size(); total > target && g-- > 0;)
        if (take[g] > 0) { take[g]--; total--; }
    return take;
}

}  // namespace detail

/// Deterministic train/test split. Stratified mode keeps every class's train
/// share within one row of train_fraction.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& d, const SplitSpec& spec) {
    const std::size_t n = d.n_rows();
    if (n < 2) throw ConfigError("train_test_split: need at least 2 rows");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("train_test_split: train_fraction must be in (0,1)");

    std::size_t target = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(n)));
    target = std::min<std::size_t>(std::max<std::size_t>(target, 1), n - 1);

    Rng rng(mix64(spec.seed, 0x5b71u));
    std::vector<std::size_t> train_rows, test_rows;
    if (spec.stratified) {
        std::vector<std::vector<std::size_t>> by_class(d.n_classes());
        for (std::size_t r = 0; r < n; ++r) by_class[static_cast<std::size_t>(d.labels[r])].push_back(r);
        std::vector<std::size_t> sizes;
        for (const auto& v : by_class) sizes.push_back(v.size());
        auto take = detail::apportion(sizes, spec.train_fraction, target);
        for (std::size_t g = 0; g < by_class.size(); ++g) {
            shuffle(by_class[g], rng);
            for (std::size_t i = 0; i < by_class[g].size(); ++i)
                (i < take[g] ? train_rows : test_rows).push_back(by_class[g][i]);
        }
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        shuffle(order, rng);
        for (std::size_t i = 0; i < n; ++i)
            (i < target ? train_rows : test_rows).push_back(order[i]);
    }
    if (train_rows.empty() || test_rows.empty())
        throw ConfigError("train_test_split: train_fraction yields an empty side");
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {d.subset(train_rows), d.subset(test_rows)};
}

/// k-fold cross-validation indices. Valid folds partition [0, n); sizes
/// differ by at most one. With labels given, folds are stratified: per-class
/// counts across folds also differ by at most one.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
kfold_indices(std::size_t n_rows, std::size_t k, const std::vector<int>* stratify_labels,
              std::uint64_t seed) {
    if (k < 2 || k > n_rows)
        throw ConfigError("kfold_indices: k must be in [2, n_rows]");
    if (stratify_labels && stratify_labels->size() != n_rows)
        throw ConfigError("kfold_indices: label vector length mismatch");

    Rng rng(mix64(seed, 0xf01d5u));
    std::vector<std::size_t> order;
    order.reserve(n_rows);
    if (stratify_labels) {
        int max_label = 0;
        for (int y : *stratify_labels) max_label = std::max(max_label, y);
        std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
        for (std::size_t r = 0; r < n_rows; ++r)
            by_class[static_cast<std::size_t>((*stratify_labels)[r])].push_back(r);
        for (auto& v : by_class) {
            shuffle(v, rng);
            order.insert(order.end(), v.begin(), v.end());
        }
    } else {
        order.resize(n_rows);
        std::iota(order.begin(), order.end(), 0);
        shuffle(order, rng);
    }

    // Deal round-robin; the cycle continues across class boundaries, which
    // keeps both the global and the per-class fold sizes within one of each
    // other.
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n_rows; ++i) folds[i % k].push_back(order[i]);

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> valid = folds[f];
        std::sort(valid.begin(), valid.end());
        std::vector<std::size_t> train;
        train.reserve(n_rows - valid.size());
        std::size_t vi = 0;
        for (std::size_t r = 0; r < n_rows; ++r) {
            if (vi < valid.size() && valid[vi] == r) { ++vi; continue; }
            train.push_back(r);
        }
        out.emplace_back(std::move(train), std::move(valid));
    }
    return out;
}

}  // namespace dbrf
