#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rfstab/error.hpp"
#include "rfstab/format.hpp"
#include "rfstab/matrix.hpp"
#include "rfstab/random.hpp"

namespace rfstab {

enum class ColumnKind { numeric, categorical, label };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

/// A cell is missing (monostate), a parsed number, or a raw string (categoricals and the label).
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

/// Raw tabular data with declared column kinds and a binary label.
struct TabularDataset {
    std::vector<ColumnSpec> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<int> labels;
    std::size_t label_index = 0;
    std::string negative_label = "0";
    std::string positive_label = "1";

    std::size_t n_rows() const noexcept { return rows.size(); }

    /// Throws DataError unless the invariants hold: one label column, >= 2 rows,
    /// every row filled for every column, labels in {0,1}.
    void validate() const {
        const auto label_count = std::count_if(columns.begin(), columns.end(),
                                                [](const ColumnSpec& c) { return c.kind == ColumnKind::label; });
        if (label_count != 1) throw DataError("dataset must have exactly one label column");
        if (label_index >= columns.size() || columns[label_index].kind != ColumnKind::label) {
            throw DataError("label index does not point at the label column");
        }
        if (rows.size() < 2) throw DataError("dataset needs at least 2 rows");
        if (labels.size() != rows.size()) throw DataError("label count does not match row count");
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != columns.size()) throw DataError("row " + std::to_string(r) + " is ragged");
            if (labels[r] != 0 && labels[r] != 1) throw DataError("labels must be 0 or 1");
        }
    }
};

/// Encoded numeric design matrix with binary labels.
struct EncodedDataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t n_features() const noexcept { return features.cols(); }

    EncodedDataset select(std::span<const std::size_t> indices) const {
        EncodedDataset out;
        out.features = Matrix(indices.size(), features.cols());
        out.labels.reserve(indices.size());
        out.feature_names = feature_names;
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const auto src = features.row(indices[k]);
            std::copy(src.begin(), src.end(), out.features.row(k).begin());
            out.labels.push_back(labels[indices[k]]);
        }
        return out;
    }

    EncodedDataset slice(std::size_t begin, std::size_t end) const {
        std::vector<std::size_t> idx(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        return select(idx);
    }

    bool operator==(const EncodedDataset&) const = default;
};

struct SplitDataset {
    EncodedDataset train;
    EncodedDataset validation;
};

/// Half-open row range [begin, end).
struct RowRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline bool is_missing_token(std::string_view token) {
    return token.empty() || token == "NA" || token == "NaN" || token == "nan" || token == "?";
}

/// Splits one CSV record (RFC-4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) throw DataError("unterminated quoted field at line " + std::to_string(line_no));
    fields.push_back(std::move(field));
    return fields;
}

inline std::string quote_csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace detail

struct CsvOptions {
    /// Raw label value mapped to 1; defaults to the lexicographically larger value.
    std::optional<std::string> positive_label;
};

inline TabularDataset parse_csv(std::istream& in, const std::string& label_column,
                                const std::set<std::string>& categorical_columns, const CsvOptions& options = {}) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (!trim(line).empty()) {
            header = detail::split_csv_line(line, line_no);
            break;
        }
    }
    if (header.empty()) throw DataError("missing header row");

    TabularDataset data;
    std::optional<std::size_t> label_index;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name(trim(header[c]));
        ColumnKind kind = ColumnKind::numeric;
        if (name == label_column) {
            if (label_index) throw DataError("label column '" + label_column + "' appears more than once");
            kind = ColumnKind::label;
            label_index = c;
        } else if (categorical_columns.contains(name)) {
            kind = ColumnKind::categorical;
        }
        data.columns.push_back({std::move(name), kind});
    }
    if (!label_index) throw DataError("missing label column '" + label_column + "'");
    for (const auto& cat : categorical_columns) {
        const bool found = std::any_of(data.columns.begin(), data.columns.end(),
                                       [&](const ColumnSpec& c) { return c.name == cat; });
        if (!found) throw DataError("categorical column '" + cat + "' not in header");
    }
    data.label_index = *label_index;

    std::vector<std::string> raw_labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line, line_no);
        if (fields.size() != header.size()) {
            throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        std::vector<Cell> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string_view token = trim(fields[c]);
            const auto& col = data.columns[c];
            if (col.kind == ColumnKind::label) {
                if (token.empty()) throw DataError("missing label at line " + std::to_string(line_no));
                row[c] = std::string(token);
                raw_labels.emplace_back(token);
            } else if (detail::is_missing_token(token)) {
                row[c] = std::monostate{};
            } else if (col.kind == ColumnKind::numeric) {
                const auto v = parse_double(token);
                if (!v) {
                    throw DataError("non-numeric value '" + std::string(token) + "' in column '" + col.name +
                                    "' at line " + std::to_string(line_no));
                }
                row[c] = *v;
            } else {
                row[c] = std::string(token);
            }
        }
        data.rows.push_back(std::move(row));
    }

    const std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
    if (distinct.size() != 2) {
        throw DataError("non-binary label: column '" + label_column + "' has " + std::to_string(distinct.size()) +
                        " distinct values");
    }
    data.negative_label = *distinct.begin();
    data.positive_label = *distinct.rbegin();
    if (options.positive_label) {
        if (!distinct.contains(*options.positive_label)) {
            throw DataError("positive label '" + *options.positive_label + "' not present in label column");
        }
        if (*options.positive_label == data.negative_label) std::swap(data.negative_label, data.positive_label);
    }
    data.labels.reserve(raw_labels.size());
    for (const auto& raw : raw_labels) data.labels.push_back(raw == data.positive_label ? 1 : 0);
    data.validate();
    return data;
}

inline TabularDataset load_csv(const std::string& path, const std::string& label_column,
                               const std::set<std::string>& categorical_columns, const CsvOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");
    return parse_csv(in, label_column, categorical_columns, options);
}

inline void write_csv(const TabularDataset& data, std::ostream& out) {
    for (std::size_t c = 0; c < data.columns.size(); ++c) {
        out << (c ? "," : "") << detail::quote_csv_field(data.columns[c].name);
    }
    out << '\n';
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        for (std::size_t c = 0; c < data.columns.size(); ++c) {
            if (c) out << ',';
            if (c == data.label_index) {
                out << detail::quote_csv_field(data.labels[r] ? data.positive_label : data.negative_label);
                continue;
            }
            const Cell& cell = data.rows[r][c];
            if (const auto* d = std::get_if<double>(&cell)) {
                out << format_double(*d);
            } else if (const auto* s = std::get_if<std::string>(&cell)) {
                out << detail::quote_csv_field(*s);
            }
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Encoding

/// Per-column encoding parameters, fitted on a row range.
struct ColumnEncoding {
    std::size_t column = 0;
    ColumnKind kind = ColumnKind::numeric;
    double mean = 0.0;
    double scale = 0.0; ///< standard deviation; 0 marks a constant column
    std::vector<std::string> levels;

    bool operator==(const ColumnEncoding&) const = default;
};

class Encoder {
public:
    /// Fits standardization and one-hot levels using only rows in `fit_on`.
    static Encoder fit(const TabularDataset& data, RowRange fit_on) {
        if (fit_on.size() == 0) throw DataError("preprocess: fit range is empty");
        if (fit_on.end > data.n_rows()) throw DataError("preprocess: fit range exceeds dataset");
        Encoder enc;
        for (std::size_t c = 0; c < data.columns.size(); ++c) {
            const auto kind = data.columns[c].kind;
            if (kind == ColumnKind::label) continue;
            ColumnEncoding ce;
            ce.column = c;
            ce.kind = kind;
            if (kind == ColumnKind::numeric) {
                long double sum = 0.0L;
                std::size_t observed = 0;
                for (std::size_t r = fit_on.begin; r < fit_on.end; ++r) {
                    if (const auto* v = std::get_if<double>(&data.rows[r][c])) {
                        sum += *v;
                        ++observed;
                    }
                }
                ce.mean = observed ? static_cast<double>(sum / observed) : 0.0;
                // Spread is measured on the mean-imputed column so the fitted rows end up with unit variance.
                long double ss = 0.0L;
                for (std::size_t r = fit_on.begin; r < fit_on.end; ++r) {
                    if (const auto* v = std::get_if<double>(&data.rows[r][c])) {
                        const long double d = static_cast<long double>(*v) - ce.mean;
                        ss += d * d;
                    }
                }
                const double sd = std::sqrt(static_cast<double>(ss / fit_on.size()));
                ce.scale = sd > 1e-12 * std::max(1.0, std::abs(ce.mean)) ? sd : 0.0;
            } else {
                std::set<std::string> seen;
                for (std::size_t r = fit_on.begin; r < fit_on.end; ++r) {
                    if (const auto* s = std::get_if<std::string>(&data.rows[r][c])) seen.insert(*s);
                }
                ce.levels.assign(seen.begin(), seen.end());
            }
            enc.columns_.push_back(std::move(ce));
        }
        return enc;
    }

    const std::vector<ColumnEncoding>& columns() const noexcept { return columns_; }

    std::size_t n_features() const noexcept {
        std::size_t n = 0;
        for (const auto& ce : columns_) n += ce.kind == ColumnKind::numeric ? 1 : ce.levels.size();
        return n;
    }

    EncodedDataset transform(const TabularDataset& data) const {
        EncodedDataset out;
        out.features = Matrix(data.n_rows(), n_features());
        out.labels = data.labels;
        for (const auto& ce : columns_) {
            const auto& name = data.columns[ce.column].name;
            if (ce.kind == ColumnKind::numeric) {
                out.feature_names.push_back(name);
            } else {
                for (const auto& level : ce.levels) out.feature_names.push_back(name + "=" + level);
            }
        }
        for (std::size_t r = 0; r < data.n_rows(); ++r) {
            auto dst = out.features.row(r);
            std::size_t f = 0;
            for (const auto& ce : columns_) {
                const Cell& cell = data.rows[r][ce.column];
                if (ce.kind == ColumnKind::numeric) {
                    const auto* v = std::get_if<double>(&cell);
                    dst[f++] = (v && ce.scale > 0.0) ? (*v - ce.mean) / ce.scale : 0.0;
                } else {
                    const auto* s = std::get_if<std::string>(&cell);
                    for (const auto& level : ce.levels) dst[f++] = (s && *s == level) ? 1.0 : 0.0;
                }
            }
        }
        return out;
    }

    bool operator==(const Encoder&) const = default;

private:
    std::vector<ColumnEncoding> columns_;
};

/// Encodes every row with parameters fitted on `fit_on` only.
inline EncodedDataset preprocess(const TabularDataset& data, RowRange fit_on) {
    return Encoder::fit(data, fit_on).transform(data);
}

/// Training half = first ceil(N/2) rows, validation = the rest, original order.
inline RowRange training_half(std::size_t n) { return {0, (n + 1) / 2}; }

inline SplitDataset split_half(const EncodedDataset& data) {
    if (data.size() < 2) throw DataError("split_half: need at least 2 rows, got " + std::to_string(data.size()));
    const std::size_t cut = training_half(data.size()).end;
    return {data.slice(0, cut), data.slice(cut, data.size())};
}

/// Fits the encoder on the training half, encodes everything, then splits.
inline SplitDataset prepare_split(const TabularDataset& data) {
    data.validate();
    return split_half(preprocess(data, training_half(data.n_rows())));
}

inline std::size_t subsample_size(std::size_t n, double proportion) {
    return static_cast<std::size_t>(std::floor(proportion * static_cast<double>(n) * (1.0 + 1e-12)));
}

/// Draws floor(p*N) rows without replacement; the selected rows keep their original order.
inline EncodedDataset subsample(const EncodedDataset& data, double proportion, Seed seed) {
    if (!(proportion > 0.0 && proportion <= 1.0)) {
        throw DataError("subsample: proportion must lie in (0, 1], got " + format_double(proportion));
    }
    const std::size_t n = data.size();
    const std::size_t k = subsample_size(n, proportion);
    if (k == 0) throw DataError("subsample: sample size is 0");
    if (k >= n) return data;

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Engine rng = make_engine(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return data.select(idx);
}

} // namespace rfstab
