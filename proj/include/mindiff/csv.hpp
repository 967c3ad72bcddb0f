// CSV ingestion: UTF-8, header row, comma-separated, quoted fields with ""
// escapes and embedded newlines.
#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/features.hpp"

namespace mindiff {

// Column mapping for load_csv. Label and group columns hold fractional
// annotator scores; both are binarized at 0.5. `dim` is the hashing
// dimension applied to the text column.
struct CsvSchema {
    std::string text_column;
    std::vector<std::string> label_columns;
    std::vector<std::string> group_columns;
    std::size_t dim = 1000;
};

namespace detail {

// Splits one logical CSV record starting at `pos`. Returns false at EOF.
inline bool next_record(const std::string& data, std::size_t& pos, std::vector<std::string>& fields) {
    fields.clear();
    if (pos >= data.size()) return false;
    std::string field;
    bool quoted = false;
    while (pos < data.size()) {
        const char c = data[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < data.size() && data[pos + 1] == '"') {
                    field.push_back('"');
                    pos += 2;
                } else {
                    quoted = false;
                    ++pos;
                }
            } else {
                field.push_back(c);
                ++pos;
            }
        } else if (c == '"') {
            quoted = true;
            ++pos;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            ++pos;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && pos + 1 < data.size() && data[pos + 1] == '\n') ++pos;
            ++pos;
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
            ++pos;
        }
    }
    fields.push_back(std::move(field));
    return true;
}

inline std::optional<double> parse_double(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    if (b == e) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data() + b, s.data() + e, v);
    if (ec != std::errc() || ptr != s.data() + e) return std::nullopt;
    return v;
}

}  // namespace detail

// Loads a dataset. Missing/empty group cells map to Membership::Unknown;
// rows with the wrong field count or unparsable numeric cells are skipped
// and counted in Dataset::skipped_rows.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("load_csv: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();

    std::size_t pos = 0;
    std::vector<std::string> header;
    if (!detail::next_record(data, pos, header)) throw SchemaError("load_csv: empty file " + path);

    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw SchemaError("load_csv: missing column '" + name + "' in " + path);
    };

    const std::size_t text_idx = column_index(schema.text_column);
    std::vector<std::size_t> label_idx, group_idx;
    for (const auto& c : schema.label_columns) label_idx.push_back(column_index(c));
    for (const auto& c : schema.group_columns) group_idx.push_back(column_index(c));

    Dataset ds;
    ds.num_tasks = schema.label_columns.size();
    ds.num_groups = schema.group_columns.size();
    ds.task_names = schema.label_columns;
    ds.group_names = schema.group_columns;

    std::vector<std::string> fields;
    while (detail::next_record(data, pos, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        if (fields.size() != header.size()) {
            ++ds.skipped_rows;
            continue;
        }
        Example ex;
        ex.labels.reserve(label_idx.size());
        ex.groups.reserve(group_idx.size());
        bool bad = false;
        for (std::size_t i : label_idx) {
            auto v = detail::parse_double(fields[i]);
            if (!v) {
                bad = true;
                break;
            }
            ex.labels.push_back(*v >= 0.5 ? 1 : 0);
        }
        if (!bad) {
            for (std::size_t i : group_idx) {
                const std::string& cell = fields[i];
                if (cell.empty() || cell.find_first_not_of(" \t") == std::string::npos) {
                    ex.groups.push_back(Membership::Unknown);
                    continue;
                }
                auto v = detail::parse_double(cell);
                if (!v) {
                    bad = true;
                    break;
                }
                ex.groups.push_back(*v >= 0.5 ? Membership::Member : Membership::NonMember);
            }
        }
        if (bad) {
            ++ds.skipped_rows;
            continue;
        }
        ex.features = hash_vectorize(fields[text_idx], schema.dim);
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

// Writes a dataset (with retained texts) back to CSV in a schema-compatible
// layout: text column first, then label columns, then group columns.
// Unknown memberships are written as empty cells.
inline void write_csv(const Dataset& ds, const std::string& path, const std::string& text_column = "text") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("write_csv: cannot open " + path + " for writing");
    if (ds.texts.size() != ds.examples.size())
        throw ConfigError("write_csv: dataset has no retained texts");

    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += "\"\"";
            else q.push_back(c);
        }
        q.push_back('"');
        return q;
    };

    out << text_column;
    for (const auto& n : ds.task_names) out << ',' << n;
    for (const auto& n : ds.group_names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const Example& ex = ds.examples[i];
        out << quote(ds.texts[i]);
        for (auto y : ex.labels) out << ',' << static_cast<int>(y);
        for (auto g : ex.groups) {
            out << ',';
            if (g != Membership::Unknown) out << (g == Membership::Member ? 1 : 0);
        }
        out << '\n';
    }
    if (!out) throw ConfigError("write_csv: write failed for " + path);
}

}  // namespace mindiff
