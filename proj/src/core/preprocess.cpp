#include "nrelaggs/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <json.hpp>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

using nlohmann::json;

namespace {

double parse_number(std::string_view text, std::string_view where) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
        fail(ErrorCode::parse_error, "'" + std::string(text) + "' in " + std::string(where) + " is not a number");
    return value;
}

}  // namespace

std::vector<std::string> TableEncoding::feature_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) {
        if (c.kind == ColumnKind::numeric)
            names.push_back(c.name);
        else
            for (const auto& v : c.vocabulary) names.push_back(c.name + "=" + v);
    }
    return names;
}

InstanceRows traverse_instance(const RelationalDatabase& db, const AggregationPlan& plan, std::size_t target_row) {
    const AggregationPlan& bfs = plan.inverted ? invert(plan) : plan;
    InstanceRows out;
    out.rows.assign(plan.table_count(), {});
    out.parent_positions.assign(plan.table_count(), {});
    out.rows[0].push_back(target_row);
    for (const auto& step : bfs.steps) {
        const auto& current_rows = out.rows[step.current];
        for (auto next : step.nexts) {
            for (std::size_t local = 0; local < current_rows.size(); ++local) {
                for (auto row : db.connected_rows(plan.db_tables[step.current], current_rows[local], plan.db_tables[next])) {
                    out.rows[next].push_back(row);
                    out.parent_positions[next].push_back(static_cast<std::uint32_t>(local));
                }
            }
        }
    }
    return out;
}

PreprocessorState PreprocessorState::fit(const RelationalDatabase& db, std::span<const std::string> train_instance_keys) {
    return fit(db, generate_aggregation_plan(db), train_instance_keys);
}

PreprocessorState PreprocessorState::fit(const RelationalDatabase& db, const AggregationPlan& plan,
                                         std::span<const std::string> train_instance_keys) {
    if (train_instance_keys.empty()) fail(ErrorCode::empty_train_set, "no training instances");

    std::vector<std::vector<bool>> reached(plan.table_count());
    for (std::size_t t = 0; t < plan.table_count(); ++t) reached[t].assign(db.rows(plan.db_tables[t]).size(), false);
    for (const auto& key : train_instance_keys) {
        auto row = db.instance_row(key);
        if (!row) fail(ErrorCode::unknown_instance_key, key);
        auto rows = traverse_instance(db, plan, *row);
        for (std::size_t t = 0; t < rows.rows.size(); ++t)
            for (auto r : rows.rows[t]) reached[t][r] = true;
    }

    PreprocessorState state;
    const auto labels = class_distribution(db);
    if (!labels.empty()) state.positive_label_ = labels.rbegin()->first;

    for (std::size_t t = 0; t < plan.table_count(); ++t) {
        const auto db_table = plan.db_tables[t];
        const auto& spec = db.table(db_table);
        const auto& rows = db.rows(db_table);
        TableEncoding encoding;
        encoding.table = spec.name;
        for (std::size_t c = 0; c < spec.columns.size(); ++c) {
            const auto& column = spec.columns[c];
            if (column.kind == ColumnKind::key || column.kind == ColumnKind::foreign_key) continue;
            if (db_table == db.target_table() && c == db.target_column()) continue;
            ColumnEncoding col;
            col.column = c;
            col.name = column.name;
            col.kind = column.kind;
            if (column.kind == ColumnKind::numeric) {
                double sum = 0.0;
                std::size_t count = 0;
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (!reached[t][r] || rows[r][c].empty()) continue;
                    sum += parse_number(rows[r][c], spec.name + "." + column.name);
                    ++count;
                }
                const double mean = count ? sum / static_cast<double>(count) : 0.0;
                double squares = 0.0;
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (!reached[t][r] || rows[r][c].empty()) continue;
                    const double d = parse_number(rows[r][c], spec.name + "." + column.name) - mean;
                    squares += d * d;
                }
                const double sigma = count ? std::sqrt(squares / static_cast<double>(count)) : 0.0;
                col.stats = {mean, std::max(sigma, epsilon)};
            } else {
                std::set<std::string> seen;
                for (std::size_t r = 0; r < rows.size(); ++r)
                    if (reached[t][r] && !rows[r][c].empty()) seen.insert(rows[r][c]);
                col.vocabulary.assign(seen.begin(), seen.end());
            }
            encoding.width += col.width();
            encoding.columns.push_back(std::move(col));
        }
        state.tables_.push_back(std::move(encoding));
    }
    return state;
}

void PreprocessorState::encode_row_into(std::size_t plan_table, const Row& row, std::span<float> out) const {
    const auto& encoding = tables_.at(plan_table);
    if (out.size() != encoding.width) fail(ErrorCode::shape_mismatch, "encode target has the wrong width");
    std::size_t offset = 0;
    for (const auto& col : encoding.columns) {
        if (col.column >= row.size()) fail(ErrorCode::shape_mismatch, "row of '" + encoding.table + "' is too short");
        const auto& cell = row[col.column];
        if (col.kind == ColumnKind::numeric) {
            out[offset++] = cell.empty() ? 0.0f
                                         : static_cast<float>((parse_number(cell, encoding.table + "." + col.name) -
                                                               col.stats.mean) /
                                                              col.stats.stddev);
        } else {
            std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(offset), col.vocabulary.size(), 0.0f);
            auto it = std::lower_bound(col.vocabulary.begin(), col.vocabulary.end(), cell);
            if (!cell.empty() && it != col.vocabulary.end() && *it == cell)
                out[offset + static_cast<std::size_t>(it - col.vocabulary.begin())] = 1.0f;
            offset += col.vocabulary.size();
        }
    }
}

std::vector<float> PreprocessorState::encode_row(std::string_view table, const Row& row) const {
    for (std::size_t t = 0; t < tables_.size(); ++t) {
        if (tables_[t].table != table) continue;
        std::vector<float> out(tables_[t].width);
        encode_row_into(t, row, out);
        return out;
    }
    fail(ErrorCode::unknown_table, std::string(table));
}

const TableEncoding& PreprocessorState::table(std::string_view table) const {
    for (const auto& t : tables_)
        if (t.table == table) return t;
    fail(ErrorCode::unknown_table, std::string(table));
}

std::size_t PreprocessorState::width(std::string_view table) const { return this->table(table).width; }

std::string PreprocessorState::to_json() const {
    json doc{{"positive_label", positive_label_}, {"tables", json::array()}};
    for (const auto& t : tables_) {
        json table{{"table", t.table}, {"width", t.width}, {"columns", json::array()}};
        for (const auto& c : t.columns) {
            json column{{"column", c.column}, {"name", c.name}, {"kind", std::string(column_kind_name(c.kind))}};
            if (c.kind == ColumnKind::numeric) {
                column["mean"] = c.stats.mean;
                column["stddev"] = c.stats.stddev;
            } else {
                column["vocabulary"] = c.vocabulary;
            }
            table["columns"].push_back(std::move(column));
        }
        doc["tables"].push_back(std::move(table));
    }
    return doc.dump();
}

PreprocessorState PreprocessorState::from_json(std::string_view text) {
    PreprocessorState state;
    try {
        const json doc = json::parse(text);
        state.positive_label_ = doc.at("positive_label").get<std::string>();
        for (const auto& t : doc.at("tables")) {
            TableEncoding table;
            table.table = t.at("table").get<std::string>();
            for (const auto& c : t.at("columns")) {
                ColumnEncoding col;
                col.column = c.at("column").get<std::size_t>();
                col.name = c.at("name").get<std::string>();
                col.kind = c.at("kind").get<std::string>() == "numeric" ? ColumnKind::numeric : ColumnKind::categorical;
                if (col.kind == ColumnKind::numeric)
                    col.stats = {c.at("mean").get<double>(), c.at("stddev").get<double>()};
                else
                    col.vocabulary = c.at("vocabulary").get<std::vector<std::string>>();
                table.width += col.width();
                table.columns.push_back(std::move(col));
            }
            if (table.width != t.at("width").get<std::size_t>())
                fail(ErrorCode::checkpoint_invalid, "encoder width of '" + table.table + "' is inconsistent");
            state.tables_.push_back(std::move(table));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::checkpoint_invalid, std::string("preprocessor state: ") + e.what());
    }
    return state;
}

}  // namespace nrelaggs
