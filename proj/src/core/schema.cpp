#include "nrelaggs/schema.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nrelaggs/csv.hpp"
#include "nrelaggs/errors.hpp"

namespace nrelaggs {

using nlohmann::json;

std::string_view column_kind_name(ColumnKind kind) noexcept {
    switch (kind) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::key: return "key";
        case ColumnKind::foreign_key: return "foreign_key";
    }
    return "numeric";
}

namespace {

ColumnKind parse_kind(const std::string& text) {
    if (text == "numeric") return ColumnKind::numeric;
    if (text == "categorical") return ColumnKind::categorical;
    if (text == "key") return ColumnKind::key;
    if (text == "foreign_key") return ColumnKind::foreign_key;
    fail(ErrorCode::schema_invalid, "unknown column kind '" + text + "'");
}

std::string required_string(const json& node, const char* field, const std::string& context) {
    auto it = node.find(field);
    if (it == node.end() || !it->is_string())
        fail(ErrorCode::schema_invalid, context + ": missing string field '" + field + "'");
    return it->get<std::string>();
}

}  // namespace

std::optional<std::size_t> TableSpec::column_index(std::string_view column) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == column) return i;
    return std::nullopt;
}

std::optional<std::size_t> TableSpec::key_column() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].kind == ColumnKind::key) return i;
    return std::nullopt;
}

SchemaDescriptor SchemaDescriptor::parse(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::schema_invalid, std::string("descriptor is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::schema_invalid, "descriptor must be a JSON object");

    SchemaDescriptor out;
    out.target_table = required_string(doc, "target_table", "descriptor");
    out.target_attribute = required_string(doc, "target_attribute", "descriptor");
    auto tables = doc.find("tables");
    if (tables == doc.end() || !tables->is_array()) fail(ErrorCode::schema_invalid, "descriptor: 'tables' must be an array");
    for (const auto& t : *tables) {
        TableSpec table;
        table.name = required_string(t, "name", "table");
        table.file = t.contains("file") ? required_string(t, "file", table.name) : table.name + ".csv";
        auto columns = t.find("columns");
        if (columns == t.end() || !columns->is_array())
            fail(ErrorCode::schema_invalid, "table '" + table.name + "': 'columns' must be an array");
        for (const auto& c : *columns) {
            ColumnSpec column;
            column.name = required_string(c, "name", table.name);
            column.kind = parse_kind(required_string(c, "kind", table.name + "." + column.name));
            if (column.kind == ColumnKind::foreign_key)
                column.references = required_string(c, "references", table.name + "." + column.name);
            table.columns.push_back(std::move(column));
        }
        out.tables.push_back(std::move(table));
    }
    return out;
}

SchemaDescriptor SchemaDescriptor::read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open schema descriptor " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::string SchemaDescriptor::serialize() const {
    json doc;
    doc["tables"] = json::array();
    for (const auto& t : tables) {
        json table{{"name", t.name}, {"file", t.file}, {"columns", json::array()}};
        for (const auto& c : t.columns) {
            json column{{"name", c.name}, {"kind", std::string(column_kind_name(c.kind))}};
            if (c.kind == ColumnKind::foreign_key) column["references"] = c.references;
            table["columns"].push_back(std::move(column));
        }
        doc["tables"].push_back(std::move(table));
    }
    doc["target_table"] = target_table;
    doc["target_attribute"] = target_attribute;
    return doc.dump(2);
}

RelationalDatabase RelationalDatabase::load(const std::filesystem::path& schema_file,
                                            const std::filesystem::path& data_dir) {
    SchemaDescriptor descriptor = SchemaDescriptor::read_file(schema_file);
    std::vector<std::vector<Row>> rows;
    for (const auto& table : descriptor.tables) {
        const auto path = data_dir / table.file;
        if (!std::filesystem::is_regular_file(path))
            fail(ErrorCode::missing_table_file, "table '" + table.name + "' expects " + path.string());
        auto records = csv::read_file(path);
        if (records.empty()) fail(ErrorCode::header_mismatch, path.string() + " has no header row");
        Row expected;
        for (const auto& c : table.columns) expected.push_back(c.name);
        if (records.front() != expected)
            fail(ErrorCode::header_mismatch, path.string() + ": header '" + csv::format_record(records.front()) +
                                                 "' does not match columns '" + csv::format_record(expected) + "'");
        std::vector<Row> table_rows;
        table_rows.reserve(records.size() - 1);
        for (std::size_t i = 1; i < records.size(); ++i) {
            if (records[i].size() != expected.size())
                fail(ErrorCode::parse_error, path.string() + ": record " + std::to_string(i + 1) + " has " +
                                                 std::to_string(records[i].size()) + " fields, expected " +
                                                 std::to_string(expected.size()));
            table_rows.push_back(std::move(records[i]));
        }
        rows.push_back(std::move(table_rows));
    }
    return from_rows(std::move(descriptor), std::move(rows));
}

RelationalDatabase RelationalDatabase::from_rows(SchemaDescriptor descriptor, std::vector<std::vector<Row>> rows) {
    if (rows.size() != descriptor.tables.size())
        fail(ErrorCode::schema_invalid, "row storage does not match the number of tables");
    RelationalDatabase db;
    db.descriptor_ = std::move(descriptor);
    db.rows_ = std::move(rows);
    for (std::size_t t = 0; t < db.rows_.size(); ++t) {
        db.descriptor_.tables[t].row_count = db.rows_[t].size();
        for (const auto& row : db.rows_[t])
            if (row.size() != db.descriptor_.tables[t].columns.size())
                fail(ErrorCode::parse_error, "table '" + db.descriptor_.tables[t].name + "' has a row of wrong width");
    }
    db.build_indexes();
    db.validate();
    return db;
}

void RelationalDatabase::build_indexes() {
    const auto& tables = descriptor_.tables;
    for (std::size_t t = 0; t < tables.size(); ++t) {
        if (!table_by_name_.emplace(tables[t].name, t).second)
            fail(ErrorCode::schema_invalid, "duplicate table name '" + tables[t].name + "'");
        std::set<std::string> names;
        std::size_t keys = 0;
        for (const auto& c : tables[t].columns) {
            if (!names.insert(c.name).second)
                fail(ErrorCode::schema_invalid, "duplicate column '" + c.name + "' in table '" + tables[t].name + "'");
            if (c.kind == ColumnKind::key) ++keys;
        }
        if (keys > 1) fail(ErrorCode::schema_invalid, "table '" + tables[t].name + "' declares more than one key column");
    }

    key_index_.assign(tables.size(), {});
    for (std::size_t t = 0; t < tables.size(); ++t) {
        auto key = tables[t].key_column();
        if (!key) continue;
        for (std::size_t r = 0; r < rows_[t].size(); ++r) {
            const auto& value = rows_[t][r][*key];
            if (value.empty()) fail(ErrorCode::schema_invalid, "null key in table '" + tables[t].name + "'");
            if (!key_index_[t].emplace(value, r).second)
                fail(ErrorCode::schema_invalid, "duplicate key '" + value + "' in table '" + tables[t].name + "'");
        }
    }

    for (std::size_t t = 0; t < tables.size(); ++t) {
        for (std::size_t c = 0; c < tables[t].columns.size(); ++c) {
            const auto& column = tables[t].columns[c];
            if (column.kind != ColumnKind::foreign_key) continue;
            auto parent = table_by_name_.find(column.references);
            if (parent == table_by_name_.end())
                fail(ErrorCode::schema_invalid, tables[t].name + "." + column.name + " references unknown table '" +
                                                    column.references + "'");
            if (!tables[parent->second].key_column())
                fail(ErrorCode::schema_invalid, tables[t].name + "." + column.name + " references table '" +
                                                    column.references + "' which has no key column");
            foreign_keys_.push_back({t, c, parent->second});
        }
    }

    reverse_index_.assign(foreign_keys_.size(), {});
    for (std::size_t e = 0; e < foreign_keys_.size(); ++e) {
        const auto& fk = foreign_keys_[e];
        for (std::size_t r = 0; r < rows_[fk.child].size(); ++r) {
            const auto& value = rows_[fk.child][r][fk.column];
            if (value.empty()) continue;
            if (!key_index_[fk.parent].contains(value))
                fail(ErrorCode::dangling_foreign_key,
                     "(" + tables[fk.child].name + ", " + tables[fk.child].columns[fk.column].name + ", " + value + ")");
            reverse_index_[e][value].push_back(r);
        }
    }
}

void RelationalDatabase::validate() {
    auto target = table_by_name_.find(descriptor_.target_table);
    if (target == table_by_name_.end())
        fail(ErrorCode::schema_invalid, "target table '" + descriptor_.target_table + "' is not declared");
    target_table_ = target->second;
    const auto& spec = descriptor_.tables[target_table_];
    auto column = spec.column_index(descriptor_.target_attribute);
    if (!column)
        fail(ErrorCode::schema_invalid, "target attribute '" + descriptor_.target_attribute + "' is not a column of '" +
                                            spec.name + "'");
    target_column_ = *column;
    if (spec.columns[target_column_].kind != ColumnKind::categorical)
        fail(ErrorCode::target_not_categorical, "'" + descriptor_.target_attribute + "' is declared " +
                                                    std::string(column_kind_name(spec.columns[target_column_].kind)));
    std::set<std::string> labels;
    for (const auto& row : rows_[target_table_]) {
        if (row[target_column_].empty()) fail(ErrorCode::target_not_categorical, "null target value");
        labels.insert(row[target_column_]);
    }
    if (!rows_[target_table_].empty() && labels.size() < 2)
        fail(ErrorCode::target_not_categorical, "target attribute has fewer than two distinct values");

    // The reachable part of the join (multi)graph must be a tree: connected by
    // construction, so it is acyclic iff it has exactly |V| - 1 edges.
    std::vector<bool> reachable(table_count(), false);
    std::deque<std::size_t> queue{target_table_};
    reachable[target_table_] = true;
    while (!queue.empty()) {
        auto t = queue.front();
        queue.pop_front();
        for (const auto& fk : foreign_keys_) {
            for (auto [a, b] : {std::pair{fk.child, fk.parent}, std::pair{fk.parent, fk.child}}) {
                if (a == t && !reachable[b]) {
                    reachable[b] = true;
                    queue.push_back(b);
                }
            }
        }
    }
    std::size_t nodes = std::count(reachable.begin(), reachable.end(), true);
    std::size_t edges = std::count_if(foreign_keys_.begin(), foreign_keys_.end(),
                                      [&](const ForeignKey& fk) { return reachable[fk.child]; });
    if (edges != nodes - 1)
        fail(ErrorCode::cyclic_join_graph, "the join graph reachable from '" + spec.name + "' has " +
                                               std::to_string(nodes) + " tables but " + std::to_string(edges) +
                                               " foreign keys");
}

std::optional<std::size_t> RelationalDatabase::find_table(std::string_view name) const {
    auto it = table_by_name_.find(std::string(name));
    if (it == table_by_name_.end()) return std::nullopt;
    return it->second;
}

std::size_t RelationalDatabase::table_index(std::string_view name) const {
    auto index = find_table(name);
    if (!index) fail(ErrorCode::unknown_table, std::string(name));
    return *index;
}

std::vector<std::size_t> RelationalDatabase::neighbors(std::size_t table) const {
    std::vector<std::size_t> out;
    for (const auto& fk : foreign_keys_) {
        if (fk.child == table) out.push_back(fk.parent);
        if (fk.parent == table) out.push_back(fk.child);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::string> RelationalDatabase::join_children(std::string_view table) const {
    std::vector<std::string> out;
    for (auto t : neighbors(table_index(table))) out.push_back(descriptor_.tables[t].name);
    return out;
}

const ForeignKey* RelationalDatabase::edge_between(std::size_t a, std::size_t b) const {
    for (const auto& fk : foreign_keys_)
        if ((fk.child == a && fk.parent == b) || (fk.child == b && fk.parent == a)) return &fk;
    return nullptr;
}

std::vector<std::size_t> RelationalDatabase::connected_rows(std::size_t from, std::size_t from_row,
                                                            std::size_t to) const {
    const ForeignKey* fk = edge_between(from, to);
    if (!fk) fail(ErrorCode::unknown_table, "tables '" + table(from).name + "' and '" + table(to).name +
                                                "' are not joined by a foreign key");
    if (fk->child == from) {
        const auto& value = rows_[from].at(from_row)[fk->column];
        if (value.empty()) return {};
        return {key_index_[to].at(value)};
    }
    const auto& key = rows_[from].at(from_row)[*descriptor_.tables[from].key_column()];
    const auto& index = reverse_index_[static_cast<std::size_t>(fk - foreign_keys_.data())];
    auto it = index.find(key);
    if (it == index.end()) return {};
    return it->second;
}

std::vector<std::string> RelationalDatabase::instance_keys() const {
    std::vector<std::string> keys;
    const auto key = descriptor_.tables[target_table_].key_column();
    const auto& rows = rows_[target_table_];
    keys.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) keys.push_back(key ? rows[r][*key] : std::to_string(r));
    return keys;
}

std::optional<std::size_t> RelationalDatabase::instance_row(std::string_view key) const {
    if (descriptor_.tables[target_table_].key_column()) {
        auto it = key_index_[target_table_].find(std::string(key));
        if (it == key_index_[target_table_].end()) return std::nullopt;
        return it->second;
    }
    std::size_t row = 0;
    for (char c : key) {
        if (c < '0' || c > '9') return std::nullopt;
        row = row * 10 + static_cast<std::size_t>(c - '0');
    }
    if (key.empty() || row >= rows_[target_table_].size()) return std::nullopt;
    return row;
}

std::map<std::string, std::size_t> class_distribution(const RelationalDatabase& db) {
    std::map<std::string, std::size_t> counts;
    const auto& rows = db.rows(db.target_table());
    for (std::size_t r = 0; r < rows.size(); ++r) ++counts[db.label_of(r)];
    return counts;
}

}  // namespace nrelaggs
