#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nrelaggs {

enum class ColumnKind { numeric, categorical, key, foreign_key };

std::string_view column_kind_name(ColumnKind kind) noexcept;

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::string references;  ///< referenced table, foreign keys only

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct TableSpec {
    std::string name;
    std::string file;
    std::vector<ColumnSpec> columns;
    std::size_t row_count = 0;

    std::optional<std::size_t> column_index(std::string_view column) const;
    std::optional<std::size_t> key_column() const;

    friend bool operator==(const TableSpec&, const TableSpec&) = default;
};

/// The JSON schema descriptor:
/// `{tables:[{name, file, columns:[{name, kind, references?}]}], target_table, target_attribute}`.
struct SchemaDescriptor {
    std::vector<TableSpec> tables;
    std::string target_table;
    std::string target_attribute;

    static SchemaDescriptor parse(std::string_view json_text);
    static SchemaDescriptor read_file(const std::filesystem::path& path);
    std::string serialize() const;

    friend bool operator==(const SchemaDescriptor&, const SchemaDescriptor&) = default;
};

/// Raw cells, string encoded; the empty string is null.
using Row = std::vector<std::string>;

/// child.column references parent's key column.
struct ForeignKey {
    std::size_t child = 0;
    std::size_t column = 0;
    std::size_t parent = 0;
};

/// A validated, immutable multi-relational database whose join graph is a
/// tree when restricted to the tables reachable from the target table.
class RelationalDatabase {
public:
    static RelationalDatabase load(const std::filesystem::path& schema_file, const std::filesystem::path& data_dir);

    /// Builds and validates a database from in-memory rows, one vector per
    /// descriptor table.
    static RelationalDatabase from_rows(SchemaDescriptor descriptor, std::vector<std::vector<Row>> rows);

    const SchemaDescriptor& descriptor() const noexcept { return descriptor_; }
    std::size_t table_count() const noexcept { return descriptor_.tables.size(); }
    const TableSpec& table(std::size_t index) const { return descriptor_.tables.at(index); }
    const std::vector<Row>& rows(std::size_t index) const { return rows_.at(index); }

    std::optional<std::size_t> find_table(std::string_view name) const;
    /// Throws UnknownTable.
    std::size_t table_index(std::string_view name) const;

    std::size_t target_table() const noexcept { return target_table_; }
    std::size_t target_column() const noexcept { return target_column_; }
    const std::string& label_of(std::size_t target_row) const { return rows_[target_table_].at(target_row)[target_column_]; }

    const std::vector<ForeignKey>& foreign_keys() const noexcept { return foreign_keys_; }

    /// Tables adjacent to `table` through a foreign key in either direction,
    /// in declaration order.
    std::vector<std::size_t> neighbors(std::size_t table) const;
    std::vector<std::string> join_children(std::string_view table) const;

    /// Rows of `to` joined with row `from_row` of the adjacent table `from`.
    /// Null foreign keys join nothing.
    std::vector<std::size_t> connected_rows(std::size_t from, std::size_t from_row, std::size_t to) const;

    /// Identifier of each target-table row: its key value, or the row index
    /// when the target table has no key column.
    std::vector<std::string> instance_keys() const;
    std::optional<std::size_t> instance_row(std::string_view key) const;

private:
    void build_indexes();
    void validate();
    const ForeignKey* edge_between(std::size_t a, std::size_t b) const;

    SchemaDescriptor descriptor_;
    std::vector<std::vector<Row>> rows_;
    std::unordered_map<std::string, std::size_t> table_by_name_;
    std::size_t target_table_ = 0;
    std::size_t target_column_ = 0;
    std::vector<ForeignKey> foreign_keys_;
    /// Per table: key value -> row index (tables with a key column only).
    std::vector<std::unordered_map<std::string, std::size_t>> key_index_;
    /// Per foreign key: referenced value -> referencing rows, ascending.
    std::vector<std::unordered_map<std::string, std::vector<std::size_t>>> reverse_index_;
};

/// Count of target-table rows per class label.
std::map<std::string, std::size_t> class_distribution(const RelationalDatabase& db);

}  // namespace nrelaggs
