#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrelaggs/plan.hpp"
#include "nrelaggs/schema.hpp"

namespace nrelaggs {

struct NumericStats {
    double mean = 0.0;
    double stddev = 1.0;  ///< population deviation, clamped to at least PreprocessorState::epsilon
};

struct ColumnEncoding {
    std::size_t column = 0;  ///< index into the table's columns
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    NumericStats stats;                   ///< numeric columns
    std::vector<std::string> vocabulary;  ///< categorical columns, sorted

    std::size_t width() const noexcept { return kind == ColumnKind::numeric ? 1 : vocabulary.size(); }
};

struct TableEncoding {
    std::string table;
    std::vector<ColumnEncoding> columns;
    std::size_t width = 0;

    /// `column` for numeric features, `column=value` for one-hot features.
    std::vector<std::string> feature_names() const;
};

/// Fitted value encoders for every table in an aggregation plan: numeric
/// cells are z-scored with train-set statistics, categorical cells are
/// one-hot encoded against the train-set vocabulary. Key, foreign-key and
/// target columns are not encoded.
class PreprocessorState {
public:
    static constexpr double epsilon = 1e-12;

    /// Statistics are taken over the distinct rows reachable from the given
    /// training instances. Throws EmptyTrainSet, UnknownInstanceKey.
    static PreprocessorState fit(const RelationalDatabase& db, const AggregationPlan& plan,
                                 std::span<const std::string> train_instance_keys);
    static PreprocessorState fit(const RelationalDatabase& db, std::span<const std::string> train_instance_keys);

    /// Unseen categories and null categoricals encode as all-zero blocks; a
    /// null numeric encodes as 0. Throws UnknownTable.
    std::vector<float> encode_row(std::string_view table, const Row& row) const;
    void encode_row_into(std::size_t plan_table, const Row& row, std::span<float> out) const;

    std::size_t width(std::string_view table) const;
    std::size_t width(std::size_t plan_table) const { return tables_.at(plan_table).width; }
    const TableEncoding& table(std::string_view table) const;
    const std::vector<TableEncoding>& tables() const noexcept { return tables_; }

    /// Class label mapped to +1; every other label maps to -1.
    const std::string& positive_label() const noexcept { return positive_label_; }
    int encode_label(std::string_view label) const { return label == positive_label_ ? 1 : -1; }

    std::string to_json() const;
    static PreprocessorState from_json(std::string_view text);

private:
    std::vector<TableEncoding> tables_;  ///< indexed by plan table
    std::string positive_label_;
};

/// Rows selected for one instance by walking the plan in BFS order. Rows of a
/// table appear grouped by parent row; a row reachable through several parent
/// rows appears once per connection.
struct InstanceRows {
    std::vector<std::vector<std::size_t>> rows;              ///< per plan table: database row indices
    std::vector<std::vector<std::uint32_t>> parent_positions;  ///< per plan table: index into the parent's rows
};

InstanceRows traverse_instance(const RelationalDatabase& db, const AggregationPlan& plan, std::size_t target_row);

}  // namespace nrelaggs
