#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nrelaggs/schema.hpp"

namespace nrelaggs {

/// One `(nexts, current)` tuple: the tables in `nexts` hang off `current`.
struct PlanStep {
    std::vector<std::size_t> nexts;
    std::size_t current = 0;
    std::size_t depth = 0;  ///< BFS distance of `current` from the target table

    friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

/// Tables are addressed by plan index: 0 is the target table, the rest follow
/// in breadth-first discovery order. Only tables reachable from the target
/// take part.
struct AggregationPlan {
    std::vector<std::string> table_names;
    std::vector<std::size_t> db_tables;               ///< plan index -> database table index
    std::vector<std::optional<std::size_t>> parents;  ///< plan index -> parent plan index
    std::vector<PlanStep> steps;
    /// true: deepest tables first (execution order); false: BFS order.
    bool inverted = true;

    std::size_t table_count() const noexcept { return table_names.size(); }
    /// Tables aggregated into `table`, in plan order.
    std::vector<std::size_t> children(std::size_t table) const;
    /// Renders the step list as `[([a, b], c), ...]`.
    std::string describe() const;
    std::uint64_t fingerprint() const;

    friend bool operator==(const AggregationPlan&, const AggregationPlan&) = default;
};

/// Breadth-first search from the target table recording (unvisited
/// neighbours, current) for every visited table with at least one unvisited
/// neighbour. Returns the inverted (execution order) plan.
AggregationPlan generate_aggregation_plan(const RelationalDatabase& db);

/// Swaps between BFS and execution order by reversing the sequence of depth
/// levels; steps that share a depth keep their relative order. Involution.
AggregationPlan invert(const AggregationPlan& plan);

}  // namespace nrelaggs
