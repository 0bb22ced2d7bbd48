#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nrelaggs/bundle.hpp"
#include "nrelaggs/matrix.hpp"
#include "nrelaggs/plan.hpp"

namespace nrelaggs {

/// The static aggregate set, in output order.
enum class StaticAggregate { average, maximum, minimum, stddev, sum };
inline constexpr std::size_t static_aggregate_count = 5;

/// Nested aggregation: for each plan step (execution order) every child
/// table's rows are grouped by parent row, summarized with the five static
/// aggregates and appended to the parent rows. Returns the n x D matrix
/// anchored at the target table. Empty groups yield zeros; stddev is the
/// population form. Throws PlanMismatch.
MatrixF relaggs_propositionalize(const BatchBundle& batch, const AggregationPlan& plan);

/// Closed-form output width: D(t) = width(t) + sum over children c of 5 D(c).
std::size_t relaggs_width(const AggregationPlan& plan, const std::vector<std::size_t>& table_widths);

/// Column provenance labels such as `avg(cars:len=short)`, aligned with the
/// columns of relaggs_propositionalize.
std::vector<std::string> relaggs_column_labels(const AggregationPlan& plan,
                                               const std::vector<std::vector<std::string>>& table_feature_names);

}  // namespace nrelaggs
