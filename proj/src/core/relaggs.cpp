#include "nrelaggs/relaggs.hpp"

#include <cmath>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

namespace {

void check_plan(const BatchBundle& batch, const AggregationPlan& plan) {
    if (!plan.inverted) fail(ErrorCode::plan_mismatch, "plan must be in execution (inverted) order");
    if (batch.table_count() != plan.table_count())
        fail(ErrorCode::plan_mismatch, "batch has " + std::to_string(batch.table_count()) + " tables, plan has " +
                                           std::to_string(plan.table_count()));
    for (std::size_t t = 1; t < plan.table_count(); ++t) {
        const auto parent_rows = batch.x_data[*plan.parents[t]].rows();
        if (batch.x_ids[t].size() != batch.x_data[t].rows())
            fail(ErrorCode::plan_mismatch, "segment ids of '" + plan.table_names[t] + "' do not match its rows");
        for (auto id : batch.x_ids[t])
            if (id >= parent_rows)
                fail(ErrorCode::plan_mismatch, "'" + plan.table_names[t] + "' references a missing parent row");
    }
}

/// [avg | max | min | std | sum] of `rows` grouped by `ids` into `groups`.
MatrixF static_aggregates(const MatrixF& rows, const std::vector<std::uint32_t>& ids, std::size_t groups) {
    const std::size_t l = rows.cols();
    MatrixF sum(groups, l, 0.0f), lo(groups, l, 0.0f), hi(groups, l, 0.0f);
    std::vector<std::size_t> count(groups, 0);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto g = ids[r];
        const auto src = rows.row(r);
        for (std::size_t c = 0; c < l; ++c) {
            sum(g, c) += src[c];
            if (count[g] == 0) {
                lo(g, c) = hi(g, c) = src[c];
            } else {
                lo(g, c) = src[c] < lo(g, c) ? src[c] : lo(g, c);
                hi(g, c) = src[c] > hi(g, c) ? src[c] : hi(g, c);
            }
        }
        ++count[g];
    }
    // Deviation in double around the double-precision mean.
    std::vector<double> dsum(groups * l, 0.0), squares(groups * l, 0.0);
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t c = 0; c < l; ++c) dsum[ids[r] * l + c] += rows(r, c);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const auto g = ids[r];
        for (std::size_t c = 0; c < l; ++c) {
            const double d = rows(r, c) - dsum[g * l + c] / static_cast<double>(count[g]);
            squares[g * l + c] += d * d;
        }
    }

    MatrixF out(groups, static_aggregate_count * l, 0.0f);
    for (std::size_t g = 0; g < groups; ++g) {
        if (count[g] == 0) continue;
        auto dst = out.row(g);
        for (std::size_t c = 0; c < l; ++c) {
            dst[c] = sum(g, c) / static_cast<float>(count[g]);
            dst[l + c] = hi(g, c);
            dst[2 * l + c] = lo(g, c);
            dst[3 * l + c] = count[g] <= 1 ? 0.0f
                                           : static_cast<float>(std::sqrt(squares[g * l + c] / static_cast<double>(count[g])));
            dst[4 * l + c] = sum(g, c);
        }
    }
    return out;
}

}  // namespace

MatrixF relaggs_propositionalize(const BatchBundle& batch, const AggregationPlan& plan) {
    if (batch.n == 0) return MatrixF(0, 0);
    check_plan(batch, plan);
    std::vector<MatrixF> augmented = batch.x_data;
    for (const auto& step : plan.steps) {
        std::vector<MatrixF> blocks;
        blocks.reserve(step.nexts.size() + 1);
        blocks.push_back(batch.x_data[step.current]);
        for (auto child : step.nexts)
            blocks.push_back(static_aggregates(augmented[child], batch.x_ids[child], batch.x_data[step.current].rows()));
        std::vector<const MatrixF*> parts;
        for (const auto& b : blocks) parts.push_back(&b);
        augmented[step.current] = hconcat<float>(parts);
    }
    return std::move(augmented[0]);
}

std::size_t relaggs_width(const AggregationPlan& plan, const std::vector<std::size_t>& table_widths) {
    if (table_widths.size() != plan.table_count()) fail(ErrorCode::plan_mismatch, "one width per plan table expected");
    std::vector<std::size_t> width = table_widths;
    for (const auto& step : plan.steps)
        for (auto child : step.nexts) width[step.current] += static_aggregate_count * width[child];
    return width[0];
}

std::vector<std::string> relaggs_column_labels(const AggregationPlan& plan,
                                               const std::vector<std::vector<std::string>>& table_feature_names) {
    if (table_feature_names.size() != plan.table_count())
        fail(ErrorCode::plan_mismatch, "one feature-name list per plan table expected");
    std::vector<std::vector<std::string>> labels(plan.table_count());
    for (std::size_t t = 0; t < plan.table_count(); ++t)
        for (const auto& name : table_feature_names[t]) labels[t].push_back(plan.table_names[t] + ":" + name);
    static constexpr const char* names[] = {"avg", "max", "min", "std", "sum"};
    for (const auto& step : plan.steps) {
        for (auto child : step.nexts) {
            std::vector<std::string> block;
            for (const char* fn : names)
                for (const auto& inner : labels[child]) block.push_back(std::string(fn) + "(" + inner + ")");
            labels[step.current].insert(labels[step.current].end(), block.begin(), block.end());
        }
    }
    return labels[0];
}

}  // namespace nrelaggs
