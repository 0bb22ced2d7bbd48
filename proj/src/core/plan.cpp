#include "nrelaggs/plan.hpp"

#include <deque>
#include <unordered_map>

namespace nrelaggs {

std::vector<std::size_t> AggregationPlan::children(std::size_t table) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < parents.size(); ++t)
        if (parents[t] && *parents[t] == table) out.push_back(t);
    return out;
}

std::string AggregationPlan::describe() const {
    std::string out = "[";
    for (std::size_t s = 0; s < steps.size(); ++s) {
        if (s) out += ", ";
        out += "([";
        for (std::size_t i = 0; i < steps[s].nexts.size(); ++i) {
            if (i) out += ", ";
            out += table_names[steps[s].nexts[i]];
        }
        out += "], " + table_names[steps[s].current] + ")";
    }
    return out + "]";
}

std::uint64_t AggregationPlan::fingerprint() const {
    // FNV-1a over the execution-order description and parent links.
    std::string text = (inverted ? describe() : invert(*this).describe());
    for (const auto& p : parents) text += p ? ":" + std::to_string(*p) : ":-";
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

AggregationPlan generate_aggregation_plan(const RelationalDatabase& db) {
    AggregationPlan plan;
    plan.inverted = false;
    std::unordered_map<std::size_t, std::size_t> plan_index;
    std::vector<std::size_t> depth;

    auto discover = [&](std::size_t db_table, std::optional<std::size_t> parent, std::size_t d) {
        plan_index.emplace(db_table, plan.table_names.size());
        plan.table_names.push_back(db.table(db_table).name);
        plan.db_tables.push_back(db_table);
        plan.parents.push_back(parent);
        depth.push_back(d);
        return plan.table_names.size() - 1;
    };

    std::deque<std::size_t> queue{discover(db.target_table(), std::nullopt, 0)};
    while (!queue.empty()) {
        const std::size_t current = queue.front();
        queue.pop_front();
        PlanStep step{{}, current, depth[current]};
        for (auto neighbor : db.neighbors(plan.db_tables[current])) {
            if (plan_index.contains(neighbor)) continue;
            auto next = discover(neighbor, current, depth[current] + 1);
            step.nexts.push_back(next);
            queue.push_back(next);
        }
        if (!step.nexts.empty()) plan.steps.push_back(std::move(step));
    }
    return invert(plan);
}

AggregationPlan invert(const AggregationPlan& plan) {
    AggregationPlan out = plan;
    out.inverted = !plan.inverted;
    out.steps.clear();
    // Steps are contiguous by depth in either order; emit the depth blocks in
    // reverse sequence.
    std::size_t end = plan.steps.size();
    while (end > 0) {
        std::size_t begin = end - 1;
        while (begin > 0 && plan.steps[begin - 1].depth == plan.steps[end - 1].depth) --begin;
        out.steps.insert(out.steps.end(), plan.steps.begin() + static_cast<std::ptrdiff_t>(begin),
                         plan.steps.begin() + static_cast<std::ptrdiff_t>(end));
        end = begin;
    }
    return out;
}

}  // namespace nrelaggs
