#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nrelaggs/bundle.hpp"
#include "nrelaggs/plan.hpp"
#include "nrelaggs/preprocess.hpp"
#include "nrelaggs/schema.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return NRELAGGS_SOURCE_DIR; }
inline std::filesystem::path data_dir(const std::string& name) { return source_dir() / "data" / name; }
inline std::filesystem::path fixture_dir(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

inline nrelaggs::RelationalDatabase load_data(const std::string& name) {
    return nrelaggs::RelationalDatabase::load(data_dir(name) / "schema.json", data_dir(name));
}

inline nrelaggs::RelationalDatabase load_fixture(const std::string& name) {
    return nrelaggs::RelationalDatabase::load(fixture_dir(name) / "schema.json", fixture_dir(name));
}

inline nrelaggs::ColumnSpec column(std::string name, nrelaggs::ColumnKind kind, std::string references = {}) {
    nrelaggs::ColumnSpec c;
    c.name = std::move(name);
    c.kind = kind;
    c.references = std::move(references);
    return c;
}

/// Target t with children a and d, a with child b. Numeric columns are
/// continuous (tie free); `categorical` adds one-hot columns.
/// Groups hold 0..max_children rows.
inline nrelaggs::RelationalDatabase random_database(std::uint64_t seed, std::size_t instances = 6,
                                                    std::size_t max_children = 3, bool categorical = false) {
    using nrelaggs::ColumnKind;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> value(0.0, 2.0);
    std::uniform_int_distribution<std::size_t> count(0, max_children);
    const char* colours[] = {"red", "green", "blue"};
    std::uniform_int_distribution<int> pick(0, 2);

    nrelaggs::SchemaDescriptor schema;
    schema.tables.push_back({"t", "t.csv", {column("id", ColumnKind::key), column("label", ColumnKind::categorical),
                                            column("x", ColumnKind::numeric)}});
    schema.tables.push_back({"a", "a.csv", {column("id", ColumnKind::key), column("t_id", ColumnKind::foreign_key, "t"),
                                            column("u", ColumnKind::numeric), column("u2", ColumnKind::numeric)}});
    schema.tables.push_back({"b", "b.csv", {column("id", ColumnKind::key), column("a_id", ColumnKind::foreign_key, "a"),
                                            column("v", ColumnKind::numeric)}});
    schema.tables.push_back({"d", "d.csv", {column("id", ColumnKind::key), column("t_id", ColumnKind::foreign_key, "t"),
                                            column("w", ColumnKind::numeric)}});
    if (categorical) {
        schema.tables[1].columns.push_back(column("c", ColumnKind::categorical));
        schema.tables[3].columns.push_back(column("k", ColumnKind::categorical));
    }
    schema.target_table = "t";
    schema.target_attribute = "label";

    auto num = [&] { return std::to_string(value(rng)); };
    std::vector<std::vector<nrelaggs::Row>> rows(4);
    std::size_t a_id = 0, b_id = 0, d_id = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::string tid = "t" + std::to_string(i);
        rows[0].push_back({tid, i % 2 ? "pos" : "neg", num()});
        for (std::size_t j = count(rng); j > 0; --j) {
            const std::string aid = "a" + std::to_string(a_id++);
            nrelaggs::Row r{aid, tid, num(), num()};
            if (categorical) r.push_back(colours[pick(rng)]);
            rows[1].push_back(r);
            for (std::size_t k = count(rng); k > 0; --k) rows[2].push_back({"b" + std::to_string(b_id++), aid, num()});
        }
        for (std::size_t j = count(rng); j > 0; --j) {
            nrelaggs::Row r{"d" + std::to_string(d_id++), tid, num()};
            if (categorical) r.push_back(colours[pick(rng)]);
            rows[3].push_back(r);
        }
    }
    return nrelaggs::RelationalDatabase::from_rows(schema, rows);
}

struct Prepared {
    nrelaggs::AggregationPlan plan;
    nrelaggs::PreprocessorState state;
    std::vector<nrelaggs::InstanceBundle> instances;
    std::vector<std::size_t> widths;
};

inline Prepared prepare(const nrelaggs::RelationalDatabase& db) {
    Prepared p;
    p.plan = nrelaggs::generate_aggregation_plan(db);
    const auto keys = db.instance_keys();
    p.state = nrelaggs::PreprocessorState::fit(db, p.plan, keys);
    p.instances = nrelaggs::build_instances(db, p.state, p.plan, keys);
    for (std::size_t t = 0; t < p.plan.table_count(); ++t) p.widths.push_back(p.state.width(t));
    return p;
}

template <typename T>
std::vector<T> values(const nrelaggs::Matrix<T>& m) {
    return {m.flat().begin(), m.flat().end()};
}

/// |a - n| / max(|a|, |n|), 0 when both are below `floor`.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return scale < floor ? 0.0 : std::abs(analytic - numeric) / scale;
}

}  // namespace testing

namespace testing {

/// Column labels of the pre-predictor block of a model whose aggregation
/// layers are identities, in relaggs_column_labels naming.
inline std::vector<std::string> identity_model_labels(const nrelaggs::AggregationPlan& plan,
                                                      const nrelaggs::PreprocessorState& state) {
    std::vector<std::vector<std::string>> raw(plan.table_count()), augmented(plan.table_count());
    for (std::size_t t = 0; t < plan.table_count(); ++t)
        for (const auto& name : state.tables()[t].feature_names()) raw[t].push_back(plan.table_names[t] + ":" + name);
    augmented = raw;
    static constexpr const char* names[] = {"sum", "avg", "min", "max"};
    for (const auto& step : plan.steps) {
        std::vector<std::string> block;
        for (auto child : step.nexts)
            for (const char* fn : names)
                for (const auto& inner : augmented[child]) block.push_back(std::string(fn) + "(" + inner + ")");
        block.insert(block.end(), raw[step.current].begin(), raw[step.current].end());
        augmented[step.current] = block;
    }
    return augmented[0];
}

}  // namespace testing
