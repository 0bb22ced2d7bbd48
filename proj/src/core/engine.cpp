#include "nrelaggs/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrelaggs/cross_validation.hpp"
#include "nrelaggs/errors.hpp"
#include "nrelaggs/relaggs.hpp"

namespace nrelaggs {

Engine parse_engine(std::string_view text) {
    if (text == "relaggs") return Engine::relaggs;
    if (text == "nrelaggs") return Engine::nrelaggs;
    if (text == "fix_nrelaggs" || text == "fix-nrelaggs") return Engine::fix_nrelaggs;
    if (text == "majority") return Engine::majority;
    fail(ErrorCode::invalid_argument, "unknown engine '" + std::string(text) + "'");
}

std::string_view engine_name(Engine engine) noexcept {
    switch (engine) {
        case Engine::relaggs: return "relaggs";
        case Engine::nrelaggs: return "nrelaggs";
        case Engine::fix_nrelaggs: return "fix_nrelaggs";
        case Engine::majority: return "majority";
    }
    return "unknown";
}

std::vector<NRelaggsConfig> config_grid(Engine engine, const NRelaggsConfig& base) {
    const double factors[] = {0.5, 0.75, 1.0};
    const std::vector<std::vector<std::size_t>> shapes{{50}, {100}, {100, 50}};
    std::vector<NRelaggsConfig> grid;
    auto with = [&](double g, double s, const std::vector<std::size_t>& shape) {
        NRelaggsConfig c = base;
        c.feature_generation_factor = g;
        c.feature_selection_factor = s;
        c.predictor_layers = shape;
        grid.push_back(c);
    };
    switch (engine) {
        case Engine::nrelaggs:
            for (double g : factors)
                for (double s : factors)
                    for (const auto& shape : shapes) with(g, s, shape);
            break;
        case Engine::fix_nrelaggs:
        case Engine::relaggs:
            for (const auto& shape : shapes) with(1.0, 1.0, shape);
            break;
        case Engine::majority:
            grid.push_back(base);
            break;
    }
    return grid;
}

std::vector<int> instance_labels(const RelationalDatabase& db, const PreprocessorState& state,
                                 std::span<const std::string> keys) {
    std::vector<int> labels;
    labels.reserve(keys.size());
    for (const auto& key : keys) {
        auto row = db.instance_row(key);
        if (!row) fail(ErrorCode::unknown_instance_key, key);
        labels.push_back(state.encode_label(db.label_of(*row)));
    }
    return labels;
}

AggregationPlan flat_plan(std::string name) {
    AggregationPlan plan;
    plan.table_names = {std::move(name)};
    plan.db_tables = {0};
    plan.parents = {std::nullopt};
    plan.inverted = true;
    return plan;
}

std::vector<InstanceBundle> flat_instances(const MatrixF& features, std::span<const std::string> keys,
                                           std::span<const int> labels) {
    if (features.rows() != keys.size() || keys.size() != labels.size())
        fail(ErrorCode::length_mismatch, "feature rows, keys and labels differ in count");
    std::vector<InstanceBundle> out(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out[i].key = keys[i];
        out[i].label = labels[i];
        MatrixF row(1, features.cols());
        std::copy(features.row(i).begin(), features.row(i).end(), row.row(0).begin());
        out[i].x_data.push_back(std::move(row));
        out[i].x_ids.emplace_back();
    }
    return out;
}

namespace {

MatrixF relaggs_matrix(const RelationalDatabase& db, const PreprocessorState& state, const AggregationPlan& plan,
                       std::span<const std::string> keys) {
    const auto instances = build_instances(db, state, plan, keys);
    return relaggs_propositionalize(collate(instances, plan), plan);
}

void standardize(MatrixF& m, const std::vector<double>& mean, const std::vector<double>& scale) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c)
            row[c] = static_cast<float>((static_cast<double>(row[c]) - mean[c]) / scale[c]);
    }
}

BatchBundle subset_batch(std::span<const InstanceBundle> all, std::span<const std::size_t> picks,
                         const AggregationPlan& plan) {
    std::vector<InstanceBundle> chosen;
    chosen.reserve(picks.size());
    for (auto i : picks) chosen.push_back(all[i]);
    return collate(chosen, plan);
}

}  // namespace

std::vector<float> TrainedEngine::score(const RelationalDatabase& db, std::span<const std::string> keys) const {
    if (engine == Engine::majority) return std::vector<float>(keys.size(), static_cast<float>(majority_label));
    if (keys.empty()) return {};
    const auto labels = instance_labels(db, preprocessor, keys);
    if (engine == Engine::relaggs) {
        MatrixF features = relaggs_matrix(db, preprocessor, plan, keys);
        standardize(features, feature_mean, feature_scale);
        const auto rows = flat_instances(features, keys, labels);
        return model.forward(collate(rows, model.plan()));
    }
    const auto instances = build_instances(db, preprocessor, plan, keys);
    return model.forward(collate(instances, plan));
}

TrainedEngine fit_engine(const RelationalDatabase& db, const AggregationPlan& plan, Engine engine,
                         const NRelaggsConfig& config, std::span<const std::string> train_keys, std::uint64_t seed) {
    if (train_keys.empty()) fail(ErrorCode::empty_train_set, "no training instances");
    TrainedEngine fitted;
    fitted.engine = engine;
    fitted.config = config;
    fitted.plan = plan;
    fitted.preprocessor = PreprocessorState::fit(db, plan, train_keys);
    const auto labels = instance_labels(db, fitted.preprocessor, train_keys);

    if (engine == Engine::majority) {
        const auto positives = std::count(labels.begin(), labels.end(), 1);
        const auto negatives = static_cast<std::ptrdiff_t>(labels.size()) - positives;
        fitted.majority_label = positives >= negatives ? 1 : -1;
        return fitted;
    }

    const auto [fit_part, validation_part] = stratified_holdout(labels, config.validation_fraction, seed);

    std::vector<InstanceBundle> instances;
    AggregationPlan model_plan = plan;
    std::vector<std::size_t> widths;
    if (engine == Engine::relaggs) {
        MatrixF features = relaggs_matrix(db, fitted.preprocessor, plan, train_keys);
        const std::size_t d = features.cols();
        fitted.feature_mean.assign(d, 0.0);
        fitted.feature_scale.assign(d, 0.0);
        for (std::size_t r = 0; r < features.rows(); ++r)
            for (std::size_t c = 0; c < d; ++c) fitted.feature_mean[c] += features(r, c);
        for (auto& m : fitted.feature_mean) m /= static_cast<double>(features.rows());
        for (std::size_t r = 0; r < features.rows(); ++r)
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = features(r, c) - fitted.feature_mean[c];
                fitted.feature_scale[c] += diff * diff;
            }
        for (auto& s : fitted.feature_scale)
            s = std::max(std::sqrt(s / static_cast<double>(features.rows())), PreprocessorState::epsilon);
        standardize(features, fitted.feature_mean, fitted.feature_scale);
        instances = flat_instances(features, train_keys, labels);
        model_plan = flat_plan("relaggs");
        widths = {d};
    } else {
        instances = build_instances(db, fitted.preprocessor, plan, train_keys);
        for (std::size_t t = 0; t < plan.table_count(); ++t) widths.push_back(fitted.preprocessor.width(t));
    }

    std::vector<InstanceBundle> fit_set;
    fit_set.reserve(fit_part.size());
    for (auto i : fit_part) fit_set.push_back(instances[i]);
    const BatchBundle validation = validation_part.empty() ? BatchBundle{}
                                                           : subset_batch(instances, validation_part, model_plan);

    fitted.model = Model::build(model_plan, widths, config, seed);
    if (config.freeze_aggregation) fitted.model.set_identity_aggregation();
    fitted.training = train(fitted.model, fit_set, validation, config, derive_seed(seed, {1}));
    return fitted;
}

}  // namespace nrelaggs
