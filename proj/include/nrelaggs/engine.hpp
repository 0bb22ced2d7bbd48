#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrelaggs/bundle.hpp"
#include "nrelaggs/model.hpp"
#include "nrelaggs/plan.hpp"
#include "nrelaggs/preprocess.hpp"
#include "nrelaggs/schema.hpp"
#include "nrelaggs/trainer.hpp"

namespace nrelaggs {

enum class Engine { relaggs, nrelaggs, fix_nrelaggs, majority };

/// Accepts relaggs, nrelaggs, fix_nrelaggs (also fix-nrelaggs) and majority.
/// Throws InvalidArgument.
Engine parse_engine(std::string_view text);
std::string_view engine_name(Engine engine) noexcept;

/// Hyperparameter grid in a fixed order. N-RELAGGS: generation factor, then
/// selection factor, then predictor shape, each over {0.5, 0.75, 1.0} and
/// {(50), (100), (100, 50)}. Fix N-RELAGGS and RELAGGS: the predictor shapes
/// only. Majority: one entry. Every other field is copied from `base`.
std::vector<NRelaggsConfig> config_grid(Engine engine, const NRelaggsConfig& base);

/// +1/-1 labels of the given instances.
std::vector<int> instance_labels(const RelationalDatabase& db, const PreprocessorState& state,
                                 std::span<const std::string> keys);

/// Plan with the target table alone, used to feed a flat feature matrix to
/// the predictor network.
AggregationPlan flat_plan(std::string name);

/// One instance bundle per matrix row on flat_plan().
std::vector<InstanceBundle> flat_instances(const MatrixF& features, std::span<const std::string> keys,
                                           std::span<const int> labels);

/// A fitted engine: encoders, the network (N-RELAGGS or the predictor fed by
/// standardized RELAGGS features), or the majority label.
struct TrainedEngine {
    Engine engine = Engine::nrelaggs;
    NRelaggsConfig config;
    AggregationPlan plan;
    PreprocessorState preprocessor;
    Model model;
    std::vector<double> feature_mean;   ///< RELAGGS column standardization
    std::vector<double> feature_scale;
    int majority_label = 1;
    TrainResult training;

    /// Scores for the given instances; label = +1 when score >= 0.
    std::vector<float> score(const RelationalDatabase& db, std::span<const std::string> keys) const;
};

/// Fits the preprocessor on `train_keys`, holds out a stratified
/// `config.validation_fraction` of them for early stopping and trains.
TrainedEngine fit_engine(const RelationalDatabase& db, const AggregationPlan& plan, Engine engine,
                         const NRelaggsConfig& config, std::span<const std::string> train_keys, std::uint64_t seed);

}  // namespace nrelaggs
