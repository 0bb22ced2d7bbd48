#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrelaggs/bundle.hpp"
#include "nrelaggs/matrix.hpp"
#include "nrelaggs/neural.hpp"
#include "nrelaggs/plan.hpp"

namespace nrelaggs {

/// Number of base aggregates per aggregation layer (sum, mean, min, max).
inline constexpr std::size_t base_aggregate_count = 4;

struct NRelaggsConfig {
    double feature_generation_factor = 1.0;
    double feature_selection_factor = 1.0;
    std::vector<std::size_t> predictor_layers{50};
    std::size_t epochs = 100;
    std::size_t patience = 10;
    double tolerance = 1e-4;
    double learning_rate = 1e-3;
    /// 0 selects full-batch training when the batch fits `element_budget`,
    /// otherwise mini-batches of 32 instances.
    std::size_t batch_size = 0;
    std::size_t element_budget = std::size_t{1} << 24;
    /// Share of the training instances held out (stratified) for early stopping.
    double validation_fraction = 0.1;
    /// Aggregation layers stay at identity and are not trained (needs both factors at 1.0).
    bool freeze_aggregation = false;

    std::string to_json() const;
    static NRelaggsConfig from_json(std::string_view text);
    /// Short human-readable form, e.g. `g=0.5 s=1 pred=(100,50)`.
    std::string describe() const;

    friend bool operator==(const NRelaggsConfig&, const NRelaggsConfig&) = default;
};

/// l* = max(1, round(g l))
std::size_t generated_width(std::size_t input_width, double factor);
/// l̄ = max(1, round(s k l*))
std::size_t selected_width(std::size_t generated, double factor);

/// Composite aggregate: feature generation, the four segment reductions, and
/// feature selection.
template <typename T>
struct AggregationLayer {
    DenseLayer<T> feature_generation;  ///< l -> l*
    DenseLayer<T> feature_selection;   ///< k l* -> l̄
};

/// Which intermediate activation extract_features returns.
struct FeatureLayer {
    enum class Kind { pre_predictor, predictor_hidden };
    Kind kind = Kind::pre_predictor;
    std::size_t index = 0;

    /// Accepts `pre_predictor` and `predictor_hidden:<i>`. Throws UnknownLayer.
    static FeatureLayer parse(std::string_view text);
};

/// Aggregation layers for every aggregated table of the plan plus a predictor
/// MLP (ReLU hidden layers, one linear output unit).
template <typename T>
class BasicModel {
public:
    struct LayerTrace {
        Matrix<T> input;
        Matrix<T> generated;
        Matrix<T> aggregated;
        Matrix<T> output;
        SegmentIndex segments;
    };

    struct Trace {
        std::vector<std::optional<LayerTrace>> layers;  ///< by plan table
        std::vector<Matrix<T>> predictor_activations;   ///< input of every predictor layer, then its output
        std::vector<T> scores;
    };

    struct Gradients {
        std::vector<DenseGrad<T>> dense;  ///< aligned with dense_layers()
    };

    BasicModel() = default;

    /// Seeded Glorot initialisation. Throws WidthChainBroken.
    static BasicModel build(const AggregationPlan& plan, std::vector<std::size_t> encoded_widths,
                            const NRelaggsConfig& config, std::uint64_t seed);

    const AggregationPlan& plan() const noexcept { return plan_; }
    const std::vector<std::size_t>& encoded_widths() const noexcept { return encoded_widths_; }
    const std::vector<std::optional<AggregationLayer<T>>>& aggregation_layers() const noexcept { return layers_; }
    std::vector<std::optional<AggregationLayer<T>>>& aggregation_layers() noexcept { return layers_; }
    const std::vector<DenseLayer<T>>& predictor() const noexcept { return predictor_; }
    std::vector<DenseLayer<T>>& predictor() noexcept { return predictor_; }

    /// Width of the fully aggregated target representation for `table`.
    std::size_t augmented_width(std::size_t table) const;
    std::size_t pre_predictor_width() const { return augmented_width(0); }

    /// Sets every aggregation layer to the identity (requires l* = l and l̄ = k l*).
    void set_identity_aggregation();

    /// Throws WidthChainBroken when any layer's input width disagrees with
    /// the encoded width of its table plus its children's outputs.
    void validate_widths() const;

    Trace forward_trace(const BatchBundle& batch) const;
    std::vector<T> forward(const BatchBundle& batch) const { return forward_trace(batch).scores; }

    /// Gradient of a loss w.r.t. all parameters given dL/dscores.
    Gradients backward(const Trace& trace, const BatchBundle& batch, std::span<const T> grad_scores) const;

    Matrix<T> extract_features(const BatchBundle& batch, FeatureLayer layer) const;

    /// Every dense layer in a fixed order: per aggregated table (plan order)
    /// feature generation then feature selection, then the predictor.
    std::vector<DenseLayer<T>*> dense_layers();
    std::vector<const DenseLayer<T>*> dense_layers() const;
    /// Parameter tensors (weights, bias per dense layer) in dense_layers() order.
    std::vector<std::span<T>> parameters();
    std::size_t parameter_count() const;

    template <typename U>
    BasicModel<U> cast() const;

private:
    template <typename U>
    friend class BasicModel;

    AggregationPlan plan_;
    std::vector<std::size_t> encoded_widths_;
    std::vector<std::optional<AggregationLayer<T>>> layers_;
    std::vector<DenseLayer<T>> predictor_;
};

using Model = BasicModel<float>;

/// Same function as forward(), computed by spanning the generated features
/// with an explicit (m̄, n) membership mask and reducing the dense
/// (m̄, l*, n) tensor. Throws OversizeBatch when that tensor would exceed
/// `element_cap` elements.
template <typename T>
std::vector<T> forward_dense_oracle(const BasicModel<T>& model, const BatchBundle& batch,
                                    std::size_t element_cap = std::size_t{1} << 26);

struct Prediction {
    std::vector<int> labels;
    std::vector<float> scores;
};

/// label = +1 when score >= 0, else -1.
Prediction predict(const Model& model, const BatchBundle& batch);
int label_from_score(double score) noexcept;

}  // namespace nrelaggs
