#include "nrelaggs/model.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

using nlohmann::json;

std::string NRelaggsConfig::to_json() const {
    json doc{{"feature_generation_factor", feature_generation_factor},
             {"feature_selection_factor", feature_selection_factor},
             {"predictor_layers", predictor_layers},
             {"epochs", epochs},
             {"patience", patience},
             {"tolerance", tolerance},
             {"learning_rate", learning_rate},
             {"batch_size", batch_size},
             {"element_budget", element_budget},
             {"validation_fraction", validation_fraction},
             {"freeze_aggregation", freeze_aggregation}};
    return doc.dump();
}

NRelaggsConfig NRelaggsConfig::from_json(std::string_view text) {
    NRelaggsConfig c;
    try {
        const json doc = json::parse(text);
        if (!doc.is_object()) fail(ErrorCode::invalid_argument, "config must be a JSON object");
        for (const auto& [key, value] : doc.items()) {
            if (key == "feature_generation_factor") c.feature_generation_factor = value.get<double>();
            else if (key == "feature_selection_factor") c.feature_selection_factor = value.get<double>();
            else if (key == "predictor_layers") c.predictor_layers = value.get<std::vector<std::size_t>>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "patience") c.patience = value.get<std::size_t>();
            else if (key == "tolerance") c.tolerance = value.get<double>();
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "element_budget") c.element_budget = value.get<std::size_t>();
            else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
            else if (key == "freeze_aggregation") c.freeze_aggregation = value.get<bool>();
            else fail(ErrorCode::invalid_argument, "unknown config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::invalid_argument, std::string("config: ") + e.what());
    }
    if (!(c.feature_generation_factor > 0) || !(c.feature_selection_factor > 0))
        fail(ErrorCode::invalid_argument, "width factors must be positive");
    if (c.validation_fraction < 0 || c.validation_fraction >= 1)
        fail(ErrorCode::invalid_argument, "validation_fraction must lie in [0, 1)");
    return c;
}

std::string NRelaggsConfig::describe() const {
    std::ostringstream out;
    out << "g=" << feature_generation_factor << " s=" << feature_selection_factor << " pred=(";
    for (std::size_t i = 0; i < predictor_layers.size(); ++i) out << (i ? "," : "") << predictor_layers[i];
    out << ")";
    return out.str();
}

std::size_t generated_width(std::size_t input_width, double factor) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(factor * static_cast<double>(input_width))));
}

std::size_t selected_width(std::size_t generated, double factor) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(factor * static_cast<double>(base_aggregate_count * generated))));
}

FeatureLayer FeatureLayer::parse(std::string_view text) {
    if (text == "pre_predictor") return {};
    constexpr std::string_view prefix = "predictor_hidden";
    if (text.starts_with(prefix)) {
        auto rest = text.substr(prefix.size());
        if (rest.empty()) return {Kind::predictor_hidden, 0};
        if (rest.front() == ':' || rest.front() == '(') {
            rest.remove_prefix(1);
            if (!rest.empty() && rest.back() == ')') rest.remove_suffix(1);
            std::size_t index = 0;
            auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), index);
            if (ec == std::errc{} && ptr == rest.data() + rest.size() && !rest.empty())
                return {Kind::predictor_hidden, index};
        }
    }
    fail(ErrorCode::unknown_layer, std::string(text));
}

int label_from_score(double score) noexcept { return score >= 0.0 ? 1 : -1; }

template <typename T>
BasicModel<T> BasicModel<T>::build(const AggregationPlan& plan, std::vector<std::size_t> encoded_widths,
                                   const NRelaggsConfig& config, std::uint64_t seed) {
    if (!plan.inverted) fail(ErrorCode::plan_mismatch, "model plans are kept in execution order");
    if (encoded_widths.size() != plan.table_count())
        fail(ErrorCode::width_chain_broken, "expected " + std::to_string(plan.table_count()) + " table widths, got " +
                                                std::to_string(encoded_widths.size()));
    BasicModel model;
    model.plan_ = plan;
    model.encoded_widths_ = std::move(encoded_widths);
    model.layers_.assign(plan.table_count(), std::nullopt);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> augmented = model.encoded_widths_;
    for (const auto& step : plan.steps) {
        for (auto child : step.nexts) {
            const std::size_t l = augmented[child];
            const std::size_t l_star = generated_width(l, config.feature_generation_factor);
            const std::size_t l_bar = selected_width(l_star, config.feature_selection_factor);
            AggregationLayer<T> layer{
                DenseLayer<T>::glorot(l, l_star, Activation::linear, rng),
                DenseLayer<T>::glorot(base_aggregate_count * l_star, l_bar, Activation::linear, rng)};
            model.layers_[child] = std::move(layer);
            augmented[step.current] += l_bar;
        }
    }
    std::size_t in = augmented[0];
    for (auto width : config.predictor_layers) {
        if (width == 0) fail(ErrorCode::invalid_argument, "predictor layers must have at least one unit");
        model.predictor_.push_back(DenseLayer<T>::glorot(in, width, Activation::relu, rng));
        in = width;
    }
    model.predictor_.push_back(DenseLayer<T>::glorot(in, 1, Activation::linear, rng));
    if (config.freeze_aggregation) model.set_identity_aggregation();
    model.validate_widths();
    return model;
}

template <typename T>
std::size_t BasicModel<T>::augmented_width(std::size_t table) const {
    std::size_t width = encoded_widths_.at(table);
    for (auto child : plan_.children(table))
        if (layers_[child]) width += layers_[child]->feature_selection.outputs();
    return width;
}

template <typename T>
void BasicModel<T>::set_identity_aggregation() {
    for (auto& layer : layers_) {
        if (!layer) continue;
        const auto l = layer->feature_generation.inputs();
        const auto l_star = layer->feature_generation.outputs();
        const auto l_bar = layer->feature_selection.outputs();
        if (l_star != l || l_bar != base_aggregate_count * l_star)
            fail(ErrorCode::invalid_argument, "identity aggregation needs both width factors at 1.0");
        layer->feature_generation = DenseLayer<T>::identity(l, l_star);
        layer->feature_selection = DenseLayer<T>::identity(base_aggregate_count * l_star, l_bar);
    }
}

template <typename T>
void BasicModel<T>::validate_widths() const {
    if (encoded_widths_.size() != plan_.table_count() || layers_.size() != plan_.table_count())
        fail(ErrorCode::width_chain_broken, "model and plan cover different tables");
    for (std::size_t t = 1; t < plan_.table_count(); ++t) {
        if (!layers_[t]) fail(ErrorCode::width_chain_broken, "table '" + plan_.table_names[t] + "' has no aggregation layer");
        const auto& layer = *layers_[t];
        const auto expected = augmented_width(t);
        if (layer.feature_generation.inputs() != expected)
            fail(ErrorCode::width_chain_broken, "aggregation layer of '" + plan_.table_names[t] + "' takes width " +
                                                    std::to_string(layer.feature_generation.inputs()) + ", chain gives " +
                                                    std::to_string(expected));
        if (layer.feature_selection.inputs() != base_aggregate_count * layer.feature_generation.outputs())
            fail(ErrorCode::width_chain_broken, "feature selection of '" + plan_.table_names[t] + "' has the wrong input width");
    }
    if (layers_[0]) fail(ErrorCode::width_chain_broken, "the target table is never aggregated");
    if (predictor_.empty() || predictor_.front().inputs() != pre_predictor_width())
        fail(ErrorCode::width_chain_broken, "predictor input width differs from the pre-predictor width");
    for (std::size_t i = 1; i < predictor_.size(); ++i)
        if (predictor_[i].inputs() != predictor_[i - 1].outputs())
            fail(ErrorCode::width_chain_broken, "predictor layers do not chain");
    if (predictor_.back().outputs() != 1) fail(ErrorCode::width_chain_broken, "predictor must end in a single unit");
}

namespace {

void check_batch(const AggregationPlan& plan, const std::vector<std::size_t>& widths, const BatchBundle& batch) {
    if (batch.table_count() != plan.table_count())
        fail(ErrorCode::plan_mismatch, "batch has " + std::to_string(batch.table_count()) + " tables, model expects " +
                                           std::to_string(plan.table_count()));
    for (std::size_t t = 0; t < plan.table_count(); ++t)
        if (batch.x_data[t].cols() != widths[t])
            fail(ErrorCode::plan_mismatch, "table '" + plan.table_names[t] + "' has width " +
                                               std::to_string(batch.x_data[t].cols()) + ", model expects " +
                                               std::to_string(widths[t]));
    if (batch.x_data[0].rows() != batch.n) fail(ErrorCode::plan_mismatch, "target block must hold one row per instance");
}

template <typename T>
Matrix<T> to_scalar(const MatrixF& m) {
    if constexpr (std::is_same_v<T, float>)
        return m;
    else
        return m.template cast<T>();
}

}  // namespace

template <typename T>
typename BasicModel<T>::Trace BasicModel<T>::forward_trace(const BatchBundle& batch) const {
    check_batch(plan_, encoded_widths_, batch);
    Trace trace;
    trace.layers.assign(plan_.table_count(), std::nullopt);
    std::vector<Matrix<T>> augmented(plan_.table_count());
    for (std::size_t t = 0; t < plan_.table_count(); ++t) augmented[t] = to_scalar<T>(batch.x_data[t]);

    for (const auto& step : plan_.steps) {
        std::vector<Matrix<T>> blocks;
        for (auto child : step.nexts) {
            const auto& layer = *layers_[child];
            LayerTrace lt;
            lt.segments = {batch.x_ids[child], batch.x_data[step.current].rows()};
            lt.input = std::move(augmented[child]);
            lt.generated = layer.feature_generation.forward(lt.input);
            const Matrix<T> sum = segment_aggregate(lt.generated, lt.segments, SegmentReduce::sum);
            const Matrix<T> mean = segment_aggregate(lt.generated, lt.segments, SegmentReduce::mean);
            const Matrix<T> lo = segment_aggregate(lt.generated, lt.segments, SegmentReduce::min);
            const Matrix<T> hi = segment_aggregate(lt.generated, lt.segments, SegmentReduce::max);
            const Matrix<T>* parts[] = {&sum, &mean, &lo, &hi};
            lt.aggregated = hconcat<T>(parts);
            lt.output = layer.feature_selection.forward(lt.aggregated);
            blocks.push_back(lt.output);
            trace.layers[child] = std::move(lt);
        }
        blocks.push_back(to_scalar<T>(batch.x_data[step.current]));
        std::vector<const Matrix<T>*> parts;
        for (const auto& b : blocks) parts.push_back(&b);
        augmented[step.current] = hconcat<T>(parts);
    }

    trace.predictor_activations.push_back(std::move(augmented[0]));
    for (const auto& layer : predictor_) trace.predictor_activations.push_back(layer.forward(trace.predictor_activations.back()));
    const auto& out = trace.predictor_activations.back();
    trace.scores.assign(out.flat().begin(), out.flat().end());
    return trace;
}

template <typename T>
typename BasicModel<T>::Gradients BasicModel<T>::backward(const Trace& trace, const BatchBundle& batch,
                                                          std::span<const T> grad_scores) const {
    if (grad_scores.size() != trace.scores.size()) fail(ErrorCode::shape_mismatch, "one gradient per score expected");
    Gradients grads;
    std::vector<std::size_t> dense_index(plan_.table_count(), 0);
    for (std::size_t t = 0; t < plan_.table_count(); ++t) {
        if (!layers_[t]) continue;
        dense_index[t] = grads.dense.size();
        grads.dense.push_back(layers_[t]->feature_generation.zero_grad());
        grads.dense.push_back(layers_[t]->feature_selection.zero_grad());
    }
    const std::size_t predictor_base = grads.dense.size();
    for (const auto& layer : predictor_) grads.dense.push_back(layer.zero_grad());

    Matrix<T> grad(grad_scores.size(), 1, std::vector<T>(grad_scores.begin(), grad_scores.end()));
    for (std::size_t i = predictor_.size(); i-- > 0;)
        grad = predictor_[i].backward(trace.predictor_activations[i], trace.predictor_activations[i + 1], grad,
                                      grads.dense[predictor_base + i], i > 0 || !plan_.steps.empty());

    std::vector<Matrix<T>> grad_augmented(plan_.table_count());
    grad_augmented[0] = std::move(grad);
    for (auto step = plan_.steps.rbegin(); step != plan_.steps.rend(); ++step) {
        std::vector<std::size_t> widths;
        for (auto child : step->nexts) widths.push_back(layers_[child]->feature_selection.outputs());
        widths.push_back(encoded_widths_[step->current]);
        auto pieces = hsplit(grad_augmented[step->current], std::span<const std::size_t>(widths));
        for (std::size_t i = 0; i < step->nexts.size(); ++i) {
            const auto child = step->nexts[i];
            const auto& layer = *layers_[child];
            const auto& lt = *trace.layers[child];
            const Matrix<T> grad_aggregated =
                layer.feature_selection.backward(lt.aggregated, lt.output, pieces[i], grads.dense[dense_index[child] + 1]);
            const std::size_t l_star = layer.feature_generation.outputs();
            const std::size_t split[] = {l_star, l_star, l_star, l_star};
            auto per_kind = hsplit(grad_aggregated, std::span<const std::size_t>(split));
            Matrix<T> grad_generated(lt.generated.rows(), l_star, T{0});
            constexpr SegmentReduce kinds[] = {SegmentReduce::sum, SegmentReduce::mean, SegmentReduce::min,
                                               SegmentReduce::max};
            for (std::size_t k = 0; k < base_aggregate_count; ++k) {
                const auto g = segment_aggregate_backward(per_kind[k], lt.generated, lt.segments, kinds[k]);
                auto dst = grad_generated.flat();
                const auto src = g.flat();
                for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
            }
            grad_augmented[child] = layer.feature_generation.backward(
                lt.input, lt.generated, grad_generated, grads.dense[dense_index[child]], !plan_.children(child).empty());
        }
    }
    (void)batch;
    return grads;
}

template <typename T>
Matrix<T> BasicModel<T>::extract_features(const BatchBundle& batch, FeatureLayer layer) const {
    const std::size_t hidden = predictor_.size() - 1;
    if (layer.kind == FeatureLayer::Kind::predictor_hidden && layer.index >= hidden)
        fail(ErrorCode::unknown_layer, "predictor_hidden:" + std::to_string(layer.index) + " (model has " +
                                           std::to_string(hidden) + " hidden layers)");
    auto trace = forward_trace(batch);
    return layer.kind == FeatureLayer::Kind::pre_predictor ? std::move(trace.predictor_activations[0])
                                                           : std::move(trace.predictor_activations[layer.index + 1]);
}

template <typename T>
std::vector<DenseLayer<T>*> BasicModel<T>::dense_layers() {
    std::vector<DenseLayer<T>*> out;
    for (auto& layer : layers_) {
        if (!layer) continue;
        out.push_back(&layer->feature_generation);
        out.push_back(&layer->feature_selection);
    }
    for (auto& layer : predictor_) out.push_back(&layer);
    return out;
}

template <typename T>
std::vector<const DenseLayer<T>*> BasicModel<T>::dense_layers() const {
    std::vector<const DenseLayer<T>*> out;
    for (auto* layer : const_cast<BasicModel*>(this)->dense_layers()) out.push_back(layer);
    return out;
}

template <typename T>
std::vector<std::span<T>> BasicModel<T>::parameters() {
    std::vector<std::span<T>> out;
    for (auto* layer : dense_layers()) {
        out.push_back(layer->weights.flat());
        out.push_back(layer->bias);
    }
    return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
    std::size_t count = 0;
    for (const auto* layer : dense_layers()) count += layer->weights.size() + layer->bias.size();
    return count;
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
    auto cast_dense = [](const DenseLayer<T>& layer) {
        DenseLayer<U> out{layer.weights.template cast<U>(), {}, layer.activation};
        for (auto b : layer.bias) out.bias.push_back(static_cast<U>(b));
        return out;
    };
    BasicModel<U> out;
    out.plan_ = plan_;
    out.encoded_widths_ = encoded_widths_;
    for (const auto& layer : layers_) {
        if (layer)
            out.layers_.push_back(AggregationLayer<U>{cast_dense(layer->feature_generation), cast_dense(layer->feature_selection)});
        else
            out.layers_.push_back(std::nullopt);
    }
    for (const auto& layer : predictor_) out.predictor_.push_back(cast_dense(layer));
    return out;
}

template <typename T>
std::vector<T> forward_dense_oracle(const BasicModel<T>& model, const BatchBundle& batch, std::size_t element_cap) {
    const auto& plan = model.plan();
    check_batch(plan, model.encoded_widths(), batch);
    std::vector<Matrix<T>> augmented(plan.table_count());
    for (std::size_t t = 0; t < plan.table_count(); ++t) augmented[t] = to_scalar<T>(batch.x_data[t]);

    for (const auto& step : plan.steps) {
        const std::size_t n = batch.x_data[step.current].rows();
        std::vector<Matrix<T>> blocks;
        for (auto child : step.nexts) {
            const auto& layer = *model.aggregation_layers()[child];
            const Matrix<T> generated = layer.feature_generation.forward(augmented[child]);
            const std::size_t m = generated.rows(), l = generated.cols();
            if (m * l * n > element_cap)
                fail(ErrorCode::oversize_batch, std::to_string(m) + " x " + std::to_string(l) + " x " +
                                                    std::to_string(n) + " exceeds the dense element cap");
            // Membership mask M (m, n) and the spanned tensor X* x M of shape (m, l, n).
            Matrix<T> mask(m, n, T{0});
            for (std::size_t r = 0; r < m; ++r) {
                if (batch.x_ids[child][r] >= n) fail(ErrorCode::bad_segment_index, "segment id out of range");
                mask(r, batch.x_ids[child][r]) = T{1};
            }
            std::vector<T> spanned(m * l * n);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < l; ++c)
                    for (std::size_t i = 0; i < n; ++i) spanned[(r * l + c) * n + i] = generated(r, c) * mask(r, i);

            // Reduce over the first axis and transpose (l, n) -> (n, l).
            Matrix<T> sum(n, l, T{0}), mean(n, l, T{0}), lo(n, l, T{0}), hi(n, l, T{0});
            for (std::size_t i = 0; i < n; ++i) {
                T members{0};
                for (std::size_t r = 0; r < m; ++r) members += mask(r, i);
                for (std::size_t c = 0; c < l; ++c) {
                    T total{0};
                    bool any = false;
                    T min_v{0}, max_v{0};
                    for (std::size_t r = 0; r < m; ++r) {
                        const T v = spanned[(r * l + c) * n + i];
                        total += v;
                        if (mask(r, i) == T{0}) continue;
                        min_v = any ? std::min(min_v, v) : v;
                        max_v = any ? std::max(max_v, v) : v;
                        any = true;
                    }
                    sum(i, c) = total;
                    mean(i, c) = members > T{0} ? total / members : T{0};
                    lo(i, c) = min_v;
                    hi(i, c) = max_v;
                }
            }
            const Matrix<T>* parts[] = {&sum, &mean, &lo, &hi};
            blocks.push_back(layer.feature_selection.forward(hconcat<T>(parts)));
        }
        blocks.push_back(to_scalar<T>(batch.x_data[step.current]));
        std::vector<const Matrix<T>*> parts;
        for (const auto& b : blocks) parts.push_back(&b);
        augmented[step.current] = hconcat<T>(parts);
    }
    Matrix<T> x = std::move(augmented[0]);
    for (const auto& layer : model.predictor()) x = layer.forward(x);
    return {x.flat().begin(), x.flat().end()};
}

Prediction predict(const Model& model, const BatchBundle& batch) {
    Prediction out;
    out.scores = model.forward(batch);
    for (auto s : out.scores) out.labels.push_back(label_from_score(s));
    return out;
}

template class BasicModel<float>;
template class BasicModel<double>;
template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;
template BasicModel<float> BasicModel<float>::cast<float>() const;
template std::vector<float> forward_dense_oracle(const BasicModel<float>&, const BatchBundle&, std::size_t);
template std::vector<double> forward_dense_oracle(const BasicModel<double>&, const BatchBundle&, std::size_t);

}  // namespace nrelaggs
