#include "nrelaggs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

namespace {

std::size_t batch_elements(std::span<const InstanceBundle> instances) {
    std::size_t total = 0;
    for (const auto& inst : instances)
        for (const auto& m : inst.x_data) total += m.size();
    return total;
}

struct Snapshot {
    std::vector<std::vector<float>> values;

    static Snapshot take(Model& model) {
        Snapshot s;
        for (auto p : model.parameters()) s.values.emplace_back(p.begin(), p.end());
        return s;
    }

    void restore(Model& model) const {
        auto params = model.parameters();
        for (std::size_t k = 0; k < params.size(); ++k) std::copy(values[k].begin(), values[k].end(), params[k].begin());
    }
};

}  // namespace

double evaluate_loss(const Model& model, const BatchBundle& batch) {
    const auto scores = model.forward(batch);
    return hinge_loss<float>(scores, batch.labels).loss;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> labels,
                                                                               double fraction, std::uint64_t seed) {
    std::vector<std::size_t> train, validation;
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    for (auto& [label, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        std::size_t take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        if (fraction > 0 && take == 0 && members.size() >= 2) take = 1;
        take = std::min(take, members.size() - 1);
        validation.insert(validation.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(validation.begin(), validation.end());
    return {train, validation};
}

TrainResult train(Model& model, std::span<const InstanceBundle> train_set, const BatchBundle& validation,
                  const NRelaggsConfig& config, std::uint64_t seed) {
    if (train_set.empty()) fail(ErrorCode::empty_train_set, "no training instances");
    const auto& plan = model.plan();
    const bool full_batch = config.batch_size == 0 ? batch_elements(train_set) <= config.element_budget
                                                   : config.batch_size >= train_set.size();
    const std::size_t batch_size = full_batch ? train_set.size() : (config.batch_size == 0 ? 32 : config.batch_size);

    // Tensors of frozen aggregation layers are left out of the optimizer.
    auto params = model.parameters();
    std::vector<bool> trainable(params.size(), true);
    if (config.freeze_aggregation) {
        std::size_t aggregation_tensors = 0;
        for (const auto& layer : model.aggregation_layers())
            if (layer) aggregation_tensors += 4;
        std::fill_n(trainable.begin(), aggregation_tensors, false);
    }

    AdamState<float> adam;
    adam.hyper.learning_rate = config.learning_rate;

    const BatchBundle full = collate(train_set, plan);
    const bool has_validation = validation.n > 0;
    auto monitor = [&] { return has_validation ? evaluate_loss(model, validation) : evaluate_loss(model, full); };

    TrainResult result;
    const double initial_train = evaluate_loss(model, full);
    const double initial_monitor = has_validation ? evaluate_loss(model, validation) : initial_train;
    result.history.push_back({0, initial_train, initial_monitor});
    result.best_validation_loss = initial_monitor;
    Snapshot best = Snapshot::take(model);
    std::size_t stale = 0;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (!full_batch) std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(order.size(), begin + batch_size);
            BatchBundle mini;
            if (!full_batch) {
                std::vector<InstanceBundle> members;
                for (std::size_t i = begin; i < end; ++i) members.push_back(train_set[order[i]]);
                mini = collate(members, plan);
            }
            const BatchBundle& batch = full_batch ? full : mini;
            const auto trace = model.forward_trace(batch);
            const auto loss = hinge_loss<float>(trace.scores, batch.labels);
            if (!std::isfinite(loss.loss))
                fail(ErrorCode::non_finite_loss, "loss " + std::to_string(loss.loss) + " at epoch " +
                                                     std::to_string(epoch) + ", batch starting at " +
                                                     std::to_string(begin) + " (config " + config.describe() + ")");
            epoch_loss += loss.loss * static_cast<double>(end - begin);
            const auto grads = model.backward(trace, batch, std::span<const float>(loss.grad));

            std::vector<std::span<float>> p;
            std::vector<std::span<const float>> g;
            for (std::size_t k = 0; k < params.size(); ++k) {
                if (!trainable[k]) continue;
                p.push_back(params[k]);
                const auto& dense = grads.dense[k / 2];
                g.push_back(k % 2 == 0 ? dense.weights.flat() : std::span<const float>(dense.bias));
            }
            adam_step<float>(adam, p, g);
        }
        epoch_loss /= static_cast<double>(order.size());
        const double current = monitor();
        if (!std::isfinite(current))
            fail(ErrorCode::non_finite_loss, "monitored loss is not finite at epoch " + std::to_string(epoch));
        result.history.push_back({epoch, epoch_loss, current});
        if (current < result.best_validation_loss - config.tolerance) {
            result.best_validation_loss = current;
            result.best_epoch = epoch;
            best = Snapshot::take(model);
            stale = 0;
        } else if (++stale >= config.patience) {
            result.stopped_early = true;
            break;
        }
    }
    best.restore(model);
    return result;
}

}  // namespace nrelaggs
