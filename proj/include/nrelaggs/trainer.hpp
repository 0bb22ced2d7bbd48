#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nrelaggs/bundle.hpp"
#include "nrelaggs/model.hpp"

namespace nrelaggs {

struct EpochRecord {
    std::size_t epoch = 0;  ///< 0 is the untrained model
    double train_loss = 0.0;
    double validation_loss = 0.0;  ///< equals train_loss when no validation batch was given
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_validation_loss = 0.0;
    bool stopped_early = false;
};

/// Trains with hinge loss and Adam. Full batch when the training rows fit the
/// configured element budget, otherwise shuffled mini-batches. Early stopping
/// watches the validation loss (the training loss when `validation` is empty)
/// and the parameters of the best epoch are restored. Throws NonFiniteLoss.
TrainResult train(Model& model, std::span<const InstanceBundle> train_set, const BatchBundle& validation,
                  const NRelaggsConfig& config, std::uint64_t seed);

/// Mean hinge loss of the model on a batch.
double evaluate_loss(const Model& model, const BatchBundle& batch);

/// Stratified split of `instances` into (train, validation) index lists, the
/// validation part holding round(fraction * n) instances (at least one per
/// class when fraction > 0 and the class has two or more members).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const int> labels,
                                                                               double fraction, std::uint64_t seed);

}  // namespace nrelaggs
