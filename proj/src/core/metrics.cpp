#include "nrelaggs/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size())
        fail(ErrorCode::length_mismatch,
             std::to_string(predicted.size()) + " predictions for " + std::to_string(truth.size()) + " labels");
    if (truth.empty()) fail(ErrorCode::invalid_argument, "accuracy of an empty set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        fail(ErrorCode::length_mismatch,
             std::to_string(scores.size()) + " scores for " + std::to_string(labels.size()) + " labels");
    std::uint64_t positives = 0, negatives = 0;
    for (int y : labels) {
        if (y == 1) ++positives;
        else if (y == -1) ++negatives;
        else fail(ErrorCode::label_domain, "labels must be -1 or +1");
    }
    if (positives == 0 || negatives == 0) fail(ErrorCode::single_class, "AUROC needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // 2 * wins + ties, accumulated per group of equal scores.
    std::uint64_t doubled = 0, negatives_below = 0;
    for (std::size_t begin = 0; begin < order.size();) {
        std::size_t end = begin;
        std::uint64_t pos = 0, neg = 0;
        while (end < order.size() && scores[order[end]] == scores[order[begin]]) {
            (labels[order[end]] == 1 ? pos : neg) += 1;
            ++end;
        }
        doubled += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        begin = end;
    }
    return static_cast<double>(doubled) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double auroc(std::span<const float> scores, std::span<const int> labels) {
    std::vector<double> wide(scores.begin(), scores.end());
    return auroc(std::span<const double>(wide), labels);
}

}  // namespace nrelaggs
