#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nrelaggs {

/// Fold assignment for one repetition of k-fold cross-validation.
struct CVSplit {
    std::vector<std::string> keys;
    std::vector<std::size_t> fold;  ///< aligned with keys
    std::size_t k = 0;
    std::size_t repetition = 0;
    std::uint64_t seed = 0;
    std::string warning;  ///< set when k had to be reduced

    /// Indices into `keys`, ascending.
    std::vector<std::size_t> test_indices(std::size_t f) const;
    std::vector<std::size_t> train_indices(std::size_t f) const;
    std::vector<std::string> test_keys(std::size_t f) const;
    std::vector<std::string> train_keys(std::size_t f) const;
};

/// Shuffles each class (classes in ascending label order) and deals its
/// members round-robin over the folds, the fold pointer carrying on from one
/// class to the next. Every fold then holds within one instance of its
/// proportional share of each class. When the smallest class has fewer
/// than k members k is lowered to that size and a warning is recorded.
/// Throws TooFewInstances when fewer than two folds are possible, and
/// LengthMismatch.
CVSplit stratified_kfold(std::span<const std::string> keys, std::span<const int> labels, std::size_t k,
                         std::uint64_t seed, std::size_t repetition = 0);

/// splitmix64 finalizer over a base seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

}  // namespace nrelaggs
