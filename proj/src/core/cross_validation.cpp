#include "nrelaggs/cross_validation.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix(base);
    for (auto t : tags) h = splitmix(h ^ splitmix(t + 0x632be59bd9b4e019ULL));
    return h;
}

std::vector<std::size_t> CVSplit::test_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] == f) out.push_back(i);
    return out;
}

std::vector<std::size_t> CVSplit::train_indices(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] != f) out.push_back(i);
    return out;
}

std::vector<std::string> CVSplit::test_keys(std::size_t f) const {
    std::vector<std::string> out;
    for (auto i : test_indices(f)) out.push_back(keys[i]);
    return out;
}

std::vector<std::string> CVSplit::train_keys(std::size_t f) const {
    std::vector<std::string> out;
    for (auto i : train_indices(f)) out.push_back(keys[i]);
    return out;
}

CVSplit stratified_kfold(std::span<const std::string> keys, std::span<const int> labels, std::size_t k,
                         std::uint64_t seed, std::size_t repetition) {
    if (keys.size() != labels.size())
        fail(ErrorCode::length_mismatch, std::to_string(keys.size()) + " keys for " + std::to_string(labels.size()) +
                                             " labels");
    if (k < 2) fail(ErrorCode::too_few_instances, "k=" + std::to_string(k) + " leaves no test fold");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    CVSplit split;
    split.keys.assign(keys.begin(), keys.end());
    split.fold.assign(keys.size(), 0);
    split.repetition = repetition;
    split.seed = seed;

    std::size_t smallest = keys.size();
    for (const auto& [label, members] : by_class) smallest = std::min(smallest, members.size());
    if (smallest < 2)
        fail(ErrorCode::too_few_instances,
             "a class with " + std::to_string(smallest) + " member(s) cannot be stratified over two folds");
    if (smallest < k) {
        split.warning = "k lowered from " + std::to_string(k) + " to " + std::to_string(smallest) +
                        " (smallest class size)";
        k = smallest;
    }
    split.k = k;

    std::mt19937_64 rng(seed);
    std::size_t pointer = 0;
    for (auto& [label, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        for (auto i : members) {
            split.fold[i] = pointer;
            pointer = (pointer + 1) % k;
        }
    }
    return split;
}

}  // namespace nrelaggs
