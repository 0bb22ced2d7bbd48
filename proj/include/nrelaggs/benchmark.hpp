#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrelaggs/engine.hpp"

namespace nrelaggs {

inline constexpr const char* tool_version = "0.1.0";

struct Protocol {
    std::size_t folds = 10;
    std::size_t repeats = 2;
    std::size_t inner_folds = 3;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    NRelaggsConfig base;  ///< training settings shared by every grid entry
    std::optional<NRelaggsConfig> fixed;  ///< bypasses the grid search
};

struct GridResult {
    std::size_t best = 0;
    std::vector<double> mean_auroc;  ///< per grid entry; empty when the grid has one entry
};

/// Inner stratified `inner_folds`-fold CV over `train_keys` for every grid
/// entry; returns the entry with the highest mean AUROC, the first one on
/// ties. A single-entry grid is returned without any training.
GridResult grid_search(const RelationalDatabase& db, const AggregationPlan& plan, Engine engine,
                       std::span<const NRelaggsConfig> grid, std::span<const std::string> train_keys,
                       std::size_t inner_folds, std::uint64_t seed);

struct FoldReport {
    std::size_t repetition = 0;
    std::size_t fold = 0;
    std::uint64_t seed = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::size_t test_positives = 0;
    double accuracy = 0.0;
    double auroc = 0.0;
    std::optional<NRelaggsConfig> chosen;  ///< empty for the majority engine
    std::vector<double> inner_auroc;
    std::size_t best_epoch = 0;
    double seconds = 0.0;  ///< wall clock, kept out of the JSON report
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  ///< population form
    double min = 0.0;
    double max = 0.0;
};

Summary summarize(std::span<const double> values);

struct EvalReport {
    std::string dataset;
    Engine engine = Engine::majority;
    Protocol protocol;
    std::vector<NRelaggsConfig> grid;
    std::vector<std::string> split_warnings;
    std::vector<FoldReport> folds;
    Summary accuracy;
    Summary auroc;
    /// Share of the most frequent class over the whole target table.
    double majority_full_set_accuracy = 0.0;

    /// Deterministic JSON (no timings).
    std::string to_json() const;
    std::string timing_json() const;
    static std::string csv_header();
    std::string csv_row() const;
};

using ProgressFn = std::function<void(const FoldReport&)>;

/// `repeats` x `folds`-fold stratified outer CV. For each outer fold a grid
/// search picks the configuration, the engine is refitted on the whole outer
/// training part and scored on the test fold. Folds run on up to
/// `protocol.jobs` threads; results do not depend on the thread count.
EvalReport run_benchmark(const RelationalDatabase& db, const std::string& dataset, Engine engine,
                         const Protocol& protocol, const ProgressFn& progress = {});

/// Highest class share over the whole target table.
double majority_accuracy(const RelationalDatabase& db);

}  // namespace nrelaggs
