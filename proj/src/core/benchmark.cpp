#include "nrelaggs/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "nrelaggs/cross_validation.hpp"
#include "nrelaggs/csv.hpp"
#include "nrelaggs/errors.hpp"
#include "nrelaggs/metrics.hpp"

namespace nrelaggs {

using nlohmann::json;

namespace {

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

json summary_json(const Summary& s) {
    return {{"mean", s.mean}, {"std", s.stddev}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    double squares = 0.0;
    for (double v : values) squares += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(squares / static_cast<double>(values.size()));
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    // keep mean inside [min, max] despite rounding
    s.mean = std::clamp(s.mean, s.min, s.max);
    return s;
}

double majority_accuracy(const RelationalDatabase& db) {
    const auto counts = class_distribution(db);
    std::size_t total = 0, best = 0;
    for (const auto& [label, n] : counts) {
        total += n;
        best = std::max(best, n);
    }
    if (total == 0) fail(ErrorCode::empty_train_set, "target table is empty");
    return static_cast<double>(best) / static_cast<double>(total);
}

GridResult grid_search(const RelationalDatabase& db, const AggregationPlan& plan, Engine engine,
                       std::span<const NRelaggsConfig> grid, std::span<const std::string> train_keys,
                       std::size_t inner_folds, std::uint64_t seed) {
    if (grid.empty()) fail(ErrorCode::invalid_argument, "empty hyperparameter grid");
    GridResult result;
    if (grid.size() == 1) return result;

    const auto state = PreprocessorState::fit(db, plan, train_keys);
    const auto labels = instance_labels(db, state, train_keys);
    const auto split = stratified_kfold(train_keys, labels, inner_folds, derive_seed(seed, {0}));

    result.mean_auroc.assign(grid.size(), 0.0);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        double total = 0.0;
        for (std::size_t f = 0; f < split.k; ++f) {
            const auto fit_keys = split.train_keys(f);
            const auto test_keys = split.test_keys(f);
            const auto fitted = fit_engine(db, plan, engine, grid[c], fit_keys, derive_seed(seed, {1, c, f}));
            const auto scores = fitted.score(db, test_keys);
            std::vector<int> truth;
            for (auto i : split.test_indices(f)) truth.push_back(labels[i]);
            total += auroc(std::span<const float>(scores), truth);
        }
        result.mean_auroc[c] = total / static_cast<double>(split.k);
        if (result.mean_auroc[c] > result.mean_auroc[result.best]) result.best = c;
    }
    return result;
}

EvalReport run_benchmark(const RelationalDatabase& db, const std::string& dataset, Engine engine,
                         const Protocol& protocol, const ProgressFn& progress) {
    if (protocol.repeats == 0) fail(ErrorCode::invalid_argument, "repeats must be at least 1");
    EvalReport report;
    report.dataset = dataset;
    report.engine = engine;
    report.protocol = protocol;
    report.majority_full_set_accuracy = majority_accuracy(db);
    if (protocol.fixed && engine != Engine::majority) {
        NRelaggsConfig fixed = *protocol.fixed;
        if (engine == Engine::fix_nrelaggs) fixed.feature_generation_factor = fixed.feature_selection_factor = 1.0;
        report.grid = {fixed};
    } else {
        report.grid = config_grid(engine, protocol.base);
    }

    const auto plan = generate_aggregation_plan(db);
    const auto keys = db.instance_keys();
    const auto all_state = PreprocessorState::fit(db, plan, keys);
    const auto labels = instance_labels(db, all_state, keys);

    std::vector<CVSplit> splits;
    for (std::size_t r = 0; r < protocol.repeats; ++r) {
        splits.push_back(stratified_kfold(keys, labels, protocol.folds, derive_seed(protocol.seed, {r}), r));
        if (!splits.back().warning.empty())
            report.split_warnings.push_back("repetition " + std::to_string(r) + ": " + splits.back().warning);
    }
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t r = 0; r < splits.size(); ++r)
        for (std::size_t f = 0; f < splits[r].k; ++f) jobs.emplace_back(r, f);

    report.folds.resize(jobs.size());
    std::mutex progress_lock;
    parallel_for(jobs.size(), protocol.jobs, [&](std::size_t j) {
        const auto start = std::chrono::steady_clock::now();
        const auto [r, f] = jobs[j];
        const auto& split = splits[r];
        FoldReport fold;
        fold.repetition = r;
        fold.fold = f;
        fold.seed = derive_seed(protocol.seed, {r, f, 7});
        const auto train_keys = split.train_keys(f);
        const auto test_keys = split.test_keys(f);
        std::vector<int> truth;
        for (auto i : split.test_indices(f)) truth.push_back(labels[i]);
        fold.train_size = train_keys.size();
        fold.test_size = test_keys.size();
        fold.test_positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1));

        const auto search = grid_search(db, plan, engine, report.grid, train_keys, protocol.inner_folds,
                                        derive_seed(fold.seed, {0}));
        fold.inner_auroc = search.mean_auroc;
        const auto& chosen = report.grid[search.best];
        if (engine != Engine::majority) fold.chosen = chosen;
        const auto fitted = fit_engine(db, plan, engine, chosen, train_keys, derive_seed(fold.seed, {1}));
        fold.best_epoch = fitted.training.best_epoch;
        const auto scores = fitted.score(db, test_keys);
        std::vector<int> predicted;
        for (float s : scores) predicted.push_back(label_from_score(s));
        fold.accuracy = accuracy(predicted, truth);
        fold.auroc = auroc(std::span<const float>(scores), truth);
        fold.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.folds[j] = fold;
        if (progress) {
            std::lock_guard lock(progress_lock);
            progress(report.folds[j]);
        }
    });

    std::vector<double> acc, auc;
    for (const auto& fold : report.folds) {
        acc.push_back(fold.accuracy);
        auc.push_back(fold.auroc);
    }
    report.accuracy = summarize(acc);
    report.auroc = summarize(auc);
    return report;
}

std::string EvalReport::to_json() const {
    json doc;
    doc["tool_version"] = tool_version;
    doc["dataset"] = dataset;
    doc["engine"] = engine_name(engine);
    doc["protocol"] = {{"folds", protocol.folds},
                       {"repeats", protocol.repeats},
                       {"inner_folds", protocol.inner_folds},
                       {"seed", protocol.seed},
                       {"fixed_config", protocol.fixed.has_value()},
                       {"final_model", "refit on the full outer training part after selection"}};
    doc["grid"] = json::array();
    for (const auto& c : grid) doc["grid"].push_back(json::parse(c.to_json()));
    doc["split_warnings"] = split_warnings;
    doc["folds"] = json::array();
    for (const auto& f : folds) {
        json entry{{"repetition", f.repetition}, {"fold", f.fold},         {"seed", f.seed},
                   {"train_size", f.train_size}, {"test_size", f.test_size}, {"test_positives", f.test_positives},
                   {"accuracy", f.accuracy},     {"auroc", f.auroc},         {"best_epoch", f.best_epoch},
                   {"inner_auroc", f.inner_auroc}};
        entry["chosen_config"] = f.chosen ? json::parse(f.chosen->to_json()) : json(nullptr);
        doc["folds"].push_back(entry);
    }
    doc["summary"] = {{"accuracy", summary_json(accuracy)},
                      {"auroc", summary_json(auroc)},
                      {"majority_full_set_accuracy", majority_full_set_accuracy}};
    return doc.dump(2) + "\n";
}

std::string EvalReport::timing_json() const {
    json doc{{"dataset", dataset}, {"engine", engine_name(engine)}, {"fold_seconds", json::array()}};
    double total = 0.0;
    for (const auto& f : folds) {
        doc["fold_seconds"].push_back(f.seconds);
        total += f.seconds;
    }
    doc["total_fold_seconds"] = total;
    return doc.dump(2) + "\n";
}

std::string EvalReport::csv_header() {
    return "dataset,engine,folds,repeats,accuracy_mean,accuracy_std,auroc_mean,auroc_std,majority_full_set_accuracy";
}

std::string EvalReport::csv_row() const {
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, ",%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f", protocol.folds, protocol.repeats,
                  accuracy.mean, accuracy.stddev, auroc.mean, auroc.stddev, majority_full_set_accuracy);
    return csv::escape(dataset) + "," + std::string(engine_name(engine)) + buffer;
}

}  // namespace nrelaggs
