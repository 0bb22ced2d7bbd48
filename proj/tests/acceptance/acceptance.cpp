// Acceptance runner. Prints one line per criterion:
//   criterion <n>: PASS|FAIL|BLOCKED  <detail>
// Exit status: 0 all selected criteria passed, 1 any failed, 77 none failed
// but some were blocked by missing data.
#include <nrelaggs/nrelaggs.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nrelaggs/benchmark.hpp"
#include "nrelaggs/checkpoint.hpp"
#include "nrelaggs/cross_validation.hpp"
#include "nrelaggs/csv.hpp"
#include "nrelaggs/engine.hpp"
#include "nrelaggs/metrics.hpp"
#include "nrelaggs/model.hpp"
#include "nrelaggs/relaggs.hpp"
#include "nrelaggs/trainer.hpp"

namespace fs = std::filesystem;
using namespace nrelaggs;

namespace {

enum class Verdict { pass, fail, blocked };

struct Outcome {
    Verdict verdict = Verdict::pass;
    std::string detail;
};

std::string fixed(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

fs::path source_dir() { return NRELAGGS_SOURCE_DIR; }

// NRELAGGS_DATA/<name> first, then the bundled data directory.
std::optional<fs::path> find_dataset(const std::string& name) {
    if (const char* extra = std::getenv("NRELAGGS_DATA")) {
        const fs::path p = fs::path(extra) / name;
        if (fs::exists(p / "schema.json")) return p;
    }
    const fs::path p = source_dir() / "data" / name;
    if (fs::exists(p / "schema.json")) return p;
    return std::nullopt;
}

RelationalDatabase load(const fs::path& dir) { return RelationalDatabase::load(dir / "schema.json", dir); }

fs::path scratch_dir() {
    const fs::path p = fs::path(ACCEPTANCE_SCRATCH_DIR);
    fs::create_directories(p);
    return p;
}

std::size_t jobs() {
    if (const char* j = std::getenv("NRELAGGS_JOBS")) return std::max<long>(1, std::atol(j));
    return std::max(1u, std::thread::hardware_concurrency());
}

// Collects per-part results into one verdict: any failure fails, otherwise
// a missing dataset blocks.
struct Parts {
    std::vector<std::string> notes;
    bool failed = false;
    bool blocked = false;

    void add(bool ok, const std::string& note) {
        failed |= !ok;
        notes.push_back(note + (ok ? "" : " [fail]"));
    }
    void missing(const std::string& name) {
        blocked = true;
        notes.push_back(name + " data unavailable");
    }
    Outcome outcome() const {
        std::string joined;
        for (const auto& n : notes) joined += (joined.empty() ? "" : "; ") + n;
        return {failed ? Verdict::fail : blocked ? Verdict::blocked : Verdict::pass, joined};
    }
};

struct Prepared {
    AggregationPlan plan;
    PreprocessorState state;
    std::vector<InstanceBundle> instances;
    std::vector<std::size_t> widths;
};

Prepared prepare(const RelationalDatabase& db) {
    Prepared p;
    const auto keys = db.instance_keys();
    p.plan = generate_aggregation_plan(db);
    p.state = PreprocessorState::fit(db, p.plan, keys);
    p.instances = build_instances(db, p.state, p.plan, keys);
    for (std::size_t t = 0; t < p.plan.table_count(); ++t) p.widths.push_back(p.state.width(t));
    return p;
}

// ---------------------------------------------------------------- 1

Outcome majority_baselines() {
    struct Expected {
        const char* name;
        const char* label;
        double value;
    };
    const Expected expected[] = {{"trains", "Trains", 0.50},
                                 {"mutagenesis188", "Mutagenesis-188", 125.0 / 188.0},
                                 {"mutagenesis42", "Mutagenesis-42", 29.0 / 42.0},
                                 {"carcinogenesis", "Carcinogenesis", 182.0 / 329.0}};
    Parts parts;
    for (const auto& e : expected) {
        const auto dir = find_dataset(e.name);
        if (!dir) {
            parts.missing(e.label);
            continue;
        }
        const double got = majority_accuracy(load(*dir));
        parts.add(std::abs(got - e.value) <= 0.001, std::string(e.label) + " " + fixed(got));
    }
    return parts.outcome();
}

// ---------------------------------------------------------------- 2

Outcome plan_golden() {
    Parts parts;
    const auto movielens = source_dir() / "tests" / "fixtures" / "movielens";
    const std::string want_movielens =
        "[([actors], movies2actors), ([directors], movies2directors), ([movies2actors, movies2directors], movies), "
        "([movies], u2base), ([u2base], users)]";
    const auto got_movielens = generate_aggregation_plan(load(movielens)).describe();
    parts.add(got_movielens == want_movielens, "MovieLens " + got_movielens);
    const auto got_trains = generate_aggregation_plan(load(*find_dataset("trains"))).describe();
    parts.add(got_trains == "[([cars], trains)]", "Trains " + got_trains);
    return parts.outcome();
}

// ---------------------------------------------------------------- random relational data

ColumnSpec column(std::string name, ColumnKind kind, std::string references = {}) {
    ColumnSpec c;
    c.name = std::move(name);
    c.kind = kind;
    c.references = std::move(references);
    return c;
}

// Target t with children a (which has child b) and d; continuous values so
// min and max are tie free.
RelationalDatabase random_database(std::uint64_t seed, std::size_t instances, std::size_t max_children,
                                   bool categorical) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> value(0.0, 2.0);
    std::uniform_int_distribution<std::size_t> count(0, max_children);
    const char* colours[] = {"red", "green", "blue"};
    std::uniform_int_distribution<int> pick(0, 2);

    SchemaDescriptor schema;
    schema.tables.push_back({"t", "t.csv", {column("id", ColumnKind::key), column("label", ColumnKind::categorical),
                                            column("x", ColumnKind::numeric)}});
    schema.tables.push_back({"a", "a.csv", {column("id", ColumnKind::key), column("t_id", ColumnKind::foreign_key, "t"),
                                            column("u", ColumnKind::numeric), column("u2", ColumnKind::numeric)}});
    schema.tables.push_back({"b", "b.csv", {column("id", ColumnKind::key), column("a_id", ColumnKind::foreign_key, "a"),
                                            column("v", ColumnKind::numeric)}});
    schema.tables.push_back({"d", "d.csv", {column("id", ColumnKind::key), column("t_id", ColumnKind::foreign_key, "t"),
                                            column("w", ColumnKind::numeric)}});
    if (categorical) {
        schema.tables[1].columns.push_back(column("c", ColumnKind::categorical));
        schema.tables[3].columns.push_back(column("k", ColumnKind::categorical));
    }
    schema.target_table = "t";
    schema.target_attribute = "label";

    auto num = [&] { return std::to_string(value(rng)); };
    std::vector<std::vector<Row>> rows(4);
    std::size_t a_id = 0, b_id = 0, d_id = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::string tid = "t" + std::to_string(i);
        rows[0].push_back({tid, i % 2 ? "pos" : "neg", num()});
        for (std::size_t j = count(rng); j > 0; --j) {
            const std::string aid = "a" + std::to_string(a_id++);
            Row r{aid, tid, num(), num()};
            if (categorical) r.push_back(colours[pick(rng)]);
            rows[1].push_back(r);
            for (std::size_t k = count(rng); k > 0; --k) rows[2].push_back({"b" + std::to_string(b_id++), aid, num()});
        }
        for (std::size_t j = count(rng); j > 0; --j) {
            Row r{"d" + std::to_string(d_id++), tid, num()};
            if (categorical) r.push_back(colours[pick(rng)]);
            rows[3].push_back(r);
        }
    }
    return RelationalDatabase::from_rows(std::move(schema), std::move(rows));
}

NRelaggsConfig config_of(double g, double s, std::vector<std::size_t> predictor) {
    NRelaggsConfig c;
    c.feature_generation_factor = g;
    c.feature_selection_factor = s;
    c.predictor_layers = std::move(predictor);
    return c;
}

// ---------------------------------------------------------------- 3

Outcome oracle_equivalence() {
    const double factors[] = {0.5, 0.75, 1.0};
    const std::vector<std::vector<std::size_t>> shapes{{50}, {100}, {100, 50}};
    std::mt19937_64 rng(2024);
    double worst = 0;
    std::size_t max_rows = 0, seeds = 0;
    for (std::uint64_t seed = 0; seed < 128; ++seed) {
        const auto db = random_database(seed, 4 + seed % 5, 3, seed % 2 == 0);
        const auto p = prepare(db);
        const double g = factors[rng() % 3];
        const double s = factors[rng() % 3];
        const auto model = Model::build(p.plan, p.widths, config_of(g, s, shapes[rng() % 3]), seed);
        const auto batch = collate(p.instances, p.plan);
        for (const auto& m : batch.x_data) max_rows = std::max(max_rows, m.rows());
        const auto a = model.forward(batch);
        const auto b = forward_dense_oracle(model, batch);
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
        ++seeds;
    }
    const bool ok = worst <= 1e-5 && max_rows <= 50 && seeds >= 100;
    return {ok ? Verdict::pass : Verdict::fail, std::to_string(seeds) + " seeds, largest table batch " +
                                                    std::to_string(max_rows) + " rows, max |diff| " +
                                                    [&] { std::ostringstream os; os << worst; return os.str(); }()};
}

// ---------------------------------------------------------------- 4

using MatD = Matrix<double>;

MatD random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    MatD m(r, c);
    for (auto& v : m.flat()) v = d(rng);
    return m;
}

double dot(const MatD& a, const MatD& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.flat().size(); ++i) s += a.flat()[i] * b.flat()[i];
    return s;
}

double relative_error(double a, double n, double floor) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); }

struct Worst {
    double error = 0, analytic = 0, numeric = 0;
};

double check_gradient(std::span<double> x, std::span<const double> analytic, const std::function<double()>& loss,
                      double h, Worst* track = nullptr, double floor = 1e-7) {
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss();
        x[i] = keep - h;
        const double down = loss();
        x[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double e = relative_error(analytic[i], numeric, floor);
        worst = std::max(worst, e);
        if (track && e > track->error) *track = {e, analytic[i], numeric};
    }
    return worst;
}

Outcome gradient_suite() {
    std::mt19937_64 rng(17);
    double primitive = 0;
    std::size_t primitive_checks = 0;

    // dense layers, random upstream gradient as the loss weights
    for (int trial = 0; trial < 20; ++trial) {
        for (auto act : {Activation::linear, Activation::relu}) {
            auto layer = DenseLayer<double>::glorot(4, 3, act, rng);
            for (auto& b : layer.bias) b = std::normal_distribution<double>(0, 0.5)(rng);
            auto x = random_matrix(5, 4, rng);
            const auto w = random_matrix(5, 3, rng);
            auto loss = [&] { return dot(layer.forward(x), w); };
            auto grad = layer.zero_grad();
            const auto gx = layer.backward(x, layer.forward(x), w, grad);
            primitive = std::max(primitive, check_gradient(x.flat(), gx.flat(), loss, 1e-6));
            primitive = std::max(primitive, check_gradient(layer.weights.flat(), grad.weights.flat(), loss, 1e-6));
            primitive = std::max(primitive, check_gradient(layer.bias, grad.bias, loss, 1e-6));
            primitive_checks += 3;
        }
    }
    // segment reductions on continuous (tie free) inputs
    for (int trial = 0; trial < 20; ++trial) {
        SegmentIndex seg;
        seg.n_segments = 4;
        for (std::uint32_t s = 0; s < 4; ++s)
            for (std::size_t k = rng() % 4; k > 0; --k) seg.ids.push_back(s);
        auto x = random_matrix(seg.ids.size(), 3, rng);
        const auto w = random_matrix(4, 3, rng);
        for (auto kind : {SegmentReduce::sum, SegmentReduce::mean, SegmentReduce::min, SegmentReduce::max}) {
            auto loss = [&] { return dot(segment_aggregate(x, seg, kind), w); };
            const auto g = segment_aggregate_backward(w, x, seg, kind);
            primitive = std::max(primitive, check_gradient(x.flat(), g.flat(), loss, 1e-6));
            ++primitive_checks;
        }
    }
    // hinge loss away from its kink
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(8);
        std::vector<int> labels(8);
        for (std::size_t i = 0; i < 8; ++i) {
            labels[i] = i % 2 ? 1 : -1;
            do scores[i] = std::normal_distribution<double>(0, 2)(rng);
            while (std::abs(1 - labels[i] * scores[i]) < 1e-3);
        }
        auto loss = [&] { return hinge_loss<double>(scores, labels).loss; };
        const auto r = hinge_loss<double>(scores, labels);
        primitive = std::max(primitive, check_gradient(scores, r.grad, loss, 1e-6));
        ++primitive_checks;
    }

    // whole model in a 64-bit shadow copy
    const double factors[] = {0.5, 0.75, 1.0};
    double end_to_end = 0;
    Worst worst_entry;
    std::size_t models = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = prepare(random_database(500 + seed, 5, 3, false));
        const double g = factors[rng() % 3];
        const double s = factors[rng() % 3];
        auto model = Model::build(p.plan, p.widths, config_of(g, s, {5, 3}), seed).cast<double>();
        std::uniform_real_distribution<double> jitter(-0.1, 0.1);
        for (auto* layer : model.dense_layers())
            for (auto& b : layer->bias) b = jitter(rng);
        const auto batch = collate(p.instances, p.plan);
        const auto trace = model.forward_trace(batch);
        bool near_kink = false;
        for (std::size_t i = 0; i < trace.scores.size(); ++i)
            near_kink |= std::abs(1 - batch.labels[i] * trace.scores[i]) < 1e-3;
        if (near_kink) continue;
        const auto hinge = hinge_loss<double>(trace.scores, batch.labels);
        const auto grads = model.backward(trace, batch, std::span<const double>(hinge.grad));
        auto params = model.parameters();
        auto loss = [&] { return hinge_loss<double>(model.forward(batch), batch.labels).loss; };
        for (std::size_t k = 0; k < params.size(); ++k) {
            const auto& d = grads.dense[k / 2];
            const std::span<const double> analytic = k % 2 == 0 ? d.weights.flat() : std::span<const double>(d.bias);
            end_to_end = std::max(end_to_end, check_gradient(params[k], analytic, loss, 1e-6, &worst_entry, 1e-6));
        }
        ++models;
    }
    const bool ok = primitive <= 1e-4 && end_to_end <= 1e-3 && models >= 10;
    std::ostringstream os;
    os << primitive_checks << " primitive checks, worst rel err " << primitive << "; " << models
       << " models end to end, worst rel err " << end_to_end << " (analytic " << worst_entry.analytic << ", numeric "
       << worst_entry.numeric << ")";
    return {ok ? Verdict::pass : Verdict::fail, os.str()};
}

// ---------------------------------------------------------------- 5

std::vector<std::string> identity_model_labels(const AggregationPlan& plan, const PreprocessorState& state) {
    std::vector<std::vector<std::string>> raw(plan.table_count());
    for (std::size_t t = 0; t < plan.table_count(); ++t)
        for (const auto& name : state.tables()[t].feature_names()) raw[t].push_back(plan.table_names[t] + ":" + name);
    auto augmented = raw;
    static constexpr const char* names[] = {"sum", "avg", "min", "max"};
    for (const auto& step : plan.steps) {
        std::vector<std::string> block;
        for (auto child : step.nexts)
            for (const char* fn : names)
                for (const auto& inner : augmented[child]) block.push_back(std::string(fn) + "(" + inner + ")");
        block.insert(block.end(), raw[step.current].begin(), raw[step.current].end());
        augmented[step.current] = block;
    }
    return augmented[0];
}

// Number of mismatching bits patterns, columns compared.
std::pair<std::size_t, std::size_t> recreation_mismatches(const RelationalDatabase& db) {
    const auto p = prepare(db);
    auto model = Model::build(p.plan, p.widths, config_of(1.0, 1.0, {50}), 0);
    model.set_identity_aggregation();
    const auto batch = collate(p.instances, p.plan);
    const auto features = model.extract_features(batch, FeatureLayer{});
    const auto relaggs = relaggs_propositionalize(batch, p.plan);
    std::vector<std::vector<std::string>> names;
    for (const auto& t : p.state.tables()) names.push_back(t.feature_names());
    const auto relaggs_labels = relaggs_column_labels(p.plan, names);
    std::map<std::string, std::size_t> where;
    for (std::size_t c = 0; c < relaggs_labels.size(); ++c) where[relaggs_labels[c]] = c;
    const auto labels = identity_model_labels(p.plan, p.state);
    if (labels.size() != features.cols()) return {features.rows() * features.cols() + 1, 0};
    std::size_t mismatches = 0;
    for (std::size_t c = 0; c < labels.size(); ++c) {
        const auto it = where.find(labels[c]);
        if (it == where.end()) {
            mismatches += features.rows();
            continue;
        }
        for (std::size_t r = 0; r < features.rows(); ++r)
            mismatches +=
                std::bit_cast<std::uint32_t>(features(r, c)) != std::bit_cast<std::uint32_t>(relaggs(r, it->second));
    }
    return {mismatches, labels.size()};
}

Outcome base_aggregate_recreation() {
    Parts parts;
    for (const auto& [name, label] : std::vector<std::pair<std::string, std::string>>{
             {"trains", "Trains"}, {"mutagenesis42", "Mutagenesis-42"}, {"mutagenesis188", "Mutagenesis-188 (extra)"}}) {
        const auto dir = find_dataset(name);
        if (!dir) {
            parts.missing(label);
            continue;
        }
        const auto [bad, cols] = recreation_mismatches(load(*dir));
        parts.add(bad == 0, label + " " + std::to_string(cols) + " columns, " + std::to_string(bad) + " mismatches");
    }
    return parts.outcome();
}

// ---------------------------------------------------------------- 6

Outcome capacity() {
    const auto db = load(*find_dataset("trains"));
    const auto p = prepare(db);
    const auto batch = collate(p.instances, p.plan);
    NRelaggsConfig base;
    base.epochs = 100;
    const auto grid = config_grid(Engine::nrelaggs, base);
    std::size_t perfect = 0;
    std::string first;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto model = Model::build(p.plan, p.widths, grid[i], i);
        train(model, p.instances, BatchBundle{}, grid[i], derive_seed(0, {i}));
        const auto pred = predict(model, batch);
        if (accuracy(pred.labels, batch.labels) == 1.0) {
            if (perfect++ == 0) first = grid[i].describe();
        }
    }
    return {perfect > 0 ? Verdict::pass : Verdict::fail,
            std::to_string(perfect) + "/" + std::to_string(grid.size()) +
                " grid configs reach training accuracy 1.0 within 100 epochs" +
                (first.empty() ? "" : " (first: " + first + ")")};
}

// ---------------------------------------------------------------- 7

EvalReport benchmark(const RelationalDatabase& db, const std::string& dataset, Engine engine) {
    Protocol protocol;
    protocol.folds = 10;
    protocol.repeats = 2;
    protocol.seed = 0;
    protocol.jobs = jobs();
    const auto start = std::chrono::steady_clock::now();
    auto report = run_benchmark(db, dataset, engine, protocol, [&](const FoldReport& f) {
        std::cerr << "  " << dataset << " " << engine_name(engine) << " rep " << f.repetition << " fold " << f.fold
                  << " acc " << fixed(f.accuracy) << " auroc " << fixed(f.auroc) << "\n";
    });
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60;
    std::cerr << "  " << dataset << " " << engine_name(engine) << " done in " << fixed(minutes, 1) << " min\n";
    const auto out = scratch_dir() / "benchmark";
    fs::create_directories(out);
    std::ofstream(out / (dataset + "_" + std::string(engine_name(engine)) + ".json")) << report.to_json();
    return report;
}

Outcome benchmark_bands() {
    Parts parts;
    const auto mutag = find_dataset("mutagenesis188");
    if (!mutag) {
        parts.missing("Mutagenesis-188");
    } else {
        const auto db = load(*mutag);
        const auto rel = benchmark(db, "mutagenesis188", Engine::relaggs);
        parts.add(rel.accuracy.mean >= 0.75, "Mutagenesis-188 relaggs acc " + fixed(rel.accuracy.mean) + " auroc " +
                                                 fixed(rel.auroc.mean));
        for (auto engine : {Engine::nrelaggs, Engine::fix_nrelaggs}) {
            const auto r = benchmark(db, "mutagenesis188", engine);
            parts.add(r.accuracy.mean >= 0.78 && r.auroc.mean >= 0.88,
                      "Mutagenesis-188 " + std::string(engine_name(engine)) + " acc " + fixed(r.accuracy.mean) +
                          " auroc " + fixed(r.auroc.mean));
        }
    }
    const auto trains = load(*find_dataset("trains"));
    std::string line = "Trains";
    bool ok = true;
    for (auto engine : {Engine::relaggs, Engine::nrelaggs, Engine::fix_nrelaggs, Engine::majority}) {
        const auto r = benchmark(trains, "trains", engine);
        ok &= r.accuracy.mean >= 0.5;
        line += " " + std::string(engine_name(engine)) + " " + fixed(r.accuracy.mean);
    }
    parts.add(ok, line);
    return parts.outcome();
}

// ---------------------------------------------------------------- 8

bool stratified(const CVSplit& split, std::span<const int> labels) {
    std::vector<int> seen(labels.size(), 0);
    for (std::size_t f = 0; f < split.k; ++f) {
        const auto test = split.test_indices(f);
        for (auto i : test) ++seen[i];
        for (int cls : {-1, 1}) {
            const double total = static_cast<double>(std::count(labels.begin(), labels.end(), cls));
            double in_fold = 0;
            for (auto i : test) in_fold += labels[i] == cls;
            if (std::abs(in_fold - total / static_cast<double>(split.k)) >= 1.0) return false;
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

Outcome metric_oracles() {
    std::mt19937_64 rng(8);
    std::size_t exact = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 40;
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial % 2 ? double(rng() % 6) : std::normal_distribution<double>(0, 1)(rng);
            y[i] = rng() % 2 ? 1 : -1;
        }
        y[0] = 1;
        y[1] = -1;
        std::uint64_t twice_wins = 0, pos = 0, neg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            (y[i] == 1 ? pos : neg) += 1;
            for (std::size_t j = 0; j < n; ++j)
                if (y[i] == 1 && y[j] == -1) twice_wins += s[i] > s[j] ? 2 : s[i] == s[j] ? 1 : 0;
        }
        const double brute = static_cast<double>(twice_wins) / static_cast<double>(2 * pos * neg);
        exact += auroc(s, y) == brute;
    }

    std::size_t splits = 0, good = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 4 + rng() % 80;
        std::vector<std::string> keys;
        std::vector<int> labels;
        for (std::size_t i = 0; i < n; ++i) {
            keys.push_back(std::to_string(i));
            labels.push_back(i < 2 ? 1 : i < 4 ? -1 : (rng() % 3 ? 1 : -1));
        }
        const auto split = stratified_kfold(keys, labels, 2 + rng() % 9, rng());
        ++splits;
        good += stratified(split, labels);
    }
    for (const char* name : {"trains", "mutagenesis188"}) {
        const auto db = load(*find_dataset(name));
        const auto keys = db.instance_keys();
        const auto labels = instance_labels(db, PreprocessorState::fit(db, keys), keys);
        for (std::size_t r = 0; r < 2; ++r) {
            const auto split = stratified_kfold(keys, labels, 10, derive_seed(0, {r}), r);
            ++splits;
            good += stratified(split, labels);
        }
    }
    const bool ok = exact == 1000 && good == splits;
    return {ok ? Verdict::pass : Verdict::fail, "auroc exact on " + std::to_string(exact) + "/1000 vectors; " +
                                                    std::to_string(good) + "/" + std::to_string(splits) +
                                                    " splits stratified"};
}

// ---------------------------------------------------------------- 9

// L2-regularised logistic regression on standardized columns, batch gradient descent.
class LogisticRegression {
public:
    void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
        const std::size_t d = x.front().size();
        mean_.assign(d, 0.0);
        scale_.assign(d, 0.0);
        for (const auto& r : x)
            for (std::size_t j = 0; j < d; ++j) mean_[j] += r[j] / double(x.size());
        for (const auto& r : x)
            for (std::size_t j = 0; j < d; ++j) scale_[j] += (r[j] - mean_[j]) * (r[j] - mean_[j]) / double(x.size());
        for (auto& s : scale_) s = s > 1e-12 ? std::sqrt(s) : 1.0;
        w_.assign(d, 0.0);
        b_ = 0.0;
        for (int it = 0; it < 500; ++it) {
            std::vector<double> gw(d, 0.0);
            double gb = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double p = 1 / (1 + std::exp(-raw(x[i])));
                const double err = p - (y[i] == 1 ? 1.0 : 0.0);
                for (std::size_t j = 0; j < d; ++j) gw[j] += err * (x[i][j] - mean_[j]) / scale_[j];
                gb += err;
            }
            for (std::size_t j = 0; j < d; ++j) w_[j] -= 0.1 * (gw[j] / double(x.size()) + 1e-2 * w_[j]);
            b_ -= 0.1 * gb / double(x.size());
        }
    }
    int predict(const std::vector<double>& r) const { return raw(r) >= 0 ? 1 : -1; }

private:
    double raw(const std::vector<double>& r) const {
        double z = b_;
        for (std::size_t j = 0; j < r.size(); ++j) z += w_[j] * (r[j] - mean_[j]) / scale_[j];
        return z;
    }
    std::vector<double> mean_, scale_, w_;
    double b_ = 0;
};

struct ExportCheck {
    bool well_formed = true;
    std::string problem;
    double accuracy = 0;
    double majority = 0;
};

// Per outer fold: train N-RELAGGS on the training part, export the
// pre-predictor layer for every instance through the C API, read the CSV
// back and fit the external learner on the training rows only.
ExportCheck feature_extraction(const fs::path& dir, const std::string& name) {
    ExportCheck out;
    const auto db = load(dir);
    const auto plan = generate_aggregation_plan(db);
    const auto keys = db.instance_keys();
    const auto labels = instance_labels(db, PreprocessorState::fit(db, keys), keys);
    out.majority = majority_accuracy(db);

    nrg_database* handle = nullptr;
    if (nrg_database_load((dir / "schema.json").c_str(), dir.c_str(), &handle) != NRG_OK)
        return {false, std::string("load failed: ") + nrg_last_error()};

    const auto split = stratified_kfold(keys, labels, 10, 0);
    const auto work = scratch_dir() / ("extract_" + name);
    fs::create_directories(work);
    NRelaggsConfig config;
    std::vector<double> fold_accuracy;
    for (std::size_t f = 0; f < split.k && out.well_formed; ++f) {
        const auto train_keys = split.train_keys(f);
        const auto fitted = fit_engine(db, plan, Engine::nrelaggs, config, train_keys, derive_seed(0, {f}));
        const auto ckpt = work / ("fold" + std::to_string(f) + ".ckpt");
        save_checkpoint(ckpt, Checkpoint{fitted.config, fitted.preprocessor, fitted.model, f});

        nrg_model* model = nullptr;
        std::size_t rows = 0, cols = 0;
        const auto csv_path = work / ("fold" + std::to_string(f) + ".csv");
        if (nrg_model_load(ckpt.c_str(), &model) != NRG_OK ||
            nrg_extract_features(model, handle, "pre_predictor", csv_path.c_str(), &rows, &cols) != NRG_OK) {
            out.well_formed = false;
            out.problem = std::string("export failed: ") + nrg_last_error();
            nrg_model_free(model);
            break;
        }
        nrg_model_free(model);

        const auto records = csv::read_file(csv_path);
        if (records.size() != keys.size() + 1 || records.front().back() != "target") {
            out.well_formed = false;
            out.problem = "unexpected row count or header";
            break;
        }
        const std::size_t width = records.front().size();
        std::vector<std::vector<double>> x;
        for (std::size_t r = 1; r < records.size() && out.well_formed; ++r) {
            const auto& rec = records[r];
            if (rec.size() != width) {
                out.well_formed = false;
                out.problem = "ragged row " + std::to_string(r);
                break;
            }
            if (rec.back() != db.label_of(r - 1)) {
                out.well_formed = false;
                out.problem = "target column altered at row " + std::to_string(r);
                break;
            }
            std::vector<double> v;
            for (std::size_t c = 0; c + 1 < rec.size(); ++c) {
                const double value = std::strtod(rec[c].c_str(), nullptr);
                if (!std::isfinite(value)) {
                    out.well_formed = false;
                    out.problem = "non-finite value";
                }
                v.push_back(value);
            }
            x.push_back(std::move(v));
        }
        if (!out.well_formed) break;

        std::vector<std::vector<double>> train_x;
        std::vector<int> train_y;
        for (auto i : split.train_indices(f)) {
            train_x.push_back(x[i]);
            train_y.push_back(labels[i]);
        }
        LogisticRegression learner;
        learner.fit(train_x, train_y);
        std::vector<int> predicted, truth;
        for (auto i : split.test_indices(f)) {
            predicted.push_back(learner.predict(x[i]));
            truth.push_back(labels[i]);
        }
        fold_accuracy.push_back(accuracy(predicted, truth));
    }
    nrg_database_free(handle);
    if (out.well_formed) out.accuracy = summarize(fold_accuracy).mean;
    return out;
}

Outcome feature_extraction_workflow() {
    Parts parts;
    for (const auto& [name, label] : std::vector<std::pair<std::string, std::string>>{
             {"mutagenesis42", "Mutagenesis-42"}, {"mutagenesis188", "Mutagenesis-188 (extra)"}}) {
        const auto dir = find_dataset(name);
        if (!dir) {
            parts.missing(label);
            continue;
        }
        const auto r = feature_extraction(*dir, name);
        if (!r.well_formed) {
            parts.add(false, label + " export malformed: " + r.problem);
            continue;
        }
        parts.add(r.accuracy > r.majority, label + " logistic regression on exported features acc " +
                                               fixed(r.accuracy) + " vs majority " + fixed(r.majority));
    }
    return parts.outcome();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria runner"};
    std::vector<int> selected;
    app.add_option("criteria", selected, "criteria to run (default: all)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);
    if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
        {1, {"majority baselines", majority_baselines}},
        {2, {"aggregation plan golden", plan_golden}},
        {3, {"oracle equivalence", oracle_equivalence}},
        {4, {"gradient suite", gradient_suite}},
        {5, {"base aggregate recreation", base_aggregate_recreation}},
        {6, {"capacity", capacity}},
        {7, {"benchmark bands", benchmark_bands}},
        {8, {"metric oracles", metric_oracles}},
        {9, {"feature extraction workflow", feature_extraction_workflow}},
    };

    bool failed = false, blocked = false;
    for (int n : selected) {
        const auto& [title, run] = criteria.at(n);
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "BLOCKED";
        std::cout << "criterion " << n << ": " << tag << "  " << title << ": " << o.detail << " (" << fixed(secs, 1)
                  << " s)" << std::endl;
        failed |= o.verdict == Verdict::fail;
        blocked |= o.verdict == Verdict::blocked;
    }
    return failed ? 1 : blocked ? 77 : 0;
}
