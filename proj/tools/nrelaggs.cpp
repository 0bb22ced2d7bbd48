// nrelaggs command line tool. Talks to the library through the C API only.
//
// Exit codes: 0 success, 2 usage error, 10 + nrg_status for library errors,
// 3 for I/O problems of the tool itself.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nrelaggs/nrelaggs.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_tool_io = 3;
constexpr int exit_library_base = 10;

struct Failure {
    int code;
};

void check(nrg_status status) {
    if (status == NRG_OK) return;
    std::fprintf(stderr, "error: %s\n", nrg_last_error());
    throw Failure{exit_library_base + static_cast<int>(status)};
}

struct OwnedString {
    char* text = nullptr;
    ~OwnedString() { nrg_string_free(text); }
    std::string str() const { return text ? text : ""; }
};

struct DatabaseHandle {
    nrg_database* db = nullptr;
    ~DatabaseHandle() { nrg_database_free(db); }
};

struct ModelHandle {
    nrg_model* model = nullptr;
    ~ModelHandle() { nrg_model_free(model); }
};

struct ReportHandle {
    nrg_report* report = nullptr;
    ~ReportHandle() { nrg_report_free(report); }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        std::fprintf(stderr, "error: cannot write %s\n", path.string().c_str());
        throw Failure{exit_tool_io};
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::fprintf(stderr, "error: cannot read %s\n", path.string().c_str());
        throw Failure{exit_tool_io};
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Options {
    std::string schema;
    std::string data_dir;
    std::string engine;
    std::string checkpoint;
    std::string layer = "pre_predictor";
    std::string config;
    std::string dataset;
    std::string out;
    std::string manifest;
    std::uint64_t seed = 0;
    std::size_t folds = 10;
    std::size_t repeats = 2;
    std::size_t inner_folds = 3;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    bool dump_bundles = false;
};

// --config accepts a JSON file or inline JSON
std::optional<std::string> config_text(const Options& o) {
    if (o.config.empty()) return std::nullopt;
    if (o.config.front() == '{') return o.config;
    return read_text(o.config);
}

std::string data_dir_of(const Options& o) {
    if (!o.data_dir.empty()) return o.data_dir;
    const auto parent = fs::path(o.schema).parent_path();
    return parent.empty() ? std::string(".") : parent.string();
}

DatabaseHandle open_database(const Options& o) {
    DatabaseHandle h;
    check(nrg_database_load(o.schema.c_str(), data_dir_of(o).c_str(), &h.db));
    return h;
}

fs::path prepare_out(const Options& o) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) {
        std::fprintf(stderr, "error: cannot create %s: %s\n", o.out.c_str(), ec.message().c_str());
        throw Failure{exit_tool_io};
    }
    return fs::path(o.out);
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& argv,
                    const Options& o, const json& extra = json::object()) {
    const auto config = config_text(o);
    json doc{{"tool_version", nrg_version()},
             {"command", command},
             {"argv", argv},
             {"cwd", fs::current_path().string()},
             {"schema", o.schema},
             {"data_dir", data_dir_of(o)},
             {"engine", o.engine.empty() ? json(nullptr) : json(o.engine)},
             {"seed", o.seed},
             {"config", config ? json::parse(*config) : json(nullptr)},
             {"out", o.out}};
    doc.update(extra);
    write_text(dir / "manifest.json", doc.dump(2) + "\n");
}

int cmd_ingest(const Options& o, const std::vector<std::string>& argv) {
    auto db = open_database(o);
    const auto dir = prepare_out(o);
    OwnedString stats, plan, preprocessor;
    check(nrg_database_stats(db.db, &stats.text));
    check(nrg_database_plan(db.db, &plan.text));
    check(nrg_ingest(db.db, (dir / "bundles.bin").string().c_str(), &preprocessor.text));
    write_text(dir / "stats.txt", stats.str());
    write_text(dir / "plan.txt", plan.str() + "\n");
    write_text(dir / "preprocessor.json", json::parse(preprocessor.str()).dump(2) + "\n");
    write_manifest(dir, "ingest", argv, o);
    std::printf("%s", stats.str().c_str());
    std::printf("plan: %s\n", plan.str().c_str());
    return 0;
}

int cmd_propositionalize(const Options& o, const std::vector<std::string>& argv) {
    std::string engine = o.engine, checkpoint = o.checkpoint;
    if (const auto colon = engine.find(':'); colon != std::string::npos) {
        checkpoint = engine.substr(colon + 1);
        engine = engine.substr(0, colon);
    }
    auto db = open_database(o);
    const auto dir = prepare_out(o);
    std::size_t rows = 0, cols = 0;
    check(nrg_propositionalize(db.db, engine.c_str(), checkpoint.empty() ? nullptr : checkpoint.c_str(),
                               (dir / "features.csv").string().c_str(), &rows, &cols));
    write_manifest(dir, "propositionalize", argv, o, {{"checkpoint", checkpoint}, {"rows", rows}, {"features", cols}});
    std::printf("%zu rows x %zu features -> %s\n", rows, cols, (dir / "features.csv").string().c_str());
    return 0;
}

int cmd_train(const Options& o, const std::vector<std::string>& argv) {
    auto db = open_database(o);
    const auto dir = prepare_out(o);
    const auto config = config_text(o);
    ModelHandle model;
    OwnedString history;
    const std::string engine = o.engine.empty() ? "nrelaggs" : o.engine;
    check(nrg_train(db.db, engine.c_str(), config ? config->c_str() : nullptr, o.seed, &model.model, &history.text));
    check(nrg_model_save(model.model, (dir / "model.ckpt").string().c_str()));
    if (o.dump_bundles) check(nrg_train_dump_bundles(db.db, model.model, (dir / "bundles.bin").string().c_str()));
    double acc = 0.0;
    std::size_t params = 0;
    check(nrg_model_accuracy(model.model, db.db, &acc));
    check(nrg_model_parameter_count(model.model, &params));
    write_text(dir / "history.json", history.str());
    write_manifest(dir, "train", argv, o, {{"parameters", params}});
    std::printf("trained %zu parameters, training accuracy %.4f -> %s\n", params, acc,
                (dir / "model.ckpt").string().c_str());
    return 0;
}

int cmd_extract(const Options& o, const std::vector<std::string>& argv) {
    auto db = open_database(o);
    const auto dir = prepare_out(o);
    ModelHandle model;
    check(nrg_model_load(o.checkpoint.c_str(), &model.model));
    std::size_t rows = 0, cols = 0;
    check(nrg_extract_features(model.model, db.db, o.layer.c_str(), (dir / "features.csv").string().c_str(), &rows,
                               &cols));
    write_manifest(dir, "extract-features", argv, o, {{"checkpoint", o.checkpoint}, {"layer", o.layer}});
    std::printf("%zu rows x %zu features -> %s\n", rows, cols, (dir / "features.csv").string().c_str());
    return 0;
}

void print_progress(void*, size_t repetition, size_t fold, double accuracy, double auroc) {
    std::fprintf(stderr, "repetition %zu fold %zu: accuracy %.4f auroc %.4f\n", repetition, fold, accuracy, auroc);
}

int cmd_evaluate(const Options& o, const std::vector<std::string>& argv) {
    auto db = open_database(o);
    const auto dir = prepare_out(o);
    const auto config = config_text(o);
    nrg_protocol protocol;
    nrg_protocol_init(&protocol);
    protocol.folds = o.folds;
    protocol.repeats = o.repeats;
    protocol.inner_folds = o.inner_folds;
    protocol.seed = o.seed;
    protocol.jobs = o.jobs;
    protocol.fixed_config_json = config ? config->c_str() : nullptr;
    const std::string dataset =
        o.dataset.empty() ? fs::absolute(data_dir_of(o)).lexically_normal().filename().string() : o.dataset;
    ReportHandle report;
    check(nrg_evaluate(db.db, dataset.c_str(), o.engine.c_str(), &protocol, print_progress, nullptr, &report.report));
    OwnedString doc, timing, csv;
    check(nrg_report_json(report.report, &doc.text));
    check(nrg_report_timing_json(report.report, &timing.text));
    check(nrg_report_csv(report.report, &csv.text));
    write_text(dir / "report.json", doc.str());
    write_text(dir / "timing.json", timing.str());
    write_text(dir / "summary.csv", csv.str());
    write_manifest(dir, "evaluate", argv, o,
                   {{"dataset", dataset}, {"folds", o.folds}, {"repeats", o.repeats}, {"inner_folds", o.inner_folds}});
    double am = 0, as = 0, um = 0, us = 0;
    check(nrg_report_summary(report.report, &am, &as, &um, &us));
    std::printf("%s %s: accuracy %.3f (%.3f) auroc %.3f (%.3f)\n", dataset.c_str(), o.engine.c_str(), am, as, um, us);
    return 0;
}

int run(const std::vector<std::string>& argv);

int cmd_replay(const Options& o) {
    const json manifest = json::parse(read_text(o.manifest));
    auto argv = manifest.at("argv").get<std::vector<std::string>>();
    if (!o.out.empty()) {
        for (std::size_t i = 0; i + 1 < argv.size(); ++i)
            if (argv[i] == "--out") argv[i + 1] = o.out;
    }
    fs::current_path(manifest.at("cwd").get<std::string>());
    return run(argv);
}

const std::vector<std::string> engines{"relaggs", "nrelaggs", "fix_nrelaggs", "majority"};

int run(const std::vector<std::string>& argv) {
    CLI::App app{"N-RELAGGS: neural aggregation over relational databases"};
    app.set_version_flag("--version", std::string(nrg_version()));
    app.require_subcommand(1);
    Options o;

    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--schema", o.schema, "schema JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--data-dir", o.data_dir, "directory with one CSV per table (default: schema directory)");
        sub->add_option("--out", o.out, "output directory")->required();
        sub->add_option("--seed", o.seed, "seed for all randomness");
    };

    auto* ingest = app.add_subcommand("ingest", "load, validate and encode a database into a bundle archive");
    add_data(ingest);
    ingest->add_flag("--dump-bundles", o.dump_bundles, "accepted for symmetry, bundles are always written");

    auto* prop = app.add_subcommand("propositionalize", "write a flat feature table as CSV");
    add_data(prop);
    prop->add_option("--engine", o.engine, "relaggs | nrelaggs | nrelaggs:<checkpoint>")
        ->required()
        ->check([](const std::string& v) -> std::string {
            if (v == "relaggs" || v == "nrelaggs" || v.rfind("nrelaggs:", 0) == 0) return {};
            return "engine must be relaggs, nrelaggs or nrelaggs:<checkpoint>";
        });
    prop->add_option("--checkpoint", o.checkpoint, "checkpoint for the nrelaggs engine");

    auto* train = app.add_subcommand("train", "train an N-RELAGGS model on every instance");
    add_data(train);
    train->add_option("--engine", o.engine, "nrelaggs | fix_nrelaggs")
        ->check(CLI::IsMember({"nrelaggs", "fix_nrelaggs"}));
    train->add_option("--config", o.config, "hyperparameters as a JSON file or inline JSON");
    train->add_flag("--dump-bundles", o.dump_bundles, "also write the encoded training bundles");

    auto* evaluate = app.add_subcommand("evaluate", "nested stratified cross-validation benchmark");
    add_data(evaluate);
    evaluate->add_option("--engine", o.engine, "relaggs | nrelaggs | fix_nrelaggs | majority")
        ->required()
        ->check(CLI::IsMember(engines));
    evaluate->add_option("--folds", o.folds, "outer folds")->check(CLI::PositiveNumber);
    evaluate->add_option("--repeats", o.repeats, "outer repetitions")->check(CLI::PositiveNumber);
    evaluate->add_option("--inner-folds", o.inner_folds, "grid search folds")->check(CLI::PositiveNumber);
    evaluate->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    evaluate->add_option("--config", o.config, "fixed hyperparameters (skips the grid search)");
    evaluate->add_option("--dataset", o.dataset, "name used in the report (default: data directory name)");

    auto* extract = app.add_subcommand("extract-features", "export a layer of a trained model as CSV");
    add_data(extract);
    extract->add_option("--checkpoint", o.checkpoint, "trained model")->required();
    extract->add_option("--layer", o.layer, "pre_predictor | predictor_hidden:<i>");

    auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    replay->add_option("--manifest", o.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    replay->add_option("--out", o.out, "write to this directory instead");

    std::vector<const char*> raw{"nrelaggs"};
    for (const auto& a : argv) raw.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*ingest) return cmd_ingest(o, argv);
        if (*prop) return cmd_propositionalize(o, argv);
        if (*train) return cmd_train(o, argv);
        if (*evaluate) return cmd_evaluate(o, argv);
        if (*extract) return cmd_extract(o, argv);
        if (*replay) return cmd_replay(o);
    } catch (const Failure& f) {
        return f.code;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_usage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_tool_io;
    }
    return exit_usage;
}

}  // namespace

int main(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }
