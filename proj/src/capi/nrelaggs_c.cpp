#include "nrelaggs/nrelaggs.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

#include <json.hpp>

#include "nrelaggs/benchmark.hpp"
#include "nrelaggs/checkpoint.hpp"
#include "nrelaggs/csv.hpp"
#include "nrelaggs/engine.hpp"
#include "nrelaggs/errors.hpp"
#include "nrelaggs/metrics.hpp"
#include "nrelaggs/relaggs.hpp"

using namespace nrelaggs;

struct nrg_database {
    RelationalDatabase db;
    AggregationPlan plan;
};

struct nrg_model {
    Checkpoint checkpoint;
    TrainResult training;
};

struct nrg_report {
    EvalReport report;
};

namespace {

thread_local std::string last_error;

nrg_status record(ErrorCode code, const std::string& message) {
    last_error = message;
    return static_cast<nrg_status>(code);
}

template <typename F>
nrg_status guarded(F&& body) {
    try {
        last_error.clear();
        body();
        return NRG_OK;
    } catch (const Error& e) {
        return record(e.code(), e.what());
    } catch (const std::bad_alloc&) {
        return record(ErrorCode::internal, "out of memory");
    } catch (const std::exception& e) {
        return record(ErrorCode::internal, e.what());
    } catch (...) {
        return record(ErrorCode::internal, "unknown exception");
    }
}

void require(const void* p, const char* what) {
    if (!p) fail(ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

std::string format_float(float v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.9g", static_cast<double>(v));
    return buffer;
}

// f0..fD-1,target. Descriptive column names go to a sidecar `<stem>.columns.txt`.
void write_feature_csv(const std::filesystem::path& path, const RelationalDatabase& db,
                       std::span<const std::string> keys, const char* prefix, const std::vector<std::string>& labels,
                       const MatrixF& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    std::vector<std::string> header;
    for (std::size_t c = 0; c < m.cols(); ++c) header.push_back(prefix + std::to_string(c));
    header.push_back("target");
    out << csv::format_record(header) << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::vector<std::string> record;
        for (float v : m.row(r)) record.push_back(format_float(v));
        record.push_back(db.label_of(*db.instance_row(keys[r])));
        out << csv::format_record(record) << "\n";
    }
    if (!out) fail(ErrorCode::io_error, "failed writing " + path.string());
    if (labels.empty()) return;
    auto sidecar = path;
    sidecar.replace_extension(".columns.txt");
    std::ofstream names(sidecar, std::ios::binary | std::ios::trunc);
    for (std::size_t c = 0; c < labels.size(); ++c) names << header[c] << "\t" << labels[c] << "\n";
    if (!names) fail(ErrorCode::io_error, "failed writing " + sidecar.string());
}

void check_plan(const nrg_database& db, const nrg_model& model) {
    if (!(db.plan == model.checkpoint.model.plan()))
        fail(ErrorCode::plan_mismatch, "checkpoint plan " + model.checkpoint.model.plan().describe() +
                                           " does not match the database plan " + db.plan.describe());
}

MatrixF features_of(const nrg_database& db, const nrg_model& model, FeatureLayer layer,
                    std::span<const std::string> keys) {
    check_plan(db, model);
    const auto& ck = model.checkpoint;
    const auto instances = build_instances(db.db, ck.preprocessor, ck.model.plan(), keys);
    return ck.model.extract_features(collate(instances, ck.model.plan()), layer);
}

}  // namespace

extern "C" {

const char* nrg_version(void) { return tool_version; }

const char* nrg_status_name(nrg_status status) {
    return error_code_name(static_cast<ErrorCode>(status)).data();
}

const char* nrg_last_error(void) { return last_error.c_str(); }

void nrg_string_free(char* text) { std::free(text); }

nrg_status nrg_database_load(const char* schema_path, const char* data_dir, nrg_database** out) {
    return guarded([&] {
        require(schema_path, "schema_path");
        require(data_dir, "data_dir");
        require(out, "out");
        *out = nullptr;
        auto handle = std::make_unique<nrg_database>();
        handle->db = RelationalDatabase::load(schema_path, data_dir);
        handle->plan = generate_aggregation_plan(handle->db);
        *out = handle.release();
    });
}

void nrg_database_free(nrg_database* db) { delete db; }

nrg_status nrg_database_instance_count(const nrg_database* db, size_t* out) {
    return guarded([&] {
        require(db, "db");
        require(out, "out");
        *out = db->db.rows(db->db.target_table()).size();
    });
}

nrg_status nrg_database_stats(const nrg_database* db, char** out) {
    return guarded([&] {
        require(db, "db");
        require(out, "out");
        std::size_t width = 5;
        for (std::size_t t = 0; t < db->db.table_count(); ++t) width = std::max(width, db->db.table(t).name.size());
        std::ostringstream text;
        char line[512];
        std::snprintf(line, sizeof line, "%-*s  %7s  %7s  %s\n", static_cast<int>(width), "table", "columns", "rows",
                      "target");
        text << line;
        for (std::size_t t = 0; t < db->db.table_count(); ++t) {
            std::string target;
            if (t == db->db.target_table()) {
                target = db->db.table(t).columns[db->db.target_column()].name + ":";
                for (const auto& [label, n] : class_distribution(db->db))
                    target += " " + label + "(" + std::to_string(n) + ")";
            }
            std::snprintf(line, sizeof line, "%-*s  %7zu  %7zu  %s", static_cast<int>(width),
                          db->db.table(t).name.c_str(), db->db.table(t).columns.size(), db->db.rows(t).size(),
                          target.c_str());
            std::string row = line;
            while (!row.empty() && row.back() == ' ') row.pop_back();
            text << row << "\n";
        }
        *out = duplicate(text.str());
    });
}

nrg_status nrg_database_plan(const nrg_database* db, char** out) {
    return guarded([&] {
        require(db, "db");
        require(out, "out");
        *out = duplicate(db->plan.describe());
    });
}

nrg_status nrg_database_majority_accuracy(const nrg_database* db, double* out) {
    return guarded([&] {
        require(db, "db");
        require(out, "out");
        *out = majority_accuracy(db->db);
    });
}

nrg_status nrg_ingest(const nrg_database* db, const char* bundle_path, char** preprocessor_json) {
    return guarded([&] {
        require(db, "db");
        require(bundle_path, "bundle_path");
        const auto keys = db->db.instance_keys();
        const auto state = PreprocessorState::fit(db->db, db->plan, keys);
        const auto instances = build_instances(db->db, state, db->plan, keys);
        write_bundle_file(bundle_path, db->plan, collate(instances, db->plan));
        if (preprocessor_json) *preprocessor_json = duplicate(state.to_json());
    });
}

nrg_status nrg_propositionalize(const nrg_database* db, const char* engine, const char* checkpoint_path,
                                const char* csv_path, size_t* rows, size_t* feature_cols) {
    return guarded([&] {
        require(db, "db");
        require(engine, "engine");
        require(csv_path, "csv_path");
        const std::string name = engine;
        const auto keys = db->db.instance_keys();
        MatrixF m;
        std::vector<std::string> names;
        if (name == "relaggs") {
            const auto state = PreprocessorState::fit(db->db, db->plan, keys);
            const auto instances = build_instances(db->db, state, db->plan, keys);
            m = relaggs_propositionalize(collate(instances, db->plan), db->plan);
            std::vector<std::vector<std::string>> table_names;
            for (const auto& t : state.tables()) table_names.push_back(t.feature_names());
            names = relaggs_column_labels(db->plan, table_names);
        } else if (name == "nrelaggs") {
            if (!checkpoint_path || !*checkpoint_path)
                fail(ErrorCode::missing_checkpoint, "the nrelaggs engine needs a checkpoint");
            nrg_model model{load_checkpoint(checkpoint_path), {}};
            m = features_of(*db, model, FeatureLayer{}, keys);
        } else {
            fail(ErrorCode::invalid_argument, "propositionalization engine must be relaggs or nrelaggs, got '" + name + "'");
        }
        write_feature_csv(csv_path, db->db, keys, "f", names, m);
        if (rows) *rows = m.rows();
        if (feature_cols) *feature_cols = m.cols();
    });
}

nrg_status nrg_train(const nrg_database* db, const char* engine, const char* config_json, uint64_t seed,
                     nrg_model** out, char** history_json) {
    return guarded([&] {
        require(db, "db");
        require(out, "out");
        *out = nullptr;
        const Engine kind = parse_engine(engine ? engine : "nrelaggs");
        if (kind != Engine::nrelaggs && kind != Engine::fix_nrelaggs)
            fail(ErrorCode::invalid_argument, "train supports nrelaggs and fix_nrelaggs");
        NRelaggsConfig config = config_json ? NRelaggsConfig::from_json(config_json) : NRelaggsConfig{};
        if (kind == Engine::fix_nrelaggs) config.feature_generation_factor = config.feature_selection_factor = 1.0;
        const auto keys = db->db.instance_keys();
        auto fitted = fit_engine(db->db, db->plan, kind, config, keys, seed);
        auto handle = std::make_unique<nrg_model>();
        handle->checkpoint = Checkpoint{config, std::move(fitted.preprocessor), std::move(fitted.model), seed};
        handle->training = std::move(fitted.training);
        if (history_json) {
            nlohmann::json doc{{"best_epoch", handle->training.best_epoch},
                               {"best_monitored_loss", handle->training.best_validation_loss},
                               {"stopped_early", handle->training.stopped_early},
                               {"epochs", nlohmann::json::array()}};
            for (const auto& e : handle->training.history)
                doc["epochs"].push_back(
                    {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"monitored_loss", e.validation_loss}});
            *history_json = duplicate(doc.dump(2) + "\n");
        }
        *out = handle.release();
    });
}

nrg_status nrg_train_dump_bundles(const nrg_database* db, const nrg_model* model, const char* bundle_path) {
    return guarded([&] {
        require(db, "db");
        require(model, "model");
        require(bundle_path, "bundle_path");
        check_plan(*db, *model);
        const auto keys = db->db.instance_keys();
        const auto& plan = model->checkpoint.model.plan();
        const auto instances = build_instances(db->db, model->checkpoint.preprocessor, plan, keys);
        write_bundle_file(bundle_path, plan, collate(instances, plan));
    });
}

nrg_status nrg_model_save(const nrg_model* model, const char* path) {
    return guarded([&] {
        require(model, "model");
        require(path, "path");
        save_checkpoint(path, model->checkpoint);
    });
}

nrg_status nrg_model_load(const char* path, nrg_model** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        auto handle = std::make_unique<nrg_model>();
        handle->checkpoint = load_checkpoint(path);
        *out = handle.release();
    });
}

void nrg_model_free(nrg_model* model) { delete model; }

nrg_status nrg_model_config(const nrg_model* model, char** config_json) {
    return guarded([&] {
        require(model, "model");
        require(config_json, "config_json");
        *config_json = duplicate(model->checkpoint.config.to_json());
    });
}

nrg_status nrg_model_parameter_count(const nrg_model* model, size_t* out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = model->checkpoint.model.parameter_count();
    });
}

nrg_status nrg_model_accuracy(const nrg_model* model, const nrg_database* db, double* out) {
    return guarded([&] {
        require(model, "model");
        require(db, "db");
        require(out, "out");
        check_plan(*db, *model);
        const auto& ck = model->checkpoint;
        const auto keys = db->db.instance_keys();
        const auto batch = collate(build_instances(db->db, ck.preprocessor, ck.model.plan(), keys), ck.model.plan());
        const auto prediction = predict(ck.model, batch);
        *out = accuracy(prediction.labels, batch.labels);
    });
}

nrg_status nrg_extract_features(const nrg_model* model, const nrg_database* db, const char* layer,
                                const char* csv_path, size_t* rows, size_t* feature_cols) {
    return guarded([&] {
        require(model, "model");
        require(db, "db");
        require(csv_path, "csv_path");
        const auto which = FeatureLayer::parse(layer ? layer : "pre_predictor");
        const auto keys = db->db.instance_keys();
        const auto m = features_of(*db, *model, which, keys);
        write_feature_csv(csv_path, db->db, keys, "e", {}, m);
        if (rows) *rows = m.rows();
        if (feature_cols) *feature_cols = m.cols();
    });
}

void nrg_protocol_init(nrg_protocol* protocol) {
    if (!protocol) return;
    *protocol = nrg_protocol{10, 2, 3, 0, 1, nullptr, nullptr};
}

nrg_status nrg_evaluate(const nrg_database* db, const char* dataset, const char* engine,
                        const nrg_protocol* protocol, nrg_progress_fn progress, void* user, nrg_report** out) {
    return guarded([&] {
        require(db, "db");
        require(engine, "engine");
        require(protocol, "protocol");
        require(out, "out");
        *out = nullptr;
        Protocol p;
        p.folds = protocol->folds;
        p.repeats = protocol->repeats;
        p.inner_folds = protocol->inner_folds;
        p.seed = protocol->seed;
        p.jobs = protocol->jobs;
        if (protocol->base_config_json) p.base = NRelaggsConfig::from_json(protocol->base_config_json);
        if (protocol->fixed_config_json) p.fixed = NRelaggsConfig::from_json(protocol->fixed_config_json);
        ProgressFn callback;
        if (progress)
            callback = [&](const FoldReport& f) { progress(user, f.repetition, f.fold, f.accuracy, f.auroc); };
        auto handle = std::make_unique<nrg_report>();
        handle->report = run_benchmark(db->db, dataset ? dataset : "", parse_engine(engine), p, callback);
        *out = handle.release();
    });
}

void nrg_report_free(nrg_report* report) { delete report; }

nrg_status nrg_report_json(const nrg_report* report, char** out) {
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        *out = duplicate(report->report.to_json());
    });
}

nrg_status nrg_report_timing_json(const nrg_report* report, char** out) {
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        *out = duplicate(report->report.timing_json());
    });
}

nrg_status nrg_report_csv(const nrg_report* report, char** out) {
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        *out = duplicate(EvalReport::csv_header() + "\n" + report->report.csv_row() + "\n");
    });
}

nrg_status nrg_report_summary(const nrg_report* report, double* accuracy_mean, double* accuracy_std,
                              double* auroc_mean, double* auroc_std) {
    return guarded([&] {
        require(report, "report");
        const auto& r = report->report;
        if (accuracy_mean) *accuracy_mean = r.accuracy.mean;
        if (accuracy_std) *accuracy_std = r.accuracy.stddev;
        if (auroc_mean) *auroc_mean = r.auroc.mean;
        if (auroc_std) *auroc_std = r.auroc.stddev;
    });
}

}  // extern "C"
