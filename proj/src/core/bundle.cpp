#include "nrelaggs/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

InstanceBundle build_instance(const RelationalDatabase& db, const PreprocessorState& state, const AggregationPlan& plan,
                              std::string_view instance_key) {
    auto target_row = db.instance_row(instance_key);
    if (!target_row) fail(ErrorCode::unknown_instance_key, std::string(instance_key));
    if (state.tables().size() != plan.table_count())
        fail(ErrorCode::plan_mismatch, "preprocessor and plan cover different tables");

    const auto rows = traverse_instance(db, plan, *target_row);
    InstanceBundle bundle;
    bundle.key = std::string(instance_key);
    bundle.label = state.encode_label(db.label_of(*target_row));
    bundle.x_ids = rows.parent_positions;
    for (std::size_t t = 0; t < plan.table_count(); ++t) {
        const auto& db_rows = db.rows(plan.db_tables[t]);
        MatrixF block(rows.rows[t].size(), state.width(t));
        for (std::size_t r = 0; r < rows.rows[t].size(); ++r) state.encode_row_into(t, db_rows[rows.rows[t][r]], block.row(r));
        bundle.x_data.push_back(std::move(block));
    }
    return bundle;
}

std::vector<InstanceBundle> build_instances(const RelationalDatabase& db, const PreprocessorState& state,
                                            const AggregationPlan& plan, std::span<const std::string> instance_keys) {
    std::vector<InstanceBundle> out;
    out.reserve(instance_keys.size());
    for (const auto& key : instance_keys) out.push_back(build_instance(db, state, plan, key));
    return out;
}

BatchBundle collate(std::span<const InstanceBundle> instances, const AggregationPlan& plan) {
    BatchBundle batch;
    if (instances.empty()) return batch;
    const std::size_t tables = instances.front().x_data.size();
    if (tables != plan.table_count()) fail(ErrorCode::incompatible_widths, "instance table count differs from plan");

    batch.n = instances.size();
    batch.x_ids.assign(tables, {});
    batch.instance_of.assign(tables, {});
    for (std::size_t t = 0; t < tables; ++t) {
        std::size_t rows = 0;
        for (const auto& inst : instances) rows += inst.x_data.size() == tables ? inst.x_data[t].rows() : 0;
        batch.x_data.emplace_back(0, instances.front().x_data[t].cols());
        batch.x_ids[t].reserve(rows);
        batch.instance_of[t].reserve(rows);
    }

    std::vector<std::uint32_t> offsets(tables, 0);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (inst.x_data.size() != tables || inst.x_ids.size() != tables)
            fail(ErrorCode::incompatible_widths, "instance '" + inst.key + "' has a different table count");
        batch.keys.push_back(inst.key);
        batch.labels.push_back(inst.label);
        for (std::size_t t = 0; t < tables; ++t) {
            if (inst.x_data[t].cols() != batch.x_data[t].cols())
                fail(ErrorCode::incompatible_widths, "instance '" + inst.key + "' table " + plan.table_names[t] +
                                                         " has width " + std::to_string(inst.x_data[t].cols()) +
                                                         ", expected " + std::to_string(batch.x_data[t].cols()));
            batch.x_data[t].append_rows(inst.x_data[t]);
            batch.instance_of[t].insert(batch.instance_of[t].end(), inst.x_data[t].rows(), static_cast<std::uint32_t>(i));
            if (t > 0) {
                const auto parent_offset = offsets[*plan.parents[t]];
                for (auto id : inst.x_ids[t]) batch.x_ids[t].push_back(parent_offset + id);
            }
        }
        for (std::size_t t = 0; t < tables; ++t) offsets[t] += static_cast<std::uint32_t>(inst.x_data[t].rows());
    }
    return batch;
}

namespace {

static_assert(std::endian::native == std::endian::little, "bundle files are written in native little-endian order");

constexpr char bundle_magic[8] = {'N', 'R', 'B', 'U', 'N', 'D', 'L', 'E'};

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorCode::io_error, "truncated bundle file");
    return value;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
    std::string s(get<std::uint32_t>(in), '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(s.size()))) fail(ErrorCode::io_error, "truncated bundle file");
    return s;
}

template <typename T>
void put_array(std::ofstream& out, std::span<const T> values) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
std::vector<T> get_array(std::ifstream& in, std::size_t count) {
    std::vector<T> values(count);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(T))))
        fail(ErrorCode::io_error, "truncated bundle file");
    return values;
}

}  // namespace

void write_bundle_file(const std::filesystem::path& path, const AggregationPlan& plan, const BatchBundle& batch) {
    if (batch.n > 0 && batch.table_count() != plan.table_count())
        fail(ErrorCode::plan_mismatch, "bundle and plan cover different tables");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out.write(bundle_magic, sizeof bundle_magic);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.n));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.table_count()));
    for (std::size_t i = 0; i < batch.n; ++i) {
        put_string(out, batch.keys[i]);
        put<std::int32_t>(out, batch.labels[i]);
    }
    for (std::size_t t = 0; t < batch.table_count(); ++t) {
        put_string(out, plan.table_names[t]);
        put<std::int32_t>(out, plan.parents[t] ? static_cast<std::int32_t>(*plan.parents[t]) : -1);
        const auto& m = batch.x_data[t];
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
        put_array<float>(out, m.flat());
        const auto& segments = t == 0 ? batch.instance_of[0] : batch.x_ids[t];
        put_array<std::uint32_t>(out, segments);
        put_array<std::uint32_t>(out, batch.instance_of[t]);
    }
    if (!out) fail(ErrorCode::io_error, "failed writing " + path.string());
}

BundleFile read_bundle_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, bundle_magic, sizeof magic) != 0)
        fail(ErrorCode::io_error, path.string() + " is not a bundle file");
    if (get<std::uint32_t>(in) != 1) fail(ErrorCode::io_error, "unsupported bundle file version");
    BundleFile file;
    auto& batch = file.batch;
    batch.n = get<std::uint32_t>(in);
    const auto tables = get<std::uint32_t>(in);
    for (std::size_t i = 0; i < batch.n; ++i) {
        batch.keys.push_back(get_string(in));
        batch.labels.push_back(get<std::int32_t>(in));
    }
    for (std::size_t t = 0; t < tables; ++t) {
        file.table_names.push_back(get_string(in));
        file.parents.push_back(get<std::int32_t>(in));
        const auto rows = get<std::uint32_t>(in);
        const auto cols = get<std::uint32_t>(in);
        batch.x_data.emplace_back(rows, cols, get_array<float>(in, std::size_t{rows} * cols));
        auto segments = get_array<std::uint32_t>(in, rows);
        batch.x_ids.push_back(t == 0 ? std::vector<std::uint32_t>{} : std::move(segments));
        batch.instance_of.push_back(get_array<std::uint32_t>(in, rows));
    }
    return file;
}

}  // namespace nrelaggs
