#include "nrelaggs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "nrelaggs/errors.hpp"

namespace nrelaggs {

using nlohmann::json;

namespace {

constexpr char checkpoint_magic[8] = {'N', 'R', 'C', 'K', 'P', 'T', '0', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoints are written in native little-endian order");

json plan_json(const AggregationPlan& plan) {
    json steps = json::array();
    for (const auto& s : plan.steps) steps.push_back({{"nexts", s.nexts}, {"current", s.current}, {"depth", s.depth}});
    json parents = json::array();
    for (const auto& p : plan.parents) parents.push_back(p ? json(*p) : json(nullptr));
    return {{"table_names", plan.table_names}, {"db_tables", plan.db_tables}, {"parents", parents},
            {"steps", steps}, {"inverted", plan.inverted}};
}

AggregationPlan plan_parse(const json& doc) {
    AggregationPlan plan;
    plan.table_names = doc.at("table_names").get<std::vector<std::string>>();
    plan.db_tables = doc.at("db_tables").get<std::vector<std::size_t>>();
    for (const auto& p : doc.at("parents"))
        plan.parents.push_back(p.is_null() ? std::nullopt : std::optional<std::size_t>(p.get<std::size_t>()));
    for (const auto& s : doc.at("steps"))
        plan.steps.push_back({s.at("nexts").get<std::vector<std::size_t>>(), s.at("current").get<std::size_t>(),
                              s.at("depth").get<std::size_t>()});
    plan.inverted = doc.at("inverted").get<bool>();
    return plan;
}

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorCode::checkpoint_invalid, "truncated checkpoint");
    return value;
}

void read_floats(std::ifstream& in, std::span<float> dst) {
    if (!in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size_bytes())))
        fail(ErrorCode::checkpoint_invalid, "truncated checkpoint");
}

}  // namespace

std::string plan_to_json(const AggregationPlan& plan) { return plan_json(plan).dump(); }

AggregationPlan plan_from_json(std::string_view text) {
    try {
        return plan_parse(json::parse(text));
    } catch (const json::exception& e) {
        fail(ErrorCode::checkpoint_invalid, std::string("plan: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const auto& model = checkpoint.model;
    json meta{{"config", json::parse(checkpoint.config.to_json())},
              {"plan", plan_json(model.plan())},
              {"encoded_widths", model.encoded_widths()},
              {"preprocessor", json::parse(checkpoint.preprocessor.to_json())},
              {"seed", checkpoint.seed}};
    const std::string text = meta.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out.write(checkpoint_magic, sizeof checkpoint_magic);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, model.plan().fingerprint());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    const auto layers = model.dense_layers();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto* layer : layers) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer->inputs()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer->outputs()));
        put<std::uint8_t>(out, layer->activation == Activation::relu ? 1 : 0);
        out.write(reinterpret_cast<const char*>(layer->weights.flat().data()),
                  static_cast<std::streamsize>(layer->weights.flat().size_bytes()));
        out.write(reinterpret_cast<const char*>(layer->bias.data()),
                  static_cast<std::streamsize>(layer->bias.size() * sizeof(float)));
    }
    if (!out) fail(ErrorCode::io_error, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) fail(ErrorCode::missing_checkpoint, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::missing_checkpoint, path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0)
        fail(ErrorCode::checkpoint_invalid, path.string() + " is not a checkpoint");
    if (get<std::uint32_t>(in) != 1) fail(ErrorCode::checkpoint_invalid, "unsupported checkpoint version");
    const auto fingerprint = get<std::uint64_t>(in);
    std::string text(get<std::uint32_t>(in), '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(text.size())))
        fail(ErrorCode::checkpoint_invalid, "truncated checkpoint metadata");

    Checkpoint checkpoint;
    AggregationPlan plan;
    std::vector<std::size_t> widths;
    try {
        const json meta = json::parse(text);
        checkpoint.config = NRelaggsConfig::from_json(meta.at("config").dump());
        plan = plan_parse(meta.at("plan"));
        widths = meta.at("encoded_widths").get<std::vector<std::size_t>>();
        checkpoint.preprocessor = PreprocessorState::from_json(meta.at("preprocessor").dump());
        checkpoint.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        fail(ErrorCode::checkpoint_invalid, std::string("metadata: ") + e.what());
    }
    if (plan.fingerprint() != fingerprint) fail(ErrorCode::checkpoint_invalid, "plan fingerprint mismatch");

    // Rebuild the architecture, then overwrite every parameter.
    NRelaggsConfig shape = checkpoint.config;
    shape.freeze_aggregation = false;
    checkpoint.model = Model::build(plan, widths, shape, 0);
    auto layers = checkpoint.model.dense_layers();
    if (get<std::uint32_t>(in) != layers.size()) fail(ErrorCode::checkpoint_invalid, "dense layer count mismatch");
    for (auto* layer : layers) {
        const auto inputs = get<std::uint32_t>(in);
        const auto outputs = get<std::uint32_t>(in);
        const auto activation = get<std::uint8_t>(in);
        if (inputs != layer->inputs() || outputs != layer->outputs())
            fail(ErrorCode::checkpoint_invalid, "dense layer shape mismatch");
        layer->activation = activation ? Activation::relu : Activation::linear;
        read_floats(in, layer->weights.flat());
        read_floats(in, layer->bias);
    }
    checkpoint.model.validate_widths();
    return checkpoint;
}

}  // namespace nrelaggs
