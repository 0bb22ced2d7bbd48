#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nrelaggs/model.hpp"
#include "nrelaggs/plan.hpp"
#include "nrelaggs/preprocess.hpp"

namespace nrelaggs {

/// Everything needed to score or embed new instances of the same schema.
struct Checkpoint {
    NRelaggsConfig config;
    PreprocessorState preprocessor;
    Model model;
    std::uint64_t seed = 0;
};

/// Layout, little endian:
///
///     magic "NRCKPT01"  u32 version(=1)  u64 plan fingerprint
///     u32 metadata_length, metadata JSON (config, plan, encoded widths,
///         preprocessor state, seed)
///     u32 dense_count, dense_count x {u32 in, u32 out, u8 activation,
///         in*out f32 weights (row-major, in x out), out f32 bias}
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws MissingCheckpoint when the file does not exist and
/// CheckpointInvalid on malformed content or a fingerprint mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string plan_to_json(const AggregationPlan& plan);
AggregationPlan plan_from_json(std::string_view text);

}  // namespace nrelaggs
