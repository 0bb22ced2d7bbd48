#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nrelaggs/matrix.hpp"
#include "nrelaggs/plan.hpp"
#include "nrelaggs/preprocess.hpp"

namespace nrelaggs {

/// One data instance: encoded rows per plan table plus, for every non-target
/// table, the position of each row's parent row in the parent table's block.
struct InstanceBundle {
    std::string key;
    int label = 1;  ///< -1 or +1
    std::vector<MatrixF> x_data;
    std::vector<std::vector<std::uint32_t>> x_ids;  ///< x_ids[0] is empty
};

/// Row-wise concatenation of instances. `x_ids` point into the concatenated
/// parent block; `instance_of` maps every row to its instance.
struct BatchBundle {
    std::size_t n = 0;
    std::vector<std::string> keys;
    std::vector<int> labels;
    std::vector<MatrixF> x_data;
    std::vector<std::vector<std::uint32_t>> x_ids;
    std::vector<std::vector<std::uint32_t>> instance_of;

    std::size_t table_count() const noexcept { return x_data.size(); }
};

/// Throws UnknownInstanceKey.
InstanceBundle build_instance(const RelationalDatabase& db, const PreprocessorState& state, const AggregationPlan& plan,
                              std::string_view instance_key);

std::vector<InstanceBundle> build_instances(const RelationalDatabase& db, const PreprocessorState& state,
                                            const AggregationPlan& plan, std::span<const std::string> instance_keys);

/// Throws IncompatibleWidths when instances disagree on table count or widths.
/// An empty input yields an n = 0 bundle with no tables.
BatchBundle collate(std::span<const InstanceBundle> instances, const AggregationPlan& plan);

/// Binary container, little endian:
///
///     magic "NRBUNDLE"  u32 version(=1)  u32 n  u32 table_count
///     n x { u32 key_length, key bytes, i32 label }
///     table_count x {
///         u32 name_length, name bytes, i32 parent (-1 for the target)
///         u32 rows, u32 cols, rows*cols f32 (row-major)
///         rows u32 segment ids (parent row; instance index for the target)
///         rows u32 instance ids
///     }
void write_bundle_file(const std::filesystem::path& path, const AggregationPlan& plan, const BatchBundle& batch);

struct BundleFile {
    std::vector<std::string> table_names;
    std::vector<int> parents;
    BatchBundle batch;
};

BundleFile read_bundle_file(const std::filesystem::path& path);

}  // namespace nrelaggs
