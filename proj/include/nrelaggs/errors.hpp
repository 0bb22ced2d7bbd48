#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nrelaggs {

/// Error categories surfaced by the library. The numeric values are part of
/// the C API (`nrg_status`) and must stay stable.
enum class ErrorCode : int {
    ok = 0,
    missing_table_file = 1,
    header_mismatch = 2,
    dangling_foreign_key = 3,
    cyclic_join_graph = 4,
    target_not_categorical = 5,
    unknown_table = 6,
    schema_invalid = 7,
    parse_error = 8,
    empty_train_set = 9,
    unknown_instance_key = 10,
    incompatible_widths = 11,
    plan_mismatch = 12,
    shape_mismatch = 13,
    bad_segment_index = 14,
    label_domain = 15,
    width_chain_broken = 16,
    oversize_batch = 17,
    non_finite_loss = 18,
    unknown_layer = 19,
    too_few_instances = 20,
    length_mismatch = 21,
    single_class = 22,
    missing_checkpoint = 23,
    checkpoint_invalid = 24,
    io_error = 25,
    invalid_argument = 26,
    internal = 99,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace nrelaggs
