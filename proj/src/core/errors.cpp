#include "nrelaggs/errors.hpp"

namespace nrelaggs {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ok: return "Ok";
        case ErrorCode::missing_table_file: return "MissingTableFile";
        case ErrorCode::header_mismatch: return "HeaderMismatch";
        case ErrorCode::dangling_foreign_key: return "DanglingForeignKey";
        case ErrorCode::cyclic_join_graph: return "CyclicJoinGraph";
        case ErrorCode::target_not_categorical: return "TargetNotCategorical";
        case ErrorCode::unknown_table: return "UnknownTable";
        case ErrorCode::schema_invalid: return "SchemaInvalid";
        case ErrorCode::parse_error: return "ParseError";
        case ErrorCode::empty_train_set: return "EmptyTrainSet";
        case ErrorCode::unknown_instance_key: return "UnknownInstanceKey";
        case ErrorCode::incompatible_widths: return "IncompatibleWidths";
        case ErrorCode::plan_mismatch: return "PlanMismatch";
        case ErrorCode::shape_mismatch: return "ShapeMismatch";
        case ErrorCode::bad_segment_index: return "BadSegmentIndex";
        case ErrorCode::label_domain: return "LabelDomain";
        case ErrorCode::width_chain_broken: return "WidthChainBroken";
        case ErrorCode::oversize_batch: return "OversizeBatch";
        case ErrorCode::non_finite_loss: return "NonFiniteLoss";
        case ErrorCode::unknown_layer: return "UnknownLayer";
        case ErrorCode::too_few_instances: return "TooFewInstances";
        case ErrorCode::length_mismatch: return "LengthMismatch";
        case ErrorCode::single_class: return "SingleClass";
        case ErrorCode::missing_checkpoint: return "MissingCheckpoint";
        case ErrorCode::checkpoint_invalid: return "CheckpointInvalid";
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::invalid_argument: return "InvalidArgument";
        case ErrorCode::internal: return "Internal";
    }
    return "Unknown";
}

}  // namespace nrelaggs
