#pragma once

#include <string>
#include <vector>

#include "foredif/model.hpp"

namespace foredif {

/// Contents of a checkpoint's leading metadata block.
struct CheckpointMeta {
    ArchConfig arch;
    Variant variant = Variant::Vanilla;
    std::vector<std::string> frozen;
};

/// FDCK checkpoint layout (little-endian):
///   magic "FDCK" | u32 version=1 | u32 meta_len | meta (key=value text)
///   u32 param_count
///   per param: u16 name_len | name | u8 rank | u32 extents[rank] | f32 data
///   u64 CRC64 over everything after the version field
void save_checkpoint(const std::string& path, const ModelBundle& model);

CheckpointMeta load_checkpoint_meta(const std::string& path);

/// Rebuilds the bundle from the stored arch/variant and fills every
/// parameter. Missing or misshapen parameters raise CheckpointError.
ModelBundle load_checkpoint(const std::string& path);

}  // namespace foredif
