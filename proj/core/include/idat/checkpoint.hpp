#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "idat/model.hpp"

namespace idat {

// Checkpoint file layout (all integers little-endian):
//   magic "IDAT", u32 format version, u32 parameter count, then per
//   parameter: u32 name length, UTF-8 name, u32 rank, u32 dims...,
//   u8 trainable flag, raw float32 data.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter> params);

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into a built model by name; every checkpoint
// entry must match an existing parameter's shape. With strict=true the model
// may not have parameters missing from the checkpoint. Trainable flags are
// restored from the checkpoint.
void load_into_model(Model& model, const std::vector<Parameter>& params,
                     bool strict = true);

}  // namespace idat
