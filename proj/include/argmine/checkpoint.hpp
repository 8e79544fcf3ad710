#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "argmine/model.hpp"

namespace argmine::nn {

// Named-tensor container:
//   8 bytes   magic "ARGMCKP1"
//   8 bytes   manifest length N (little-endian uint64)
//   N bytes   JSON manifest: tensors[{name, component, role, rows, cols, offset}]
//   payload   float32 little-endian, column-major, tensors back to back
inline constexpr char kCheckpointMagic[9] = "ARGMCKP1";

struct TensorEntry {
    std::string name;
    std::string component;
    std::string role;  // "trainable" or "frozen"
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;  // in floats, from the payload start
};

struct CheckpointInfo {
    std::vector<TensorEntry> tensors;
    std::size_t header_bytes = 0;
    std::size_t payload_bytes = 0;
};

// Writes the listed tensors. Throws ValidationError if a value is not
// exactly representable in float32.
CheckpointInfo save_tensors(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, const Parameter*>>& tensors);

// Only the trainable partition of the assembly; the frozen backbone and
// frozen adapters are left out.
CheckpointInfo serialize_trainable(ModelAssembly& m, const std::filesystem::path& path);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Restores every tensor in the file into the same-named parameter of `m`.
// Each trainable parameter of `m` must be present; a tensor without a
// matching parameter or with a different shape is an error naming it.
void deserialize_trainable(const std::filesystem::path& path, ModelAssembly& m);

// Restores the named tensors present in the file into `params`, whatever
// their trainable flag; parameters the file lacks are left untouched.
// Returns the number restored.
std::size_t load_matching(const std::filesystem::path& path, const std::vector<Parameter*>& params);

}  // namespace argmine::nn
