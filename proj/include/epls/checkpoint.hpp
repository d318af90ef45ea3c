#pragma once

#include <string>
#include <utility>
#include <vector>

#include "epls/tensor.hpp"

namespace epls {

// A parameter set flattened for persistence: (name, tensor) pairs in a fixed
// order. Models expose their weights in this form.
using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;
using ConstNamedTensors = std::vector<std::pair<std::string, const Tensor*>>;

// Checkpoint file layout:
//   magic "EPLSCKPT", u32 version=1, u32 tensor count,
//   per tensor: u16 name length, name bytes, u8 rank, u32 per-dim sizes,
//   f32 data (little-endian, row-major), then u32 CRC32 of everything before.
void save_checkpoint(const std::string& path, const ConstNamedTensors& tensors);

struct LoadedTensor {
    std::string name;
    Tensor tensor;
};
std::vector<LoadedTensor> load_checkpoint(const std::string& path);

// Fills an existing parameter set from a loaded checkpoint; throws if a name
// is missing or a shape differs.
void fill_from_checkpoint(const std::vector<LoadedTensor>& loaded, const NamedTensors& dest);
const Tensor* find_tensor(const std::vector<LoadedTensor>& loaded, const std::string& name);

} // namespace epls
