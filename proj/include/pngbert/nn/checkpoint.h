// Copyright (c) 2026 The pngbert-ja Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PNGBERT_NN_CHECKPOINT_H_
#define PNGBERT_NN_CHECKPOINT_H_

// Binary layout (all integers little-endian):
//   "PNGB"  u32 version  u32 metadata_len  metadata bytes
//   u32 tensor_count, then per tensor:
//   u32 name_len  name bytes  u32 rank  u32 dims[rank]  f32 values[prod(dims)]

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pngbert/nn/graph.h"
#include "pngbert/nn/optim.h"

namespace pngbert::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::string metadata;  // JSON text
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Parameters go under their own names; Adam moments under
// "adam.m/<name>" and "adam.v/<name>".
void append_parameters(Checkpoint& ckpt, const ParameterStore& params);
void append_optimizer(Checkpoint& ckpt, const OptimizerState& state);

// Copies every tensor whose name matches a parameter (shape must agree).
// Returns the number of parameters loaded.
std::size_t load_parameters(const Checkpoint& ckpt, ParameterStore& params, const std::string& prefix = "");
void load_optimizer(const Checkpoint& ckpt, OptimizerState& state);

// Rounds every parameter to float32, the precision stored on disk.
void round_to_storage_precision(ParameterStore& params);

}  // namespace pngbert::nn

#endif  // PNGBERT_NN_CHECKPOINT_H_
