// Copyright 2026 The DUNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef DUNET_CHECKPOINT_HPP_
#define DUNET_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dunet/tensor.hpp"

namespace dunet {

inline constexpr char kCheckpointMagic[4] = {'D', 'U', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// Named float32 tensors. On disk:
//   "DUNC" | u32 version | records...
//   record = u32 name length | UTF-8 name | u32 rank | u32 dims[rank] | f32 values
// All integers and floats are little-endian. Records run to end of file.
struct Checkpoint {
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const;
  void add(std::string name, Shape shape, std::vector<float> values);

  template <typename Scalar>
  void add(const std::string& name, const Tensor<Scalar>& t) {
    std::vector<float> v(static_cast<std::size_t>(t.size()));
    for (Index i = 0; i < t.size(); ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
    add(name, t.shape(), std::move(v));
  }

  // Copies a record into `out`, which must already have the record's shape.
  template <typename Scalar>
  void read_into(const std::string& name, Tensor<Scalar>& out) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
void Checkpoint::read_into(const std::string& name, Tensor<Scalar>& out) const {
  const CheckpointRecord* rec = find(name);
  if (rec == nullptr) throw StateError("checkpoint has no record named " + name);
  if (rec->shape != out.shape()) {
    throw DimensionError("checkpoint record " + name + " has shape " + shape_string(rec->shape) + ", expected " +
                         shape_string(out.shape()));
  }
  for (Index i = 0; i < out.size(); ++i) out[i] = static_cast<Scalar>(rec->values[static_cast<std::size_t>(i)]);
}

}  // namespace dunet

#endif  // DUNET_CHECKPOINT_HPP_
