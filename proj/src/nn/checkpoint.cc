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

#include "pngbert/nn/checkpoint.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "pngbert/common/errors.h"

namespace pngbert::nn {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'N', 'G', 'B'};
constexpr const char* kMomentFirst = "adam.m/";
constexpr const char* kMomentSecond = "adam.v/";

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError("checkpoint truncated reading " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_bytes(std::istream& is, std::uint32_t n, const std::string& what) {
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw DataError("checkpoint truncated reading " + what);
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint " + path.string());
    os.write(kMagic.data(), 4);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(ckpt.metadata.size()));
    os.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
    put_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(os, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
      for (double v : t.values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!os) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kMagic) throw DataError(path.string() + " is not a PNGB checkpoint");
  const std::uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = get_bytes(is, get_u32(is, "metadata length"), "metadata");
  const std::uint32_t count = get_u32(is, "tensor count");
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = get_bytes(is, get_u32(is, "name length"), "tensor name");
    const std::uint32_t rank = get_u32(is, nt.name + " rank");
    Shape shape(rank);
    for (auto& d : shape) d = get_u32(is, nt.name + " dims");
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = static_cast<double>(std::bit_cast<float>(get_u32(is, nt.name + " values")));
    nt.tensor = Tensor(std::move(shape), std::move(values));
    ckpt.tensors.push_back(std::move(nt));
  }
  return ckpt;
}

void append_parameters(Checkpoint& ckpt, const ParameterStore& params) {
  for (const auto& [name, p] : params) ckpt.tensors.push_back({name, p.value});
}

void append_optimizer(Checkpoint& ckpt, const OptimizerState& state) {
  for (const auto& [name, m] : state.moments) {
    ckpt.tensors.push_back({kMomentFirst + name, m.first});
    ckpt.tensors.push_back({kMomentSecond + name, m.second});
  }
}

std::size_t load_parameters(const Checkpoint& ckpt, ParameterStore& params, const std::string& prefix) {
  std::size_t loaded = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.compare(0, prefix.size(), prefix) != 0 || !params.contains(name)) continue;
    Parameter& p = params.at(name);
    if (p.value.shape() != t.shape()) {
      throw DataError("checkpoint tensor " + name + " has shape " + shape_string(t.shape()) + ", model expects " +
                      shape_string(p.value.shape()));
    }
    p.value = t;
    ++loaded;
  }
  return loaded;
}

void load_optimizer(const Checkpoint& ckpt, OptimizerState& state) {
  const std::string first = kMomentFirst;
  const std::string second = kMomentSecond;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.compare(0, first.size(), first) == 0) state.moments[name.substr(first.size())].first = t;
    if (name.compare(0, second.size(), second) == 0) state.moments[name.substr(second.size())].second = t;
  }
}

void round_to_storage_precision(ParameterStore& params) {
  for (auto& [name, p] : params) {
    for (double& v : p.value.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace pngbert::nn
