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

#ifndef PNGBERT_COMMON_RNG_H_
#define PNGBERT_COMMON_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pngbert {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent sub-seed for a named stream, e.g. derive_seed(seed, {epoch, index}).
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> stream) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t v : stream) s = splitmix64(s ^ splitmix64(v + 0x5851f42d4c957f2dULL));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> stream = {}) {
  return Rng(derive_seed(base, stream));
}

}  // namespace pngbert

#endif  // PNGBERT_COMMON_RNG_H_
