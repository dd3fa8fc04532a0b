// Copyright 2026 The obbkit Authors
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

#ifndef OBBKIT__RANDOM_HPP_
#define OBBKIT__RANDOM_HPP_

#include <cstdint>
#include <random>

namespace obbkit
{

/// mt19937_64 with hand-rolled real mapping. The std distributions are
/// implementation-defined, so outputs would differ across standard libraries.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {return static_cast<double>(engine_() >> 11) * 0x1.0p-53;}

  double uniform(double lo, double hi) {return lo + (hi - lo) * uniform01();}

  /// Uniform integer in [0, n). Slight modulo bias is irrelevant for n << 2^64.
  std::uint64_t below(std::uint64_t n) {return engine_() % n;}

  std::uint64_t next() {return engine_();}

private:
  std::mt19937_64 engine_;
};

}  // namespace obbkit

#endif  // OBBKIT__RANDOM_HPP_
