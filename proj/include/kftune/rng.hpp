// Copyright 2026 The kftune Authors
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

#ifndef KFTUNE_RNG_HPP_
#define KFTUNE_RNG_HPP_

#include <cstdint>

namespace kftune {

/// Counter-based generator: output i is a SplitMix64-style mix of (key, i).
///
/// Any (key, counter) pair can be evaluated independently, so Monte-Carlo
/// streams are derived by hashing (seed, index) into a key and replay
/// bit-identically regardless of thread scheduling. Gaussian variates use the
/// Marsaglia polar method on the uniform stream; both outputs of an accepted
/// pair are consumed in order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream key for sub-stream `index` of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Purpose tags so simulation noise and parameter perturbation never share a
// stream even when called with the same seed.
enum class StreamPurpose : std::uint64_t {
  kNoise = 0x6e6f697365ULL,
  kPerturbation = 0x7065727475ULL,
};

CounterRng make_stream(std::uint64_t seed, StreamPurpose purpose);

}  // namespace kftune

#endif  // KFTUNE_RNG_HPP_
