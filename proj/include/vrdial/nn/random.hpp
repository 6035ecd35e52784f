/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef VRDIAL_NN_RANDOM_HPP_
#define VRDIAL_NN_RANDOM_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace vrdial {

using Rng = std::mt19937_64;

// Uniform double in the open interval (0, 1). Platform independent, unlike
// std::uniform_real_distribution.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased and
// platform independent.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = mix_seed(base);
  for (std::uint64_t p : parts) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

namespace nn {

// Standard Gumbel(0, 1) noise.
std::vector<double> gumbel_noise(std::size_t n, Rng& rng);

struct GumbelDraw {
  std::vector<double> sample;  // relaxed one-hot, or exact one-hot when hard
  std::size_t index = 0;       // argmax of the relaxed sample
};

// softmax((logits + g) / tau); with `hard` the returned sample is the one-hot
// of its argmax. Throws ValidationError when tau <= 0.
GumbelDraw gumbel_softmax_sample(std::span<const double> logits, double tau, bool hard, Rng& rng);

}  // namespace nn
}  // namespace vrdial

#endif  // VRDIAL_NN_RANDOM_HPP_
