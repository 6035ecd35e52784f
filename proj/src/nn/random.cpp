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

#include "vrdial/nn/random.hpp"

#include <cmath>

#include "vrdial/error.hpp"

namespace vrdial::nn {

std::vector<double> gumbel_noise(std::size_t n, Rng& rng) {
  std::vector<double> g(n);
  for (double& x : g) x = -std::log(-std::log(uniform_open(rng)));
  return g;
}

GumbelDraw gumbel_softmax_sample(std::span<const double> logits, double tau, bool hard,
                                 Rng& rng) {
  if (!(tau > 0.0)) throw ValidationError("gumbel temperature must be positive");
  if (logits.empty()) throw ShapeError("gumbel_softmax_sample: empty logits");
  const auto noise = gumbel_noise(logits.size(), rng);
  GumbelDraw d;
  d.sample.resize(logits.size());
  double mx = -INFINITY;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    d.sample[i] = (logits[i] + noise[i]) / tau;
    if (d.sample[i] > mx) {
      mx = d.sample[i];
      d.index = i;
    }
  }
  double z = 0.0;
  for (double& x : d.sample) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : d.sample) x /= z;
  if (hard) {
    std::fill(d.sample.begin(), d.sample.end(), 0.0);
    d.sample[d.index] = 1.0;
  }
  return d;
}

}  // namespace vrdial::nn
