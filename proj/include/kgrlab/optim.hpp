// Copyright 2026 The kgrlab Authors.
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

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kgrlab/error.hpp"
#include "kgrlab/model.hpp"

namespace kgrlab {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

namespace detail {

// Bias-corrected Adam on one block; `t` is the already-incremented step.
inline void adam_update(std::span<double> params, std::span<const double> grads, double* m, double* v,
                        std::uint64_t t, double lr) {
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grads[i];
    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEpsilon);
  }
}

}  // namespace detail

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(ErrorCode::kShapeMismatch, "adam_step");
  ++state.t;
  detail::adam_update(params, grads, state.m.data(), state.v.data(), state.t, lr);
}

// Adam over every parameter block of a Model, with one shared step counter.
class ModelAdam {
 public:
  explicit ModelAdam(const Model& model) : state_(model.parameter_count()) {}

  void step(Model& model, Model& grad, double lr) {
    auto params = model.parameter_blocks();
    auto grads = grad.parameter_blocks();
    if (params.size() != grads.size()) throw Error(ErrorCode::kShapeMismatch, "model/gradient layout");
    ++state_.t;
    std::size_t offset = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
      if (params[b].size() != grads[b].size() || offset + params[b].size() > state_.m.size())
        throw Error(ErrorCode::kShapeMismatch, "model/gradient block");
      detail::adam_update(params[b], grads[b], state_.m.data() + offset, state_.v.data() + offset, state_.t, lr);
      offset += params[b].size();
    }
  }

  const AdamState& state() const { return state_; }

 private:
  AdamState state_;
};

}  // namespace kgrlab
