// Copyright 2026 The TSBD Lab Authors. All Rights Reserved.
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

// Dense feed-forward classifier with manual backpropagation.
//
// A layer holds a K x I weight matrix: row k is neuron k, column i is its
// i-th incoming subweight. All arithmetic reduces in double precision in a
// fixed sequential order and stores float32, so every pass is bit-exact
// across runs.

#ifndef TSBD_NETWORK_HPP_
#define TSBD_NETWORK_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tsbd/tensor.hpp"

namespace tsbd {

using Label = std::uint32_t;

enum class Activation : std::uint8_t { kReLU = 0, kIdentity = 1 };

struct Layer {
  Tensor2D weights;  // neurons x fan-in
  std::vector<float> biases;
  Activation activation = Activation::kReLU;

  std::size_t neurons() const noexcept { return weights.rows(); }
  std::size_t fan_in() const noexcept { return weights.cols(); }

  bool operator==(const Layer&) const = default;
};

/// Ordered stack of dense layers. Construction validates chaining, bias
/// lengths, finiteness and that the last layer emits raw logits.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers);

  std::size_t depth() const noexcept { return layers_.size(); }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  Layer& layer(std::size_t l) { return layers_.at(l); }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::span<Layer> layers() noexcept { return layers_; }

  std::size_t input_width() const;
  std::size_t output_width() const;
  /// Layers whose neurons are candidates for ranking (all but the last).
  std::size_t hidden_layer_count() const noexcept {
    return layers_.empty() ? 0 : layers_.size() - 1;
  }
  std::size_t hidden_neuron_count() const;
  std::size_t parameter_count() const;

  bool operator==(const Network&) const = default;

 private:
  std::vector<Layer> layers_;
};

struct LayerGradient {
  Tensor2D weights;
  std::vector<float> biases;

  bool operator==(const LayerGradient&) const = default;
};

/// Gradient of a scalar loss, shape-congruent with some Network.
struct Gradients {
  std::vector<LayerGradient> layers;

  bool operator==(const Gradients&) const = default;
};

Gradients zero_gradients(const Network& net);

struct Batch {
  Tensor2D inputs;  // samples x features
  std::vector<Label> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct ForwardResult {
  /// Post-activation output of every layer; the last entry is the logits.
  std::vector<Tensor2D> activations;

  const Tensor2D& logits() const { return activations.back(); }
};

ForwardResult forward(const Network& net, const Tensor2D& inputs);
inline ForwardResult forward(const Network& net, const Batch& batch) {
  return forward(net, batch.inputs);
}

/// Mean softmax cross-entropy. Softmax uses max-subtraction.
double loss_ce(const Tensor2D& logits, std::span<const Label> labels);

struct BackwardResult {
  Gradients gradients;
  double loss = 0.0;
};

/// Exact gradient of the mean cross-entropy over `batch`.
BackwardResult backward(const Network& net, const Batch& batch);

/// Index of the largest entry per row; ties go to the lowest index.
std::vector<Label> argmax_rows(const Tensor2D& logits);

enum class Direction { kDescend, kAscend };

/// theta <- theta -/+ lr * g, in place.
void apply_sgd(Network& net, const Gradients& grads, float lr, Direction direction);

/// Value-returning form of apply_sgd.
Network sgd_step(Network net, const Gradients& grads, float lr, Direction direction);

// Flat views over every parameter, in layer order: weights row-major, then
// biases. Used where an update treats the network as one vector.
std::vector<float> flatten(const Network& net);
std::vector<float> flatten(const Gradients& grads);
void assign_flat(Network& net, std::span<const float> values);
Gradients unflatten_gradients(const Network& shape, std::span<const float> values);

/// L2 norm over all gradient entries jointly.
double global_l2_norm(const Gradients& grads);

bool all_finite(const Gradients& grads);
void require_congruent(const Network& net, const Gradients& grads);
void require_congruent(const Network& a, const Network& b);

}  // namespace tsbd

#endif  // TSBD_NETWORK_HPP_
