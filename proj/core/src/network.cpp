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

#include "tsbd/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsbd {

namespace {

bool finite_span(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("Network: needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.biases.size() != layer.weights.rows()) {
      throw DimensionError("Network: layer " + std::to_string(l) +
                           " bias length does not equal neuron count");
    }
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw DimensionError("Network: layer " + std::to_string(l) + " is empty");
    }
    if (l > 0 && layer.fan_in() != layers_[l - 1].neurons()) {
      throw DimensionError("Network: layer " + std::to_string(l) +
                           " fan-in does not match previous layer width");
    }
    if (!finite_span(layer.weights.values()) || !finite_span(layer.biases)) {
      throw DomainError("Network: layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  if (layers_.back().activation != Activation::kIdentity) {
    throw DimensionError("Network: final layer must use the identity activation");
  }
}

std::size_t Network::input_width() const { return layers_.at(0).fan_in(); }

std::size_t Network::output_width() const { return layers_.back().neurons(); }

std::size_t Network::hidden_neuron_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) n += layers_[l].neurons();
  return n;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weights.size() + layer.biases.size();
  return n;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.layers.reserve(net.depth());
  for (const Layer& layer : net.layers()) {
    g.layers.push_back({Tensor2D(layer.neurons(), layer.fan_in()),
                        std::vector<float>(layer.neurons(), 0.0f)});
  }
  return g;
}

ForwardResult forward(const Network& net, const Tensor2D& inputs) {
  if (inputs.cols() != net.input_width()) {
    throw DimensionError("forward: input width " + std::to_string(inputs.cols()) +
                         " does not match network fan-in " +
                         std::to_string(net.input_width()));
  }
  ForwardResult out;
  out.activations.reserve(net.depth());
  const Tensor2D* prev = &inputs;
  for (const Layer& layer : net.layers()) {
    Tensor2D act(prev->rows(), layer.neurons());
    for (std::size_t n = 0; n < prev->rows(); ++n) {
      auto x = prev->row(n);
      for (std::size_t k = 0; k < layer.neurons(); ++k) {
        auto w = layer.weights.row(k);
        double z = layer.biases[k];
        for (std::size_t i = 0; i < w.size(); ++i) z += static_cast<double>(w[i]) * x[i];
        if (layer.activation == Activation::kReLU && z < 0.0) z = 0.0;
        act(n, k) = static_cast<float>(z);
      }
    }
    out.activations.push_back(std::move(act));
    prev = &out.activations.back();
  }
  return out;
}

namespace {

// Row-wise softmax probabilities in double; returns the per-row loss sum.
double softmax_rows(const Tensor2D& logits, std::span<const Label> labels,
                    std::vector<double>* probs) {
  const std::size_t classes = logits.cols();
  double total = 0.0;
  if (probs) probs->assign(logits.size(), 0.0);
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    auto z = logits.row(n);
    if (labels[n] >= classes) {
      throw DomainError("loss_ce: label " + std::to_string(labels[n]) +
                        " out of range for " + std::to_string(classes) + " classes");
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (float v : z) denom += std::exp(static_cast<double>(v) - zmax);
    const double log_denom = std::log(denom);
    total += -(static_cast<double>(z[labels[n]]) - zmax - log_denom);
    if (probs) {
      for (std::size_t c = 0; c < classes; ++c) {
        (*probs)[n * classes + c] = std::exp(static_cast<double>(z[c]) - zmax - log_denom);
      }
    }
  }
  return total;
}

}  // namespace

double loss_ce(const Tensor2D& logits, std::span<const Label> labels) {
  if (logits.rows() != labels.size()) {
    throw DimensionError("loss_ce: logits rows do not match label count");
  }
  if (labels.empty()) throw DomainError("loss_ce: empty batch");
  return softmax_rows(logits, labels, nullptr) / static_cast<double>(labels.size());
}

BackwardResult backward(const Network& net, const Batch& batch) {
  if (batch.inputs.rows() != batch.labels.size()) {
    throw DimensionError("backward: inputs rows do not match label count");
  }
  if (batch.labels.empty()) throw DomainError("backward: empty batch");
  const ForwardResult fwd = forward(net, batch.inputs);
  const std::size_t samples = batch.size();
  const double inv_n = 1.0 / static_cast<double>(samples);

  BackwardResult result;
  std::vector<double> delta;
  result.loss = softmax_rows(fwd.logits(), batch.labels, &delta) * inv_n;
  const std::size_t classes = net.output_width();
  for (std::size_t n = 0; n < samples; ++n) {
    delta[n * classes + batch.labels[n]] -= 1.0;
  }
  for (double& d : delta) d *= inv_n;

  result.gradients = zero_gradients(net);
  for (std::size_t l = net.depth(); l-- > 0;) {
    const Layer& layer = net.layer(l);
    const Tensor2D& input = l == 0 ? batch.inputs : fwd.activations[l - 1];
    const std::size_t width = layer.neurons();
    const std::size_t fan_in = layer.fan_in();
    LayerGradient& g = result.gradients.layers[l];

    std::vector<double> gw(width * fan_in, 0.0);
    std::vector<double> gb(width, 0.0);
    for (std::size_t n = 0; n < samples; ++n) {
      auto x = input.row(n);
      for (std::size_t k = 0; k < width; ++k) {
        const double d = delta[n * width + k];
        if (d == 0.0) continue;
        gb[k] += d;
        double* row = gw.data() + k * fan_in;
        for (std::size_t i = 0; i < fan_in; ++i) row[i] += d * x[i];
      }
    }
    for (std::size_t j = 0; j < gw.size(); ++j) g.weights.values()[j] = static_cast<float>(gw[j]);
    for (std::size_t k = 0; k < width; ++k) g.biases[k] = static_cast<float>(gb[k]);

    if (l == 0) break;
    // Propagate through the weights and the previous layer's ReLU.
    const Layer& below = net.layer(l - 1);
    std::vector<double> next(samples * fan_in, 0.0);
    for (std::size_t n = 0; n < samples; ++n) {
      double* out = next.data() + n * fan_in;
      for (std::size_t k = 0; k < width; ++k) {
        const double d = delta[n * width + k];
        if (d == 0.0) continue;
        auto w = layer.weights.row(k);
        for (std::size_t i = 0; i < fan_in; ++i) out[i] += d * w[i];
      }
      if (below.activation == Activation::kReLU) {
        auto a = input.row(n);
        for (std::size_t i = 0; i < fan_in; ++i) {
          if (!(a[i] > 0.0f)) out[i] = 0.0;
        }
      }
    }
    delta = std::move(next);
  }
  return result;
}

std::vector<Label> argmax_rows(const Tensor2D& logits) {
  std::vector<Label> out(logits.rows(), 0);
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    auto z = logits.row(n);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    out[n] = static_cast<Label>(best);
  }
  return out;
}

void require_congruent(const Network& net, const Gradients& grads) {
  if (grads.layers.size() != net.depth()) {
    throw DimensionError("gradients depth does not match network");
  }
  for (std::size_t l = 0; l < net.depth(); ++l) {
    if (!grads.layers[l].weights.same_shape(net.layer(l).weights) ||
        grads.layers[l].biases.size() != net.layer(l).biases.size()) {
      throw DimensionError("gradients layer " + std::to_string(l) + " shape mismatch");
    }
  }
}

void require_congruent(const Network& a, const Network& b) {
  if (a.depth() != b.depth()) throw DimensionError("networks differ in depth");
  for (std::size_t l = 0; l < a.depth(); ++l) {
    if (!a.layer(l).weights.same_shape(b.layer(l).weights) ||
        a.layer(l).biases.size() != b.layer(l).biases.size()) {
      throw DimensionError("networks differ in shape at layer " + std::to_string(l));
    }
  }
}

void apply_sgd(Network& net, const Gradients& grads, float lr, Direction direction) {
  if (!(lr > 0.0f)) throw DomainError("sgd_step: learning rate must be positive");
  require_congruent(net, grads);
  const float step = direction == Direction::kDescend ? -lr : lr;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    Layer& layer = net.layer(l);
    const LayerGradient& g = grads.layers[l];
    auto w = layer.weights.values();
    auto gw = g.weights.values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (gw[j] != 0.0f) w[j] += step * gw[j];
    }
    for (std::size_t k = 0; k < layer.biases.size(); ++k) {
      if (g.biases[k] != 0.0f) layer.biases[k] += step * g.biases[k];
    }
  }
}

Network sgd_step(Network net, const Gradients& grads, float lr, Direction direction) {
  apply_sgd(net, grads, lr, direction);
  return net;
}

std::vector<float> flatten(const Network& net) {
  std::vector<float> out;
  out.reserve(net.parameter_count());
  for (const Layer& layer : net.layers()) {
    auto w = layer.weights.values();
    out.insert(out.end(), w.begin(), w.end());
    out.insert(out.end(), layer.biases.begin(), layer.biases.end());
  }
  return out;
}

std::vector<float> flatten(const Gradients& grads) {
  std::vector<float> out;
  for (const LayerGradient& g : grads.layers) {
    auto w = g.weights.values();
    out.insert(out.end(), w.begin(), w.end());
    out.insert(out.end(), g.biases.begin(), g.biases.end());
  }
  return out;
}

void assign_flat(Network& net, std::span<const float> values) {
  if (values.size() != net.parameter_count()) {
    throw DimensionError("assign_flat: value count does not match parameter count");
  }
  std::size_t pos = 0;
  for (Layer& layer : net.layers()) {
    auto w = layer.weights.values();
    std::copy_n(values.begin() + pos, w.size(), w.begin());
    pos += w.size();
    std::copy_n(values.begin() + pos, layer.biases.size(), layer.biases.begin());
    pos += layer.biases.size();
  }
}

Gradients unflatten_gradients(const Network& shape, std::span<const float> values) {
  if (values.size() != shape.parameter_count()) {
    throw DimensionError("unflatten_gradients: value count does not match parameter count");
  }
  Gradients g = zero_gradients(shape);
  std::size_t pos = 0;
  for (LayerGradient& lg : g.layers) {
    auto w = lg.weights.values();
    std::copy_n(values.begin() + pos, w.size(), w.begin());
    pos += w.size();
    std::copy_n(values.begin() + pos, lg.biases.size(), lg.biases.begin());
    pos += lg.biases.size();
  }
  return g;
}

double global_l2_norm(const Gradients& grads) {
  double sum = 0.0;
  for (const LayerGradient& g : grads.layers) {
    for (float v : g.weights.values()) sum += static_cast<double>(v) * v;
    for (float v : g.biases) sum += static_cast<double>(v) * v;
  }
  return std::sqrt(sum);
}

bool all_finite(const Gradients& grads) {
  return std::all_of(grads.layers.begin(), grads.layers.end(), [](const LayerGradient& g) {
    return finite_span(g.weights.values()) && finite_span(g.biases);
  });
}

}  // namespace tsbd
