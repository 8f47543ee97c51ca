#pragma once

#include <cmath>
#include <vector>

#include "signopt/errors.hpp"
#include "signopt/oracle.hpp"
#include "signopt/random.hpp"

namespace signopt {

/// Gaussian weights, small Gaussian biases.
inline LinearModel random_linear_model(std::size_t dim, std::size_t classes, Rng& rng) {
  if (dim == 0) throw PreconditionError("dimension must be positive");
  if (classes < 2) throw PreconditionError("need at least 2 classes");
  auto w = gaussian_vector(classes * dim, rng);
  auto b = gaussian_vector(classes, rng);
  for (auto& v : b) v *= 0.1;
  return LinearModel(classes, dim, std::move(w), std::move(b));
}

/// dense(hidden x dim) -> relu -> dense(classes x hidden), He-scaled weights.
inline MlpModel random_mlp(std::size_t dim, std::size_t hidden, std::size_t classes, Rng& rng) {
  if (dim == 0 || hidden == 0) throw PreconditionError("layer sizes must be positive");
  if (classes < 2) throw PreconditionError("need at least 2 classes");
  auto layer = [&](std::size_t rows, std::size_t cols) {
    DenseLayer l{rows, cols, gaussian_vector(rows * cols, rng), gaussian_vector(rows, rng)};
    const double s = std::sqrt(2.0 / static_cast<double>(cols));
    for (auto& v : l.weights) v *= s;
    for (auto& v : l.bias) v *= 0.1;
    return l;
  };
  std::vector<Layer> layers;
  layers.emplace_back(layer(hidden, dim));
  layers.emplace_back(ReluLayer{});
  layers.emplace_back(layer(classes, hidden));
  return MlpModel(std::move(layers), classes);
}

/// Standard-normal points labeled by the model itself.
template <Classifier Model>
std::vector<Example> labeled_points(const Model& model, std::size_t n, Rng& rng) {
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = gaussian_vector(model.input_dim(), rng);
    const Label y = model.classify(x);
    out.push_back({std::move(x), y});
  }
  return out;
}

}  // namespace signopt
