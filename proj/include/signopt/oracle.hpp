#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "signopt/errors.hpp"
#include "signopt/vec.hpp"

namespace signopt {

/// Distinguished "no boundary crossing along this ray" value for g.
inline constexpr double kNoCrossing = std::numeric_limits<double>::infinity();

struct Label {
  std::size_t value = 0;

  constexpr Label() = default;
  constexpr explicit Label(std::size_t v) : value(v) {}
  friend constexpr bool operator==(Label, Label) = default;
};

struct Example {
  Vector x;
  Label y;
};

namespace detail {

// Argmax with ties resolved toward the smallest index.
inline Label argmax_label(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return Label{best};
}

}  // namespace detail

/// Multiclass affine classifier: predicts argmax_k (W_k . x + b_k).
class LinearModel {
 public:
  LinearModel(std::size_t num_classes, std::size_t dim, Vector weights, Vector bias)
      : classes_(num_classes), dim_(dim), weights_(std::move(weights)), bias_(std::move(bias)) {
    if (classes_ < 2) throw ShapeError("linear model needs at least 2 classes");
    if (dim_ == 0) throw ShapeError("linear model needs a positive input dimension");
    if (weights_.size() != classes_ * dim_) throw ShapeError("linear model weight count does not match K*d");
    if (bias_.size() != classes_) throw ShapeError("linear model bias count does not match K");
    if (!vec::all_finite(weights_) || !vec::all_finite(bias_))
      throw ShapeError("linear model has non-finite entries");
  }

  std::size_t input_dim() const { return dim_; }
  std::size_t num_classes() const { return classes_; }

  std::span<const double> row(std::size_t k) const { return {weights_.data() + k * dim_, dim_}; }
  const Vector& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }

  Vector logits(std::span<const double> x) const {
    Vector out(classes_);
    for (std::size_t k = 0; k < classes_; ++k) out[k] = vec::dot(row(k), x) + bias_[k];
    return out;
  }

  Label classify(std::span<const double> x) const { return detail::argmax_label(logits(x)); }

 private:
  std::size_t classes_;
  std::size_t dim_;
  Vector weights_;  // row-major K x d
  Vector bias_;
};

struct DenseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector weights;  // row-major rows x cols
  Vector bias;
};

struct ReluLayer {};

using Layer = std::variant<DenseLayer, ReluLayer>;

/// Feed-forward network of dense and ReLU layers. The final dense layer
/// produces one logit per class.
class MlpModel {
 public:
  MlpModel(std::vector<Layer> layers, std::size_t num_classes)
      : layers_(std::move(layers)), classes_(num_classes) {
    if (classes_ < 2) throw ShapeError("model needs at least 2 classes");
    std::optional<std::size_t> width;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto* dense = std::get_if<DenseLayer>(&layers_[i]);
      if (!dense) continue;
      if (dense->rows == 0 || dense->cols == 0)
        throw ShapeError("dense layer " + std::to_string(i) + " has a zero dimension");
      if (dense->weights.size() != dense->rows * dense->cols)
        throw ShapeError("dense layer " + std::to_string(i) + " weight count does not match rows*cols");
      if (dense->bias.size() != dense->rows)
        throw ShapeError("dense layer " + std::to_string(i) + " bias count does not match rows");
      if (!vec::all_finite(dense->weights) || !vec::all_finite(dense->bias))
        throw ShapeError("dense layer " + std::to_string(i) + " has non-finite entries");
      if (!width) {
        input_dim_ = dense->cols;
      } else if (*width != dense->cols) {
        throw ShapeError("dense layer " + std::to_string(i) + " expects " + std::to_string(dense->cols) +
                         " inputs but previous layer produces " + std::to_string(*width));
      }
      width = dense->rows;
    }
    if (!width) throw ShapeError("model has no dense layer");
    if (*width != classes_)
      throw ShapeError("final dense layer produces " + std::to_string(*width) + " outputs, expected " +
                       std::to_string(classes_));
  }

  /// A linear model is a single dense layer.
  explicit MlpModel(const LinearModel& m)
      : MlpModel({DenseLayer{m.num_classes(), m.input_dim(), m.weights(), m.bias()}}, m.num_classes()) {}

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return classes_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Vector logits(std::span<const double> x) const {
    Vector cur(x.begin(), x.end());
    for (const auto& layer : layers_) {
      if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
        Vector next(dense->rows);
        for (std::size_t r = 0; r < dense->rows; ++r)
          next[r] = vec::dot({dense->weights.data() + r * dense->cols, dense->cols}, cur) + dense->bias[r];
        cur = std::move(next);
      } else {
        for (auto& v : cur) v = std::max(v, 0.0);
      }
    }
    return cur;
  }

  Label classify(std::span<const double> x) const { return detail::argmax_label(logits(x)); }

 private:
  std::vector<Layer> layers_;
  std::size_t classes_;
  std::size_t input_dim_ = 0;
};

/// Returns the affine model when the network is exactly one dense layer.
inline std::optional<LinearModel> as_linear(const MlpModel& m) {
  if (m.layers().size() != 1) return std::nullopt;
  const auto* dense = std::get_if<DenseLayer>(&m.layers().front());
  if (!dense) return std::nullopt;
  return LinearModel(dense->rows, dense->cols, dense->weights, dense->bias);
}

template <class M>
concept Classifier = requires(const M& m, std::span<const double> x) {
  { m.input_dim() } -> std::convertible_to<std::size_t>;
  { m.num_classes() } -> std::convertible_to<std::size_t>;
  { m.classify(x) } -> std::same_as<Label>;
};

class QueryCounter {
 public:
  QueryCounter() = default;
  explicit QueryCounter(std::optional<std::uint64_t> budget) : budget_(budget) {}

  std::uint64_t count() const { return count_; }
  std::optional<std::uint64_t> budget() const { return budget_; }
  void set_budget(std::optional<std::uint64_t> budget) { budget_ = budget; }

  std::uint64_t remaining() const {
    if (!budget_) return std::numeric_limits<std::uint64_t>::max();
    return *budget_ > count_ ? *budget_ - count_ : 0;
  }

  void charge() {
    if (budget_ && count_ >= *budget_) throw BudgetExhausted();
    ++count_;
  }

 private:
  std::uint64_t count_ = 0;
  std::optional<std::uint64_t> budget_;
};

/// Metered hard-label access to a classifier. Holds a non-owning reference to
/// the model; each attack run owns its own oracle and counter.
template <Classifier Model>
class HardLabelOracle {
 public:
  explicit HardLabelOracle(const Model& model, std::optional<std::uint64_t> budget = std::nullopt)
      : model_(&model), counter_(budget) {}

  Label predict(std::span<const double> x) {
    if (x.size() != model_->input_dim())
      throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", model expects " +
                              std::to_string(model_->input_dim()));
    counter_.charge();
    return model_->classify(x);
  }

  // Out-of-ledger query, used only to confirm a finished attack's output.
  Label predict_unmetered(std::span<const double> x) const {
    if (x.size() != model_->input_dim()) throw DimensionMismatch("input dimension does not match model");
    return model_->classify(x);
  }

  std::size_t input_dim() const { return model_->input_dim(); }
  std::size_t num_classes() const { return model_->num_classes(); }
  std::uint64_t queries() const { return counter_.count(); }
  QueryCounter& counter() { return counter_; }
  const QueryCounter& counter() const { return counter_; }
  const Model& model() const { return *model_; }

 private:
  const Model* model_;
  QueryCounter counter_;
};

template <class O>
concept LabelOracle = requires(O& o, const O& co, std::span<const double> x) {
  { o.predict(x) } -> std::same_as<Label>;
  { co.predict_unmetered(x) } -> std::same_as<Label>;
  { co.input_dim() } -> std::convertible_to<std::size_t>;
  { co.queries() } -> std::convertible_to<std::uint64_t>;
  { o.counter() } -> std::same_as<QueryCounter&>;
};

struct MinDistortion {
  double distance = kNoCrossing;
  Vector direction;  // unit vector pointing from x0 to the nearest boundary
  Label boundary_class;
};

namespace detail {

inline void require_correct(const LinearModel& model, std::span<const double> x0, Label y0) {
  if (x0.size() != model.input_dim()) throw DimensionMismatch("x0 dimension does not match model");
  if (y0.value >= model.num_classes()) throw PreconditionError("label out of range");
  if (model.classify(x0) != y0) throw PreconditionError("x0 is already misclassified");
}

}  // namespace detail

/// Exact minimum L2 distance from x0 to the region where the model stops
/// predicting y0: min over j != y0 of margin_j / ||W_y0 - W_j||.
inline MinDistortion closed_form_min_distortion(const LinearModel& model, std::span<const double> x0,
                                                Label y0) {
  detail::require_correct(model, x0, y0);
  const std::size_t d = model.input_dim();
  MinDistortion best;
  Vector w(d);
  for (std::size_t j = 0; j < model.num_classes(); ++j) {
    if (j == y0.value) continue;
    for (std::size_t i = 0; i < d; ++i) w[i] = model.row(y0.value)[i] - model.row(j)[i];
    const double gap = vec::dot(w, x0) + model.bias()[y0.value] - model.bias()[j];
    const double n = vec::norm(w);
    if (n == 0.0) continue;  // parallel classes never swap order
    const double dist = gap / n;
    if (dist < best.distance) {
      best.distance = dist;
      best.direction = w;
      vec::scale_in_place(best.direction, -1.0 / n);
      best.boundary_class = Label{j};
    }
  }
  return best;
}

/// Exact g(theta) for a linear model: first lambda > 0 at which
/// x0 + lambda * theta/||theta|| leaves class y0, or kNoCrossing.
inline double closed_form_g(const LinearModel& model, std::span<const double> x0, Label y0,
                            std::span<const double> theta) {
  detail::require_correct(model, x0, y0);
  if (theta.size() != model.input_dim()) throw DimensionMismatch("theta dimension does not match model");
  const double tn = vec::norm(theta);
  if (!(tn > 0.0)) throw PreconditionError("theta must be nonzero");
  const std::size_t d = model.input_dim();
  double best = kNoCrossing;
  for (std::size_t j = 0; j < model.num_classes(); ++j) {
    if (j == y0.value) continue;
    double gap = model.bias()[y0.value] - model.bias()[j];
    double rate = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double wi = model.row(y0.value)[i] - model.row(j)[i];
      gap += wi * x0[i];
      rate -= wi * theta[i];
    }
    rate /= tn;
    if (rate > 0.0) best = std::min(best, gap / rate);
  }
  return best;
}

}  // namespace signopt
