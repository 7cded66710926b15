#pragma once

// Residual regressor: fully connected network with rectifier hidden layers
// and a rectifier output, so predictions are never negative.
//
// Binary model file (all integers and floats little-endian):
//   "LOHA1"                                 5 magic bytes
//   u32 L                                   number of layer sizes
//   u32 sizes[L]                            input, hidden..., output (= 1)
//   per layer l = 1..L-1:
//     f64 W[sizes[l]][sizes[l-1]]           row-major
//     f64 b[sizes[l]]

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loha/error.hpp"
#include "loha/random.hpp"

namespace loha {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 30;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  std::vector<int> hidden = {64, 64};
  /// Weight each sample's loss by alpha; false trains every sample at weight 1.
  bool use_alpha = true;
};

class ResidualModel {
 public:
  ResidualModel() = default;

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  ResidualModel(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2 || sizes_.back() != 1) throw ValidationError("model needs >= 2 layer sizes ending in 1");
    for (int s : sizes_)
      if (s <= 0) throw ValidationError("layer sizes must be positive");
    Rng rng(seed);
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      const int in = sizes_[l - 1], out = sizes_[l];
      const double limit = std::sqrt(6.0 / (in + out));
      Eigen::MatrixXd w(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-limit, limit);
      weights_.push_back(std::move(w));
      biases_.push_back(Eigen::VectorXd::Zero(out));
    }
  }

  const std::vector<int>& layer_sizes() const noexcept { return sizes_; }
  int input_size() const noexcept { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t layers() const noexcept { return weights_.size(); }

  Eigen::MatrixXd& weight(std::size_t l) { return weights_[l]; }
  const Eigen::MatrixXd& weight(std::size_t l) const { return weights_[l]; }
  Eigen::VectorXd& bias(std::size_t l) { return biases_[l]; }
  const Eigen::VectorXd& bias(std::size_t l) const { return biases_[l]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  /// Parameters in file order: per layer W row-major then b.
  Eigen::VectorXd parameters() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) p[k++] = weights_[l](r, c);
      for (Eigen::Index r = 0; r < biases_[l].size(); ++r) p[k++] = biases_[l][r];
    }
    return p;
  }

  void set_parameters(const Eigen::VectorXd& p) {
    if (static_cast<std::size_t>(p.size()) != parameter_count()) throw ValidationError("parameter count mismatch");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
        for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = p[k++];
      for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l][r] = p[k++];
    }
  }

  /// Output pre-activation for one input.
  double raw(const Eigen::VectorXd& x) const {
    check_input(x.size());
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l) a = (weights_[l] * a + biases_[l]).cwiseMax(0.0);
    return (weights_.back() * a + biases_.back())[0];
  }

  double predict(const Eigen::VectorXd& x) const { return std::max(0.0, raw(x)); }

  /// Predictions for the columns of X.
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& X) const {
    check_input(X.rows());
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l)
      a = ((weights_[l] * a).colwise() + biases_[l]).cwiseMax(0.0);
    Eigen::MatrixXd z = (weights_.back() * a).colwise() + biases_.back();
    return z.row(0).transpose().cwiseMax(0.0);
  }

  /// Mean of w_i * (predict(x_i) - t_i)^2 over the columns of X; accumulates
  /// its gradient into `grads` (same layout as parameters()) when non-null.
  double loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets, const Eigen::VectorXd& w,
                           Eigen::VectorXd* grads) const {
    check_input(X.rows());
    const auto n = X.cols();
    std::vector<Eigen::MatrixXd> acts;  // post-activation per layer, acts[0] = X
    acts.reserve(weights_.size() + 1);
    acts.push_back(X);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = (weights_[l] * acts.back()).colwise() + biases_[l];
      acts.push_back(z.cwiseMax(0.0));
    }
    const Eigen::VectorXd pred = acts.back().row(0).transpose();
    const Eigen::VectorXd err = pred - targets;
    const double loss = (w.array() * err.array().square()).sum() / static_cast<double>(n);
    if (!grads) return loss;

    if (grads->size() != static_cast<Eigen::Index>(parameter_count()))
      *grads = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count()));
    // dL/d(pre-activation) of the output; rectifier derivative taken as 0 at 0.
    Eigen::MatrixXd delta(1, n);
    for (Eigen::Index i = 0; i < n; ++i)
      delta(0, i) = pred[i] > 0.0 ? 2.0 * w[i] * err[i] / static_cast<double>(n) : 0.0;

    std::vector<Eigen::Index> offsets(weights_.size());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      offsets[l] = k;
      k += weights_[l].size() + biases_[l].size();
    }
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const Eigen::MatrixXd gw = delta * acts[l].transpose();
      const Eigen::VectorXd gb = delta.rowwise().sum();
      Eigen::Index o = offsets[l];
      for (Eigen::Index r = 0; r < gw.rows(); ++r)
        for (Eigen::Index c = 0; c < gw.cols(); ++c) (*grads)[o++] += gw(r, c);
      for (Eigen::Index r = 0; r < gb.size(); ++r) (*grads)[o++] += gb[r];
      if (l == 0) break;
      delta = (weights_[l].transpose() * delta).cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
    return loss;
  }

  friend bool operator==(const ResidualModel& a, const ResidualModel& b) {
    if (a.sizes_ != b.sizes_) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l)
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    return true;
  }

  void save(std::ostream& out) const {
    out.write("LOHA1", 5);
    put_u32(out, static_cast<std::uint32_t>(sizes_.size()));
    for (int s : sizes_) put_u32(out, static_cast<std::uint32_t>(s));
    const Eigen::VectorXd p = parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) put_f64(out, p[i]);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open model for writing: " + path);
    save(out);
    if (!out) throw IoError("failed writing model: " + path);
  }

  static ResidualModel load(std::istream& in) {
    char magic[5];
    if (!in.read(magic, 5) || std::memcmp(magic, "LOHA1", 5) != 0) throw IoError("not a LOHA1 model file");
    const std::uint32_t count = get_u32(in);
    if (count < 2 || count > 64) throw IoError("bad layer count in model file");
    std::vector<int> sizes(count);
    for (auto& s : sizes) {
      const std::uint32_t v = get_u32(in);
      if (v == 0 || v > (1u << 24)) throw IoError("bad layer size in model file");
      s = static_cast<int>(v);
    }
    ResidualModel m(sizes, 0);
    Eigen::VectorXd p(static_cast<Eigen::Index>(m.parameter_count()));
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = get_f64(in);
    m.set_parameters(p);
    return m;
  }

  static ResidualModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model: " + path);
    return load(in);
  }

 private:
  void check_input(Eigen::Index n) const {
    if (n != input_size())
      throw ValidationError("model expects " + std::to_string(input_size()) + " features, got " + std::to_string(n));
  }

  template <class T>
  static T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
      unsigned char b[sizeof(T)];
      std::memcpy(b, &v, sizeof(T));
      std::reverse(b, b + sizeof(T));
      std::memcpy(&v, b, sizeof(T));
    }
    return v;
  }
  static void put_u32(std::ostream& out, std::uint32_t v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void put_f64(std::ostream& out, double v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated model file");
    return to_le(v);
  }
  static double get_f64(std::istream& in) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated model file");
    return to_le(v);
  }

  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Featurized training set: one column per sample.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  Eigen::VectorXd alphas;

  Eigen::Index size() const noexcept { return features.cols(); }
};

struct TrainResult {
  ResidualModel model;
  std::vector<double> loss_history;  ///< full-dataset weighted loss after each epoch
};

/// Minimises mean alpha_i * (predict(x_i) - t_i)^2 with mini-batches.
/// Shuffling and initialisation come from `config.seed`; the output bias
/// starts at the alpha-weighted mean target. A compatible `warm_start` model
/// replaces the random initialisation.
inline TrainResult train(const Dataset& data, const TrainConfig& config, const ResidualModel* warm_start = nullptr) {
  const Eigen::Index n = data.size();
  if (n == 0) throw ValidationError("empty dataset");
  if (config.batch_size < 1 || config.epochs < 0 || !(config.learning_rate > 0.0))
    throw ValidationError("invalid training hyperparameters");

  const Eigen::VectorXd weights = config.use_alpha ? data.alphas : Eigen::VectorXd::Ones(n);
  std::vector<int> sizes{static_cast<int>(data.features.rows())};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);

  TrainResult result{ResidualModel(sizes, derive_seed(config.seed, "init")), {}};
  ResidualModel& model = result.model;
  if (warm_start) {
    if (warm_start->layer_sizes() != sizes) throw ValidationError("warm-start model has different layer sizes");
    model = *warm_start;
  } else {
    const double wsum = weights.sum();
    model.bias(model.layers() - 1)[0] = wsum > 0.0 ? weights.dot(data.targets) / wsum : 0.0;
  }

  const Eigen::Index P = static_cast<Eigen::Index>(model.parameter_count());
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(P), v = Eigen::VectorXd::Zero(P), grad(P);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(config.seed, "shuffle"));

  Eigen::MatrixXd xb;
  Eigen::VectorXd tb, wb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch_size, n - start);
      xb.resize(data.features.rows(), len);
      tb.resize(len);
      wb.resize(len);
      for (Eigen::Index j = 0; j < len; ++j) {
        const auto idx = order[static_cast<std::size_t>(start + j)];
        xb.col(j) = data.features.col(idx);
        tb[j] = data.targets[idx];
        wb[j] = weights[idx];
      }
      grad.setZero();
      model.loss_and_gradient(xb, tb, wb, &grad);
      ++step;
      if (config.optimizer == Optimizer::Adam) {
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        params.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      } else {
        params -= config.learning_rate * grad;
      }
      model.set_parameters(params);
    }
    result.loss_history.push_back(model.loss_and_gradient(data.features, data.targets, weights, nullptr));
  }
  return result;
}

/// Max relative error between analytic gradients of alpha * (predict(x) - t)^2
/// and central finite differences with step 1e-5. Relative error per
/// parameter is |a - n| / max(|a|, |n|, 1e-6).
inline double gradient_check(const ResidualModel& model, const Eigen::VectorXd& x, double target, double alpha) {
  Eigen::MatrixXd X = x;
  Eigen::VectorXd t = Eigen::VectorXd::Constant(1, target);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(1, alpha);
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  model.loss_and_gradient(X, t, w, &analytic);

  ResidualModel probe = model;
  Eigen::VectorXd p = model.parameters();
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    probe.set_parameters(p);
    const double up = probe.loss_and_gradient(X, t, w, nullptr);
    p[i] = orig - h;
    probe.set_parameters(p);
    const double down = probe.loss_and_gradient(X, t, w, nullptr);
    p[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace loha
