#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "edgecache/types.hpp"

namespace edgecache {

/// FTRL-Proximal hyperparameters. Zero regularization is allowed so the
/// unregularized FTRL/OGD equivalence can be exercised.
struct Hyperparams {
  double alpha = 0.1;
  double beta = 1.0;
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;

  /// Throws ConfigError unless alpha > 0 and beta, lambda1, lambda2 >= 0.
  void validate() const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct Sample {
  FeatureVector x;
  int y = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Running mean of the logistic loss since the last retrain.
struct LossMonitor {
  double gamma = 0.2;
  std::size_t K = 0;
  double xi = 0.0;
  std::vector<Sample> buffer;

  friend bool operator==(const LossMonitor&, const LossMonitor&) = default;
};

struct PreferenceModel {
  std::vector<double> w;
  std::vector<double> z;
  std::vector<double> q;
  Hyperparams hp;
  LossMonitor monitor;

  PreferenceModel() = default;
  explicit PreferenceModel(std::size_t dimension, Hyperparams hp = {}, double gamma = 0.2);

  std::size_t dimension() const noexcept { return w.size(); }

  friend bool operator==(const PreferenceModel&, const PreferenceModel&) = default;
};

inline constexpr double kProbabilityClamp = 1e-15;

/// Logistic function, evaluated without overflow for large |v|.
double sigmoid(double v) noexcept;

/// sigmoid(w . x), kept inside the open interval (0, 1).
double predict_prob(const PreferenceModel& model, std::span<const double> x);

/// Negative log-likelihood with p clamped to [1e-15, 1 - 1e-15].
double logistic_loss(const PreferenceModel& model, std::span<const double> x, int y);

/// (p - y) x.
std::vector<double> gradient(const PreferenceModel& model, std::span<const double> x, int y);

/// Closed-form minimizer of z w + lambda1 |w| + 1/2 (lambda2 + (beta + sqrt(q)) / alpha) w^2.
double proximal_weight(double z, double q, const Hyperparams& hp) noexcept;

/// One FTRL-Proximal step. The model is left untouched when the step would
/// produce a non-finite value (NumericError).
void ftrl_update(PreferenceModel& model, const Sample& sample);

/// Online gradient descent with per-coordinate rate alpha / (beta + sqrt(q)),
/// q accumulated before the step. `step` is 1-based.
void ogd_update(PreferenceModel& model, const Sample& sample, std::size_t step);

/// Fresh model trained with one FTRL step per sample, in order.
PreferenceModel train_offline(std::span<const Sample> samples, const Hyperparams& hp,
                              double gamma = 0.2);

enum class RetrainMode {
  /// Continue FTRL from the stored (z, q) over the buffered samples.
  WarmStart,
  /// Discard the state and train a fresh model on the buffer alone.
  FromScratch,
};

/// Feeds one sample to the loss monitor and retrains when the running mean
/// loss reaches gamma. Returns true when a retrain happened.
bool observe_and_maybe_retrain(PreferenceModel& model, const Sample& sample,
                               RetrainMode mode = RetrainMode::WarmStart);

/// JSON-lines checkpoint: one object per user.
void write_checkpoint(std::ostream& out, UserId user, const PreferenceModel& model);
std::vector<std::pair<UserId, PreferenceModel>> read_checkpoint(std::istream& in);

}  // namespace edgecache
