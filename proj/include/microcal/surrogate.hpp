#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace microcal {

// Kernel hyperparameters on unit-box-normalized inputs.
struct GpHyperparams {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
};

// Squared-exponential ARD kernel: sf2 * exp(-1/2 sum_k (a_k - b_k)^2 / l_k^2).
double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
              const GpHyperparams& hp);

struct GpFitOptions {
  std::vector<double> lower;  // raw input box (inputs are normalized to it)
  std::vector<double> upper;
  std::uint64_t seed = 0;
  int multistarts = 8;
  int max_iterations = 120;
  // Pins sigma_n^2 instead of learning it (noise-free regression tests).
  std::optional<double> fixed_noise_variance;
};

// Gaussian-process regressor of a scalar objective over a box. Inputs are
// normalized to the unit box and outputs standardized to zero mean / unit
// variance internally; the public surface speaks raw units. Immutable after
// fit and safe for concurrent reads.
class GpModel {
 public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  GpModel() = default;

  // Maximizes log marginal likelihood over log-hyperparameters by
  // multi-start projected gradient ascent; deterministic for a fixed seed.
  // n == 1 is allowed and uses fixed default hyperparameters.
  static GpModel fit(const std::vector<std::vector<double>>& inputs,
                     const std::vector<double>& outputs,
                     const GpFitOptions& options);

  bool empty() const { return n_ == 0; }
  int size() const { return n_; }
  int dim() const { return d_; }

  Prediction predict(const std::vector<double>& x) const;
  // Posterior in standardized-output / normalized-input space.
  Prediction predict_standardized(const Eigen::VectorXd& xn) const;

  // Value and analytic gradient w.r.t. (log l_1..d, log sf2, log sn2),
  // in standardized-output units.
  std::pair<double, Eigen::VectorXd> log_marginal_likelihood() const;
  // Value only, at arbitrary hyperparameters on this model's training data.
  double log_marginal_likelihood_at(const GpHyperparams& hp) const;

  // "Believer" copy: appends the points with their posterior means as
  // pseudo-observations and refactorizes, hyperparameters unchanged.
  GpModel with_imputed(const std::vector<std::vector<double>>& points) const;

  const GpHyperparams& hyperparams() const { return hp_; }
  double jitter() const { return jitter_; }
  const std::vector<std::vector<double>>& inputs() const { return raw_x_; }
  std::vector<double> outputs() const {
    std::vector<double> y(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) y[std::size_t(i)] = y_mean_ + y_sd_ * y_std_(i);
    return y;
  }
  double output_mean() const { return y_mean_; }
  double output_sd() const { return y_sd_; }
  Eigen::VectorXd normalize(const std::vector<double>& x) const;

  // Versioned text snapshot (hyperparameters + training set) for resume.
  void save(std::ostream& out) const;
  static GpModel load(std::istream& in);

 private:
  void factorize();

  int n_ = 0;
  int d_ = 0;
  std::vector<double> lo_, hi_;
  std::vector<std::vector<double>> raw_x_;
  Eigen::MatrixXd xn_;      // n x d normalized inputs
  Eigen::VectorXd y_std_;   // standardized outputs
  double y_mean_ = 0.0;
  double y_sd_ = 1.0;
  GpHyperparams hp_;
  Eigen::MatrixXd chol_l_;  // lower factor of K + jitter I
  Eigen::VectorXd alpha_;   // (K + jitter I)^-1 y_std
  double jitter_ = 0.0;
};

}  // namespace microcal
