#include "microcal/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "microcal/rng.hpp"

namespace microcal {

namespace {

constexpr double kLengthscaleLo = 1e-2;
constexpr double kLengthscaleHi = 1e1;
constexpr double kSignalLo = 1e-3;
constexpr double kSignalHi = 1e2;
constexpr double kNoiseLo = 1e-8;
constexpr double kNoiseHi = 1.0;
constexpr double kJitterStart = 1e-10;
constexpr double kJitterCeiling = 1e-4;

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& xn,
                                   const Eigen::VectorXd& lengthscales) {
  const int n = int(xn.rows());
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      double s = 0.0;
      for (int k = 0; k < xn.cols(); ++k) {
        const double d = (xn(i, k) - xn(j, k)) / lengthscales(k);
        s += d * d;
      }
      c(i, j) = c(j, i) = std::exp(-0.5 * s);
    }
  }
  return c;
}

// Lower Cholesky factor of K + jitter I with the jitter escalated from
// 1e-10 by decades up to 1e-4; throws naming the ceiling if that fails.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& k,
                                     double& jitter_out) {
  for (double jitter = kJitterStart; jitter <= kJitterCeiling * 1.0001;
       jitter *= 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      jitter_out = jitter;
      return llt.matrixL();
    }
  }
  throw std::runtime_error(
      "gp: Cholesky factorization failed even at the jitter ceiling 1e-4");
}

struct LmlWorkspace {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
};

// Value and gradient of the log marginal likelihood at given
// hyperparameters, gradient taken w.r.t. log-hyperparameters.
LmlWorkspace lml_at(const Eigen::MatrixXd& xn, const Eigen::VectorXd& y,
                    const GpHyperparams& hp) {
  const int n = int(xn.rows());
  const int d = int(xn.cols());
  const Eigen::MatrixXd corr = correlation_matrix(xn, hp.lengthscales);
  Eigen::MatrixXd k = hp.signal_variance * corr;
  k.diagonal().array() += hp.noise_variance;
  double jitter = 0.0;
  const Eigen::MatrixXd l = cholesky_with_jitter(k, jitter);

  const Eigen::VectorXd alpha = l.transpose().triangularView<Eigen::Upper>().solve(
      l.triangularView<Eigen::Lower>().solve(y));
  LmlWorkspace w;
  w.value = -0.5 * y.dot(alpha) - l.diagonal().array().log().sum() -
            0.5 * double(n) * std::log(2.0 * std::numbers::pi);

  // W = alpha alpha^T - K^-1; grad_j = 1/2 tr(W dK/dtheta_j)
  Eigen::MatrixXd kinv = l.transpose().triangularView<Eigen::Upper>().solve(
      l.triangularView<Eigen::Lower>().solve(
          Eigen::MatrixXd::Identity(n, n)));
  Eigen::MatrixXd w_mat = alpha * alpha.transpose() - kinv;

  w.gradient.resize(d + 2);
  for (int kdim = 0; kdim < d; ++kdim) {
    double g = 0.0;
    const double inv_l2 =
        1.0 / (hp.lengthscales(kdim) * hp.lengthscales(kdim));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double diff = xn(i, kdim) - xn(j, kdim);
        g += w_mat(i, j) * hp.signal_variance * corr(i, j) * diff * diff *
             inv_l2;
      }
    w.gradient(kdim) = 0.5 * g;
  }
  w.gradient(d) =
      0.5 * (w_mat.array() * (hp.signal_variance * corr).array()).sum();
  w.gradient(d + 1) = 0.5 * hp.noise_variance * w_mat.trace();
  return w;
}

GpHyperparams theta_to_hp(const Eigen::VectorXd& theta, int d) {
  GpHyperparams hp;
  hp.lengthscales = theta.head(d).array().exp();
  hp.signal_variance = std::exp(theta(d));
  hp.noise_variance = std::exp(theta(d + 1));
  return hp;
}

}  // namespace

double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
              const GpHyperparams& hp) {
  if (a.size() != b.size() || a.size() != hp.lengthscales.size())
    throw std::invalid_argument("kernel: dimension mismatch");
  if (hp.signal_variance <= 0.0 || hp.noise_variance <= 0.0 ||
      (hp.lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("kernel: hyperparameters must be positive");
  double s = 0.0;
  for (int k = 0; k < a.size(); ++k) {
    const double d = (a(k) - b(k)) / hp.lengthscales(k);
    s += d * d;
  }
  return hp.signal_variance * std::exp(-0.5 * s);
}

Eigen::VectorXd GpModel::normalize(const std::vector<double>& x) const {
  if (int(x.size()) != d_)
    throw std::invalid_argument("gp: input dimension mismatch");
  Eigen::VectorXd xn(d_);
  for (int k = 0; k < d_; ++k) xn(k) = (x[k] - lo_[k]) / (hi_[k] - lo_[k]);
  return xn;
}

void GpModel::factorize() {
  Eigen::MatrixXd k =
      hp_.signal_variance * correlation_matrix(xn_, hp_.lengthscales);
  k.diagonal().array() += hp_.noise_variance;
  chol_l_ = cholesky_with_jitter(k, jitter_);
  alpha_ = chol_l_.transpose().triangularView<Eigen::Upper>().solve(
      chol_l_.triangularView<Eigen::Lower>().solve(y_std_));
}

GpModel GpModel::fit(const std::vector<std::vector<double>>& inputs,
                     const std::vector<double>& outputs,
                     const GpFitOptions& options) {
  const int n = int(inputs.size());
  if (n < 1 || outputs.size() != inputs.size())
    throw std::invalid_argument("gp fit: empty or mismatched training set");
  const int d = int(options.lower.size());
  if (d < 1 || options.upper.size() != options.lower.size())
    throw std::invalid_argument("gp fit: bad bounds");
  for (int k = 0; k < d; ++k)
    if (!(options.upper[k] > options.lower[k]))
      throw std::invalid_argument("gp fit: bounds must have lower < upper");

  GpModel m;
  m.n_ = n;
  m.d_ = d;
  m.lo_ = options.lower;
  m.hi_ = options.upper;
  m.raw_x_ = inputs;
  m.xn_.resize(n, d);
  for (int i = 0; i < n; ++i) {
    if (int(inputs[i].size()) != d)
      throw std::invalid_argument("gp fit: input dimension mismatch");
    for (int k = 0; k < d; ++k)
      m.xn_(i, k) = (inputs[i][k] - m.lo_[k]) / (m.hi_[k] - m.lo_[k]);
  }

  double mean = 0.0;
  for (double v : outputs) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : outputs) var += (v - mean) * (v - mean);
  var = n > 1 ? var / double(n - 1) : 0.0;
  m.y_mean_ = mean;
  m.y_sd_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  m.y_std_.resize(n);
  for (int i = 0; i < n; ++i) m.y_std_(i) = (outputs[i] - mean) / m.y_sd_;

  if (n == 1) {
    m.hp_.lengthscales = Eigen::VectorXd::Constant(d, 0.3);
    m.hp_.signal_variance = 1.0;
    m.hp_.noise_variance = options.fixed_noise_variance.value_or(1e-4);
    m.factorize();
    return m;
  }

  // bounds in log space; noise pinned when requested
  Eigen::VectorXd lb(d + 2), ub(d + 2);
  for (int k = 0; k < d; ++k) {
    lb(k) = std::log(kLengthscaleLo);
    ub(k) = std::log(kLengthscaleHi);
  }
  lb(d) = std::log(kSignalLo);
  ub(d) = std::log(kSignalHi);
  if (options.fixed_noise_variance) {
    lb(d + 1) = ub(d + 1) = std::log(*options.fixed_noise_variance);
  } else {
    lb(d + 1) = std::log(kNoiseLo);
    ub(d + 1) = std::log(kNoiseHi);
  }

  const auto objective = [&](const Eigen::VectorXd& theta) -> LmlWorkspace {
    try {
      LmlWorkspace w = lml_at(m.xn_, m.y_std_, theta_to_hp(theta, d));
      if (options.fixed_noise_variance) w.gradient(d + 1) = 0.0;
      return w;
    } catch (const std::runtime_error&) {
      return {};  // -inf value: reject this region
    }
  };

  // latin-hypercube starting points over the log box
  Rng rng(derive_seed(options.seed, 0x6770ULL));
  const int starts = std::max(1, options.multistarts);
  std::vector<Eigen::VectorXd> start_points;
  {
    std::vector<std::vector<int>> strata(static_cast<std::size_t>(d + 2));
    for (auto& perm : strata) {
      perm.resize(static_cast<std::size_t>(starts));
      for (int i = 0; i < starts; ++i) perm[std::size_t(i)] = i;
      for (int i = starts - 1; i > 0; --i)
        std::swap(perm[std::size_t(i)],
                  perm[std::size_t(rng.uniform_int(std::uint64_t(i + 1)))]);
    }
    for (int s = 0; s < starts; ++s) {
      Eigen::VectorXd theta(d + 2);
      for (int k = 0; k < d + 2; ++k) {
        const double u =
            (double(strata[std::size_t(k)][std::size_t(s)]) + rng.uniform()) /
            double(starts);
        theta(k) = lb(k) + u * (ub(k) - lb(k));
      }
      start_points.push_back(theta);
    }
  }

  Eigen::VectorXd best_theta;
  double best_value = -std::numeric_limits<double>::infinity();
  for (const auto& start : start_points) {
    Eigen::VectorXd theta = start;
    LmlWorkspace cur = objective(theta);
    if (!std::isfinite(cur.value)) continue;
    double step = 0.1;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      if (cur.gradient.lpNorm<Eigen::Infinity>() < 1e-6) break;
      bool improved = false;
      while (step >= 1e-7) {
        Eigen::VectorXd trial =
            (theta + step * cur.gradient).cwiseMax(lb).cwiseMin(ub);
        LmlWorkspace next = objective(trial);
        if (next.value > cur.value) {
          theta = trial;
          cur = next;
          step = std::min(step * 1.5, 1.0);
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    if (cur.value > best_value) {
      best_value = cur.value;
      best_theta = theta;
    }
  }
  if (!std::isfinite(best_value))
    throw std::runtime_error("gp fit: no feasible hyperparameters found");

  m.hp_ = theta_to_hp(best_theta, d);
  m.factorize();
  return m;
}

GpModel::Prediction GpModel::predict_standardized(
    const Eigen::VectorXd& xn) const {
  if (empty()) throw std::logic_error("gp: predict on empty model");
  Eigen::VectorXd kstar(n_);
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    for (int k = 0; k < d_; ++k) {
      const double diff = (xn(k) - xn_(i, k)) / hp_.lengthscales(k);
      s += diff * diff;
    }
    kstar(i) = hp_.signal_variance * std::exp(-0.5 * s);
  }
  Prediction p;
  p.mean = kstar.dot(alpha_);
  const Eigen::VectorXd v =
      chol_l_.triangularView<Eigen::Lower>().solve(kstar);
  p.variance = std::max(0.0, hp_.signal_variance - v.squaredNorm());
  return p;
}

GpModel::Prediction GpModel::predict(const std::vector<double>& x) const {
  Prediction p = predict_standardized(normalize(x));
  p.mean = y_mean_ + y_sd_ * p.mean;
  p.variance = y_sd_ * y_sd_ * p.variance;
  return p;
}

std::pair<double, Eigen::VectorXd> GpModel::log_marginal_likelihood() const {
  if (empty()) throw std::logic_error("gp: lml on empty model");
  const LmlWorkspace w = lml_at(xn_, y_std_, hp_);
  return {w.value, w.gradient};
}

double GpModel::log_marginal_likelihood_at(const GpHyperparams& hp) const {
  if (empty()) throw std::logic_error("gp: lml on empty model");
  return lml_at(xn_, y_std_, hp).value;
}

GpModel GpModel::with_imputed(
    const std::vector<std::vector<double>>& points) const {
  if (empty()) throw std::logic_error("gp: impute on empty model");
  GpModel m = *this;
  for (const auto& x : points) {
    const Eigen::VectorXd xn = normalize(x);
    const double mean_std = m.predict_standardized(xn).mean;
    m.raw_x_.push_back(x);
    m.xn_.conservativeResize(m.n_ + 1, m.d_);
    m.xn_.row(m.n_) = xn.transpose();
    m.y_std_.conservativeResize(m.n_ + 1);
    m.y_std_(m.n_) = mean_std;
    ++m.n_;
    m.factorize();
  }
  return m;
}

void GpModel::save(std::ostream& out) const {
  out << "GPMODEL 1\n";
  out << std::setprecision(17);
  out << "dim " << d_ << "\nn " << n_ << '\n';
  out << "lower";
  for (double v : lo_) out << ' ' << v;
  out << "\nupper";
  for (double v : hi_) out << ' ' << v;
  out << "\ny_mean " << y_mean_ << "\ny_sd " << y_sd_ << '\n';
  out << "lengthscales";
  for (int k = 0; k < d_; ++k) out << ' ' << hp_.lengthscales(k);
  out << "\nsignal_variance " << hp_.signal_variance << "\nnoise_variance "
      << hp_.noise_variance << '\n';
  out << "data\n";
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < d_; ++k) out << raw_x_[std::size_t(i)][std::size_t(k)] << ',';
    out << y_mean_ + y_sd_ * y_std_(i) << '\n';
  }
}

GpModel GpModel::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "GPMODEL" || version != 1)
    throw std::runtime_error("gp load: not a GPMODEL v1 snapshot");
  GpModel m;
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key)
      throw std::runtime_error(std::string("gp load: expected ") + key);
  };
  expect("dim");
  in >> m.d_;
  expect("n");
  in >> m.n_;
  if (m.d_ < 1 || m.n_ < 1) throw std::runtime_error("gp load: bad sizes");
  m.lo_.resize(static_cast<std::size_t>(m.d_));
  m.hi_.resize(static_cast<std::size_t>(m.d_));
  expect("lower");
  for (auto& v : m.lo_) in >> v;
  expect("upper");
  for (auto& v : m.hi_) in >> v;
  expect("y_mean");
  in >> m.y_mean_;
  expect("y_sd");
  in >> m.y_sd_;
  m.hp_.lengthscales.resize(m.d_);
  expect("lengthscales");
  for (int k = 0; k < m.d_; ++k) in >> m.hp_.lengthscales(k);
  expect("signal_variance");
  in >> m.hp_.signal_variance;
  expect("noise_variance");
  in >> m.hp_.noise_variance;
  expect("data");
  m.xn_.resize(m.n_, m.d_);
  m.y_std_.resize(m.n_);
  for (int i = 0; i < m.n_; ++i) {
    std::string line;
    while (std::getline(in, line) && line.empty()) {
    }
    std::istringstream row(line);
    std::vector<double> x(static_cast<std::size_t>(m.d_));
    char comma;
    for (int k = 0; k < m.d_; ++k)
      if (!(row >> x[std::size_t(k)] >> comma))
        throw std::runtime_error("gp load: bad data row");
    double y = 0.0;
    if (!(row >> y)) throw std::runtime_error("gp load: bad data row");
    m.raw_x_.push_back(x);
    for (int k = 0; k < m.d_; ++k)
      m.xn_(i, k) = (x[std::size_t(k)] - m.lo_[std::size_t(k)]) /
                    (m.hi_[std::size_t(k)] - m.lo_[std::size_t(k)]);
    m.y_std_(i) = (y - m.y_mean_) / m.y_sd_;
  }
  if (!in) throw std::runtime_error("gp load: truncated snapshot");
  m.factorize();
  return m;
}

}  // namespace microcal
