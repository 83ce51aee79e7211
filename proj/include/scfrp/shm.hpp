/**
 * @file shm.hpp
 * @brief Inverse identification pipeline: dataset rows, z-score
 *        normalization, the small feedforward network, Levenberg-Marquardt
 *        training with early stopping, and evaluation metrics.
 */

#ifndef SCFRP_SHM_HPP
#define SCFRP_SHM_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfrp {

/// One dataset row: microstructure descriptors, the 28 conductance ratios
/// and the two damage targets.
struct ShmRecord {
  std::string case_name;
  std::string role;  // "training" or "test"
  int step = 0;
  double a11 = 0.0, a12 = 0.0, vf = 0.0, theta = 0.0;
  std::array<double, 28> g_ratios{};
  double a_tilde = 0.0;
  double c_tilde = 1.0;
};

/// Feature matrix from records. 32 inputs include the temperature; the
/// 31-input mode drops it.
inline Eigen::MatrixXd feature_matrix(const std::vector<ShmRecord>& rows, int n_in) {
  if (n_in != 31 && n_in != 32) throw std::domain_error("feature_matrix: inputs mode must be 31 or 32");
  Eigen::MatrixXd x(static_cast<int>(rows.size()), n_in);
  for (int i = 0; i < x.rows(); ++i) {
    const auto& r = rows[i];
    int c = 0;
    x(i, c++) = r.a11;
    x(i, c++) = r.a12;
    x(i, c++) = r.vf;
    if (n_in == 32) x(i, c++) = r.theta;
    for (double g : r.g_ratios) x(i, c++) = g;
  }
  return x;
}

inline Eigen::MatrixXd target_matrix(const std::vector<ShmRecord>& rows) {
  Eigen::MatrixXd y(static_cast<int>(rows.size()), 2);
  for (int i = 0; i < y.rows(); ++i) {
    y(i, 0) = rows[i].a_tilde;
    y(i, 1) = rows[i].c_tilde;
  }
  return y;
}

struct ZScoreStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;
  std::string provenance;  // which rows produced the statistics
};

/// Column statistics. Constant columns get a floored deviation so they
/// normalize to zero rather than blowing up.
inline ZScoreStats zscore_fit(const Eigen::MatrixXd& rows, const std::string& provenance) {
  if (rows.rows() == 0) throw std::domain_error("zscore_fit: no rows");
  ZScoreStats st;
  st.provenance = provenance;
  st.mean = rows.colwise().mean();
  st.stdev.resize(rows.cols());
  for (int c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - st.mean(c)).square().mean();
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      static bool warned = false;
      if (!warned) {
        std::cerr << "warning: constant feature column " << c << ", deviation floored\n";
        warned = true;
      }
      sd = 1e-12;
    }
    st.stdev(c) = sd;
  }
  return st;
}

inline Eigen::MatrixXd zscore_apply(const ZScoreStats& st, const Eigen::MatrixXd& rows) {
  return (rows.rowwise() - st.mean.transpose()).array().rowwise() /
         st.stdev.transpose().array();
}

inline Eigen::MatrixXd zscore_invert(const ZScoreStats& st, const Eigen::MatrixXd& rows) {
  return (rows.array().rowwise() * st.stdev.transpose().array()).matrix().rowwise() +
         st.mean.transpose();
}

/// Fully connected [n_in, 16, 16, 2] network with tanh hidden layers and a
/// linear output, together with the normalization statistics it was
/// trained with.
struct Network {
  int n_in = 32;
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
  ZScoreStats in_stats, out_stats;
  // training metadata
  unsigned seed = 0;
  int epochs_run = 0;
  int best_epoch = -1;
  std::vector<std::string> holdout;

  static constexpr int kHidden = 16;

  int param_count() const {
    return (n_in * kHidden + kHidden) + (kHidden * kHidden + kHidden) + (kHidden * 2 + 2);
  }
};

/// Uniform +-1/sqrt(fan_in) initialization, reproducible from the seed.
inline Network network_init(int n_in, unsigned seed) {
  if (n_in < 1) throw std::domain_error("network_init: need at least one input");
  Network net;
  net.n_in = n_in;
  net.seed = seed;
  std::mt19937 rng(seed);
  auto uniform = [&rng](double lim) {
    // 53-bit uniform in [-lim, lim), identical across platforms
    const double u = (static_cast<double>(rng() >> 5) * 67108864.0 +
                      static_cast<double>(rng() >> 6)) / 9007199254740992.0;
    return lim * (2.0 * u - 1.0);
  };
  auto fill = [&uniform](Eigen::MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    const double lim = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = uniform(lim);
  };
  fill(net.w1, Network::kHidden, n_in);
  fill(net.w2, Network::kHidden, Network::kHidden);
  fill(net.w3, 2, Network::kHidden);
  net.b1 = Eigen::VectorXd::Zero(Network::kHidden);
  net.b2 = Eigen::VectorXd::Zero(Network::kHidden);
  net.b3 = Eigen::VectorXd::Zero(2);
  net.in_stats.mean = Eigen::VectorXd::Zero(n_in);
  net.in_stats.stdev = Eigen::VectorXd::Ones(n_in);
  net.out_stats.mean = Eigen::VectorXd::Zero(2);
  net.out_stats.stdev = Eigen::VectorXd::Ones(2);
  return net;
}

namespace detail {

inline Eigen::Vector2d forward_normalized(const Network& net, const Eigen::VectorXd& xn,
                                          Eigen::VectorXd* a1_out = nullptr,
                                          Eigen::VectorXd* a2_out = nullptr) {
  const Eigen::VectorXd a1 = (net.w1 * xn + net.b1).array().tanh();
  const Eigen::VectorXd a2 = (net.w2 * a1 + net.b2).array().tanh();
  if (a1_out) *a1_out = a1;
  if (a2_out) *a2_out = a2;
  return net.w3 * a2 + net.b3;
}

// Parameter packing order: w1 row-major, b1, w2, b2, w3, b3.
inline int pack_params(const Network& net, Eigen::VectorXd& out) {
  out.resize(net.param_count());
  int k = 0;
  auto put_m = [&](const Eigen::MatrixXd& m) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) out(k++) = m(r, c);
  };
  auto put_v = [&](const Eigen::VectorXd& v) {
    for (int r = 0; r < v.size(); ++r) out(k++) = v(r);
  };
  put_m(net.w1); put_v(net.b1);
  put_m(net.w2); put_v(net.b2);
  put_m(net.w3); put_v(net.b3);
  return k;
}

inline void unpack_params(Network& net, const Eigen::VectorXd& in) {
  int k = 0;
  auto get_m = [&](Eigen::MatrixXd& m) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = in(k++);
  };
  auto get_v = [&](Eigen::VectorXd& v) {
    for (int r = 0; r < v.size(); ++r) v(r) = in(k++);
  };
  get_m(net.w1); get_v(net.b1);
  get_m(net.w2); get_v(net.b2);
  get_m(net.w3); get_v(net.b3);
}

// Analytic Jacobian of the two normalized outputs w.r.t. all parameters
// for one normalized sample; rows are written into jac at row0 and row0+1.
inline void sample_jacobian(const Network& net, const Eigen::VectorXd& xn,
                            Eigen::MatrixXd& jac, int row0) {
  Eigen::VectorXd a1, a2;
  detail::forward_normalized(net, xn, &a1, &a2);
  const Eigen::ArrayXd d1 = 1.0 - a1.array().square();
  const Eigen::ArrayXd d2 = 1.0 - a2.array().square();
  const int h = Network::kHidden;
  const int n_w1 = net.n_in * h;
  const int off_b1 = n_w1;
  const int off_w2 = off_b1 + h;
  const int off_b2 = off_w2 + h * h;
  const int off_w3 = off_b2 + h;
  const int off_b3 = off_w3 + 2 * h;
  for (int k = 0; k < 2; ++k) {
    const int row = row0 + k;
    const Eigen::VectorXd delta2 = (net.w3.row(k).transpose().array() * d2).matrix();
    const Eigen::VectorXd delta1 = ((net.w2.transpose() * delta2).array() * d1).matrix();
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < net.n_in; ++c) jac(row, r * net.n_in + c) = delta1(r) * xn(c);
    for (int r = 0; r < h; ++r) jac(row, off_b1 + r) = delta1(r);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < h; ++c) jac(row, off_w2 + r * h + c) = delta2(r) * a1(c);
    for (int r = 0; r < h; ++r) jac(row, off_b2 + r) = delta2(r);
    for (int c = 0; c < h; ++c) {
      jac(row, off_w3 + 0 * h + c) = (k == 0) ? a2(c) : 0.0;
      jac(row, off_w3 + 1 * h + c) = (k == 1) ? a2(c) : 0.0;
    }
    jac(row, off_b3 + 0) = (k == 0) ? 1.0 : 0.0;
    jac(row, off_b3 + 1) = (k == 1) ? 1.0 : 0.0;
  }
}

}  // namespace detail

/// De-normalized prediction for one raw input row.
inline Eigen::Vector2d forward(const Network& net, const Eigen::VectorXd& x) {
  if (x.size() != net.n_in) throw std::domain_error("forward: input dimension mismatch");
  const Eigen::VectorXd xn =
      (x - net.in_stats.mean).array() / net.in_stats.stdev.array();
  const Eigen::Vector2d yn = detail::forward_normalized(net, xn);
  return (yn.array() * net.out_stats.stdev.array() + net.out_stats.mean.array()).matrix();
}

struct TrainConfig {
  int max_epochs = 1000;
  int patience = 20;
  double val_fraction = 0.15;
  double lambda0 = 1e-3;
  double lambda_max = 1e10;
  unsigned seed = 42;

  void validate() const {
    if (patience >= max_epochs) throw std::domain_error("TrainConfig: patience must be < max_epochs");
    if (!(val_fraction > 0.0) || val_fraction >= 0.5)
      throw std::domain_error("TrainConfig: val fraction must lie in (0, 0.5)");
  }
};

struct TrainHistory {
  std::vector<double> train_mse;  // per epoch, after accept/reject
  std::vector<double> val_mse;
  int best_epoch = -1;
  int epochs_run = 0;
  bool stopped_early = false;
};

namespace detail {

inline std::vector<int> seeded_permutation(int n, unsigned seed) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::mt19937 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<unsigned>(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

inline double mse_of(const Network& net, const Eigen::MatrixXd& xn, const Eigen::MatrixXd& yn) {
  double acc = 0.0;
  for (int i = 0; i < xn.rows(); ++i) {
    const Eigen::Vector2d p = forward_normalized(net, xn.row(i).transpose());
    acc += (p - yn.row(i).transpose()).squaredNorm();
  }
  return acc / (2.0 * xn.rows());
}

}  // namespace detail

/// Deterministic train/validation split used by training and evaluation.
inline std::pair<std::vector<int>, std::vector<int>> train_val_split(int n, double val_fraction,
                                                                     unsigned seed) {
  const auto perm = detail::seeded_permutation(n, seed);
  const int n_val = std::max(1, static_cast<int>(std::floor(val_fraction * n)));
  const int n_tr = n - n_val;
  std::vector<int> train(perm.begin(), perm.begin() + n_tr);
  std::vector<int> val(perm.begin() + n_tr, perm.end());
  return {train, val};
}

/// Levenberg-Marquardt fit on normalized inputs/outputs. Normalization
/// statistics are computed from the given training rows exclusively and
/// stored on the network. A step is accepted when it lowers the training
/// MSE (lambda /= 10), otherwise rejected (lambda *= 10). Early stopping
/// monitors the validation MSE; the returned network carries the weights
/// of the best validation epoch.
inline TrainHistory lm_train(Network& net, const Eigen::MatrixXd& x_raw,
                             const Eigen::MatrixXd& y_raw, const TrainConfig& cfg) {
  cfg.validate();
  if (x_raw.rows() != y_raw.rows() || x_raw.rows() < 4)
    throw std::domain_error("lm_train: need matching input/target rows");
  if (x_raw.cols() != net.n_in) throw std::domain_error("lm_train: input dimension mismatch");

  net.in_stats = zscore_fit(x_raw, "training rows");
  net.out_stats = zscore_fit(y_raw, "training rows");
  const Eigen::MatrixXd xn_all = zscore_apply(net.in_stats, x_raw);
  const Eigen::MatrixXd yn_all = zscore_apply(net.out_stats, y_raw);

  // seeded split into train / validation
  const int n = static_cast<int>(xn_all.rows());
  const auto [tr_idx, val_idx] = train_val_split(n, cfg.val_fraction, cfg.seed);
  const int n_tr = static_cast<int>(tr_idx.size());
  const int n_val = static_cast<int>(val_idx.size());
  Eigen::MatrixXd xt(n_tr, net.n_in), yt(n_tr, 2), xv(n_val, net.n_in), yv(n_val, 2);
  for (int i = 0; i < n_tr; ++i) {
    xt.row(i) = xn_all.row(tr_idx[i]);
    yt.row(i) = yn_all.row(tr_idx[i]);
  }
  for (int i = 0; i < n_val; ++i) {
    xv.row(i) = xn_all.row(val_idx[i]);
    yv.row(i) = yn_all.row(val_idx[i]);
  }

  const int np = net.param_count();
  Eigen::MatrixXd jac(2 * n_tr, np);
  Eigen::VectorXd resid(2 * n_tr);

  double lambda = cfg.lambda0;
  double mse = detail::mse_of(net, xt, yt);
  TrainHistory hist;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params;
  detail::pack_params(net, best_params);
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (int i = 0; i < n_tr; ++i) {
      const Eigen::Vector2d p = detail::forward_normalized(net, xt.row(i).transpose());
      resid(2 * i) = p(0) - yt(i, 0);
      resid(2 * i + 1) = p(1) - yt(i, 1);
      detail::sample_jacobian(net, xt.row(i).transpose(), jac, 2 * i);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * resid;

    Eigen::VectorXd params;
    detail::pack_params(net, params);
    Eigen::MatrixXd aug = jtj;
    aug.diagonal().array() += lambda;
    const Eigen::VectorXd delta = aug.ldlt().solve(jtr);
    Network trial = net;
    detail::unpack_params(trial, params - delta);
    const double mse_trial = detail::mse_of(trial, xt, yt);
    if (mse_trial < mse) {
      net = trial;
      mse = mse_trial;
      lambda = std::max(lambda / 10.0, 1e-14);
    } else {
      lambda *= 10.0;
    }

    const double val = detail::mse_of(net, xv, yv);
    hist.train_mse.push_back(mse);
    hist.val_mse.push_back(val);
    hist.epochs_run = epoch + 1;

    if (val < best_val - 1e-15) {
      best_val = val;
      hist.best_epoch = epoch;
      detail::pack_params(net, best_params);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) {
      hist.stopped_early = true;
      break;
    }
    if (lambda > cfg.lambda_max) break;
  }
  detail::unpack_params(net, best_params);
  net.epochs_run = hist.epochs_run;
  net.best_epoch = hist.best_epoch;
  return hist;
}

struct Metrics {
  std::array<double, 2> r2{};
  std::array<double, 2> rmse{};
};

/// Coefficient of determination and RMSE per output on raw (de-normalized)
/// values. Zero-variance truth columns report an R^2 sentinel of -inf.
inline Metrics metrics(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.rows() < 2 || pred.cols() != 2 || truth.cols() != 2)
    throw std::domain_error("metrics: need matching Nx2 arrays with N >= 2");
  Metrics out;
  for (int c = 0; c < 2; ++c) {
    const double mean = truth.col(c).mean();
    const double ss_tot = (truth.col(c).array() - mean).square().sum();
    const double ss_res = (pred.col(c) - truth.col(c)).squaredNorm();
    out.rmse[c] = std::sqrt(ss_res / pred.rows());
    out.r2[c] = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot
                               : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace scfrp

#endif  // SCFRP_SHM_HPP
