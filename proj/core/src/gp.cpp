#include <celltune/gp.hpp>

#include <celltune/mathu.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

namespace celltune {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
constexpr double kNugget = 1e-6;  // relative to the signal variance
constexpr double kLsLo = 5e-3, kLsHi = 10.0;
constexpr double kSvLo = 1e-6, kSvHi = 1e3;   // on normalized values
constexpr double kNvLo = 1e-8, kNvHi = 1.0;   // spec'd as [1e-8, var(y)]

// Weak log-normal priors keep the MAP objective bounded on flat data.
constexpr double kLsPriorMu = -0.9162907318741551, kLsPriorSd = 1.2;  // ln 0.4
constexpr double kSvPriorMu = 0.0, kSvPriorSd = 1.5;
constexpr double kNvPriorMu = -6.907755278982137, kNvPriorSd = 2.0;   // ln 1e-3

double matern_shape(double r) { return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r); }

// Unit-signal correlation matrix between row sets a and b under lengthscales.
Eigen::MatrixXd corr_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::VectorXd& ls) {
  const Eigen::MatrixXd as = a * ls.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd bs = b * ls.cwiseInverse().asDiagonal();
  const Eigen::VectorXd an = as.rowwise().squaredNorm();
  const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * as * bs.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return d2.cwiseMax(0.0).cwiseSqrt().unaryExpr([](double r) { return matern_shape(r); });
}

struct Bounds {
  Eigen::VectorXd lo, hi;  // in log space, per optimized parameter
};

Bounds make_bounds(int d) {
  Bounds b;
  b.lo.resize(d + 2);
  b.hi.resize(d + 2);
  b.lo.head(d).setConstant(std::log(kLsLo));
  b.hi.head(d).setConstant(std::log(kLsHi));
  b.lo[d] = std::log(kSvLo);
  b.hi[d] = std::log(kSvHi);
  b.lo[d + 1] = std::log(kNvLo);
  b.hi[d + 1] = std::log(kNvHi);
  return b;
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

Eigen::VectorXd squash(const Eigen::VectorXd& u, const Bounds& b) {
  Eigen::VectorXd t(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    t[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * sigmoid(u[i]);
  return t;
}

Eigen::VectorXd unsquash(const Eigen::VectorXd& t, const Bounds& b) {
  Eigen::VectorXd u(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double f = std::clamp((t[i] - b.lo[i]) / (b.hi[i] - b.lo[i]), 1e-6, 1.0 - 1e-6);
    u[i] = std::log(f / (1.0 - f));
  }
  return u;
}

// Penalized negative log marginal likelihood on normalized values, with
// gradient in the log-parameter space. theta = (log ls[0..d), log sv, log nv).
double neg_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
               const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Eigen::VectorXd ls = theta.head(d).array().exp();
  const double sv = std::exp(theta[d]);
  const double nv = std::exp(theta[d + 1]);

  const Eigen::MatrixXd c = corr_matrix(x, x, ls);
  Eigen::MatrixXd kt = sv * c;
  kt.diagonal().array() += nv + kNugget * sv;
  Eigen::LLT<Eigen::MatrixXd> llt(kt);
  if (llt.info() != Eigen::Success) {
    if (grad) grad->setZero(theta.size());
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd alpha = llt.solve(z);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
  logdet *= 2.0;
  double nll = 0.5 * z.dot(alpha) + 0.5 * logdet +
               0.5 * n * std::log(2.0 * kPi);

  auto prior_term = [&](double logv, double mu, double sd, double* g) {
    const double r = (logv - mu) / sd;
    if (g) *g += r / sd;
    return 0.5 * r * r;
  };
  Eigen::VectorXd pgrad = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index i = 0; i < d; ++i)
    nll += prior_term(theta[i], kLsPriorMu, kLsPriorSd, grad ? &pgrad[i] : nullptr);
  nll += prior_term(theta[d], kSvPriorMu, kSvPriorSd, grad ? &pgrad[d] : nullptr);
  nll += prior_term(theta[d + 1], kNvPriorMu, kNvPriorSd, grad ? &pgrad[d + 1] : nullptr);
  if (!grad) return nll;

  const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;

  grad->resize(theta.size());
  // d nll / d log sv and d log nv.
  (*grad)[d] = -0.5 * ((w.cwiseProduct(sv * c)).sum() + kNugget * sv * w.trace());
  (*grad)[d + 1] = -0.5 * nv * w.trace();

  // Lengthscale gradient: dK/dr folded into a pairwise weight, then the
  // squared per-dimension displacements contracted against it.
  Eigen::MatrixXd p(n, n);
  const Eigen::MatrixXd xs = x * ls.cwiseInverse().asDiagonal();
  const Eigen::VectorXd xn = xs.rowwise().squaredNorm();
  Eigen::MatrixXd r2 = (-2.0 * xs * xs.transpose());
  r2.colwise() += xn;
  r2.rowwise() += xn.transpose();
  const Eigen::MatrixXd r = r2.cwiseMax(0.0).cwiseSqrt();
  p = ((sv * 5.0 / 3.0) * (1.0 + kSqrt5 * r.array()) *
       (-kSqrt5 * r.array()).exp() * w.array())
          .matrix();
  const Eigen::VectorXd t = p.rowwise().sum();
  const Eigen::MatrixXd px = p * x;
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto u = x.col(i);
    const double contract = 2.0 * (u.cwiseAbs2().dot(t) - u.dot(px.col(i)));
    (*grad)[i] = -0.5 * contract / (ls[i] * ls[i]);
  }
  *grad += pgrad;
  return nll;
}

// Bounded L-BFGS with backtracking line search, minimizing fn(u).
template <typename Fn>
double lbfgs_minimize(Fn&& fn, Eigen::VectorXd& u, int max_iter) {
  const int hist = 8;
  std::deque<Eigen::VectorXd> ss, ys;
  Eigen::VectorXd g(u.size());
  double f = fn(u, &g);
  for (int it = 0; it < max_iter; ++it) {
    if (!std::isfinite(f)) break;
    if (g.cwiseAbs().maxCoeff() < 1e-6) break;

    Eigen::VectorXd q = g;
    std::vector<double> rho(ss.size()), a(ss.size());
    for (int i = static_cast<int>(ss.size()) - 1; i >= 0; --i) {
      rho[i] = 1.0 / ys[i].dot(ss[i]);
      a[i] = rho[i] * ss[i].dot(q);
      q -= a[i] * ys[i];
    }
    if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
    for (std::size_t i = 0; i < ss.size(); ++i) {
      const double beta = rho[i] * ys[i].dot(q);
      q += (a[i] - beta) * ss[i];
    }
    Eigen::VectorXd dir = -q;
    if (dir.dot(g) >= 0.0) dir = -g;

    double step = 1.0;
    const double slope = dir.dot(g);
    Eigen::VectorXd unew, gnew(u.size());
    double fnew = f;
    bool ok = false;
    for (int ls = 0; ls < 30; ++ls) {
      unew = u + step * dir;
      fnew = fn(unew, &gnew);
      if (std::isfinite(fnew) && fnew <= f + 1e-4 * step * slope) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) break;

    const Eigen::VectorXd s = unew - u;
    const Eigen::VectorXd yv = gnew - g;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      ss.push_back(s);
      ys.push_back(yv);
      if (static_cast<int>(ss.size()) > hist) {
        ss.pop_front();
        ys.pop_front();
      }
    }
    const double drop = f - fnew;
    u = unew;
    g = gnew;
    f = fnew;
    if (drop < 1e-10 * (1.0 + std::abs(f))) break;
  }
  return f;
}

}  // namespace

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& lengthscale) {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double t = (a[i] - b[i]) / lengthscale[i];
    r2 += t * t;
  }
  return matern_shape(std::sqrt(r2));
}

void ObservationSet::add(const Eigen::VectorXd& xi, double yi) {
  if (x.rows() == 0 && x.cols() == 0) x.resize(0, xi.size());
  x.conservativeResize(x.rows() + 1, Eigen::NoChange);
  x.row(x.rows() - 1) = xi.transpose();
  y.conservativeResize(y.size() + 1);
  y[y.size() - 1] = yi;
}

GpModel GpModel::with_hyperparams(ObservationSet obs, GpHyperparams hp) {
  GpModel m;
  m.obs_ = std::move(obs);
  m.hp_ = std::move(hp);
  m.factorize();
  return m;
}

void GpModel::factorize() {
  const Eigen::Index n = obs_.x.rows();
  if (n == 0) {
    chol_l_.resize(0, 0);
    alpha_.resize(0);
    lml_ = 0.0;
    return;
  }
  const Eigen::VectorXd ls = hp_.log_lengthscale.array().exp();
  const double sv = std::exp(hp_.log_signal_var);
  const double nv = std::exp(hp_.log_noise_var);
  Eigen::MatrixXd kt = corr_matrix(obs_.x, obs_.x, ls);
  kt.diagonal().array() += nv / sv + kNugget;
  Eigen::LLT<Eigen::MatrixXd> llt(kt);
  if (llt.info() != Eigen::Success) {
    // Escalate the nugget until the factorization goes through.
    double extra = kNugget;
    do {
      extra *= 10.0;
      Eigen::MatrixXd k2 = kt;
      k2.diagonal().array() += extra;
      llt = Eigen::LLT<Eigen::MatrixXd>(k2);
    } while (llt.info() != Eigen::Success && extra < 1.0);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("gp factorization failed");
  }
  chol_l_ = llt.matrixL();
  const double scale = std::sqrt(sv);
  const Eigen::VectorXd z = (obs_.y.array() - hp_.mean_const) / scale;
  alpha_ = llt.solve(z);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(chol_l_(i, i));
  logdet = 2.0 * logdet + n * hp_.log_signal_var;
  lml_ = -0.5 * z.dot(alpha_) - 0.5 * logdet -
         0.5 * n * std::log(2.0 * kPi);
}

void GpModel::posterior(const Eigen::MatrixXd& xq, Eigen::VectorXd& mu,
                        Eigen::VectorXd& var) const {
  const Eigen::Index m = xq.rows(), n = obs_.x.rows();
  const double sv = std::exp(hp_.log_signal_var);
  if (n == 0) {
    mu = Eigen::VectorXd::Constant(m, hp_.mean_const);
    var = Eigen::VectorXd::Constant(m, sv);
    return;
  }
  const Eigen::VectorXd ls = hp_.log_lengthscale.array().exp();
  const Eigen::MatrixXd c = corr_matrix(obs_.x, xq, ls);  // n x m
  const double scale = std::sqrt(sv);
  mu = (hp_.mean_const + (scale * (c.transpose() * alpha_)).array()).matrix();
  const Eigen::MatrixXd v =
      chol_l_.triangularView<Eigen::Lower>().solve(c);  // n x m
  var = (sv *
         (1.0 - v.colwise().squaredNorm().transpose().array()).max(0.0))
            .matrix();
}

Eigen::VectorXd GpModel::sample_joint(const Eigen::MatrixXd& xq, Rng& rng) const {
  const Eigen::Index m = xq.rows(), n = obs_.x.rows();
  const double sv = std::exp(hp_.log_signal_var);
  const double scale = std::sqrt(sv);
  const Eigen::VectorXd ls = hp_.log_lengthscale.array().exp();

  Eigen::VectorXd mean;
  Eigen::MatrixXd cov = corr_matrix(xq, xq, ls);
  if (n == 0) {
    mean = Eigen::VectorXd::Constant(m, hp_.mean_const);
  } else {
    const Eigen::MatrixXd c = corr_matrix(obs_.x, xq, ls);
    mean =
        (hp_.mean_const + (scale * (c.transpose() * alpha_)).array()).matrix();
    const Eigen::MatrixXd v = chol_l_.triangularView<Eigen::Lower>().solve(c);
    cov -= v.transpose() * v;
  }

  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();

  for (double jitter : {1e-12, 1e-10}) {
    Eigen::MatrixXd cj = cov;
    cj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cj);
    if (llt.info() == Eigen::Success)
      return mean + scale * (Eigen::MatrixXd(llt.matrixL()) * z);
  }
  // Clamped eigendecomposition keeps exact duplicates exactly tied.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd evs = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return mean + scale * (es.eigenvectors() * evs.asDiagonal() * z);
}

GpModel GpModel::fit(const ObservationSet& obs, std::uint64_t seed,
                     const FitOptions& opts) {
  const int n = obs.size();
  const int d = obs.dim();
  GpHyperparams hp;
  hp.log_lengthscale = Eigen::VectorXd::Constant(std::max(d, 0), std::log(0.5));
  if (n == 0) return with_hyperparams(obs, hp);

  const double mean = obs.y.mean();
  const double var = (obs.y.array() - mean).square().sum() / std::max(n - 1, 1);
  hp.mean_const = mean;
  if (n < 2 || var < 1e-12 * std::max(1.0, mean * mean)) {
    hp.log_signal_var = std::log(1e-12);
    hp.log_noise_var = std::log(1e-12);
    return with_hyperparams(obs, hp);
  }

  const double sd = std::sqrt(var);
  const Eigen::VectorXd z = (obs.y.array() - mean) / sd;
  const Bounds bounds = make_bounds(d);
  auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd* g) {
    const Eigen::VectorXd theta = squash(u, bounds);
    if (!g) return neg_lml(obs.x, z, theta, nullptr);
    Eigen::VectorXd gt;
    const double f = neg_lml(obs.x, z, theta, &gt);
    g->resize(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double s = sigmoid(u[i]);
      (*g)[i] = gt[i] * (bounds.hi[i] - bounds.lo[i]) * s * (1.0 - s);
    }
    return f;
  };

  double best_f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  const int restarts = std::max(opts.restarts, 1);
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd theta0(d + 2);
    if (r == 0) {
      if (opts.warm_start) {
        theta0.head(d) = opts.warm_start->log_lengthscale;
        theta0[d] = opts.warm_start->log_signal_var - std::log(var);
        theta0[d + 1] = opts.warm_start->log_noise_var - std::log(var);
      } else {
        theta0.head(d).setConstant(std::log(0.5));
        theta0[d] = 0.0;
        theta0[d + 1] = std::log(1e-2);
      }
    } else {
      Rng rng = Rng::stream(seed, {fnv1a64("gpfit"), static_cast<std::uint64_t>(r)});
      for (int i = 0; i < d; ++i)
        theta0[i] = rng.uniform(std::log(0.05), std::log(2.0));
      theta0[d] = rng.uniform(std::log(0.3), std::log(3.0));
      theta0[d + 1] = rng.uniform(std::log(1e-4), std::log(1e-1));
    }
    Eigen::VectorXd u = unsquash(theta0, bounds);
    const double f = lbfgs_minimize(objective, u, opts.max_iter);
    if (f < best_f) {
      best_f = f;
      best_theta = squash(u, bounds);
    }
  }

  hp.log_lengthscale = best_theta.head(d);
  hp.log_signal_var = best_theta[d] + std::log(var);
  hp.log_noise_var = best_theta[d + 1] + std::log(var);
  return with_hyperparams(obs, hp);
}

std::string GpModel::to_json() const {
  nlohmann::json j;
  j["log_lengthscale"] = std::vector<double>(
      hp_.log_lengthscale.data(),
      hp_.log_lengthscale.data() + hp_.log_lengthscale.size());
  j["log_signal_var"] = hp_.log_signal_var;
  j["log_noise_var"] = hp_.log_noise_var;
  j["mean_const"] = hp_.mean_const;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < obs_.x.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < obs_.x.cols(); ++k) row.push_back(obs_.x(i, k));
    rows.push_back(std::move(row));
  }
  j["x"] = std::move(rows);
  j["y"] = std::vector<double>(obs_.y.data(), obs_.y.data() + obs_.y.size());
  j["dim"] = obs_.dim();
  return j.dump();
}

GpModel GpModel::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  GpHyperparams hp;
  const auto ls = j.at("log_lengthscale").get<std::vector<double>>();
  hp.log_lengthscale = Eigen::Map<const Eigen::VectorXd>(ls.data(), ls.size());
  hp.log_signal_var = j.at("log_signal_var").get<double>();
  hp.log_noise_var = j.at("log_noise_var").get<double>();
  hp.mean_const = j.at("mean_const").get<double>();
  ObservationSet obs;
  const auto yv = j.at("y").get<std::vector<double>>();
  const int dim = j.at("dim").get<int>();
  obs.x.resize(yv.size(), dim);
  obs.y = Eigen::Map<const Eigen::VectorXd>(yv.data(), yv.size());
  const auto& rows = j.at("x");
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < dim; ++k) obs.x(i, k) = rows[i][k].get<double>();
  return with_hyperparams(std::move(obs), std::move(hp));
}

}  // namespace celltune
