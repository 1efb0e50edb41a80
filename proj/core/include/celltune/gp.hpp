#pragma once

#include <celltune/rng.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

namespace celltune {

// Matern-5/2 correlation with per-dimension lengthscales, unit signal.
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const Eigen::VectorXd& lengthscale);

struct ObservationSet {
  Eigen::MatrixXd x;  // n x d, expected in the unit cube
  Eigen::VectorXd y;  // n

  void add(const Eigen::VectorXd& xi, double yi);
  int size() const { return static_cast<int>(y.size()); }
  int dim() const { return static_cast<int>(x.cols()); }
};

struct GpHyperparams {
  Eigen::VectorXd log_lengthscale;  // d
  double log_signal_var = 0.0;
  double log_noise_var = std::log(1e-6);
  double mean_const = 0.0;
};

struct FitOptions {
  int restarts = 8;
  int max_iter = 60;
  std::optional<GpHyperparams> warm_start;  // used as the first restart
};

// Exact GP with constant mean. Hyperparameters live on the raw output scale;
// the factorization runs on signal-normalized values with a relative nugget
// of 1e-6 so conditioning does not depend on the objective's magnitude.
class GpModel {
 public:
  static GpModel with_hyperparams(ObservationSet obs, GpHyperparams hp);
  // MAP type-II fit: multistart L-BFGS on log hyperparameters squashed into
  // lengthscale [5e-3, 10] and noise [1e-8, value variance] bounds.
  static GpModel fit(const ObservationSet& obs, std::uint64_t seed,
                     const FitOptions& opts = {});

  // Latent posterior (no observation noise added to var).
  void posterior(const Eigen::MatrixXd& xq, Eigen::VectorXd& mu,
                 Eigen::VectorXd& var) const;
  // One joint draw over the query rows; duplicated rows get equal values.
  Eigen::VectorXd sample_joint(const Eigen::MatrixXd& xq, Rng& rng) const;

  const GpHyperparams& hyperparams() const { return hp_; }
  const ObservationSet& data() const { return obs_; }
  double log_marginal() const { return lml_; }

  std::string to_json() const;
  static GpModel from_json(const std::string& text);

 private:
  GpModel() = default;
  void factorize();

  ObservationSet obs_;
  GpHyperparams hp_;
  Eigen::MatrixXd chol_l_;   // lower factor of the normalized kernel matrix
  Eigen::VectorXd alpha_;    // solve of the normalized residuals
  double lml_ = 0.0;
};

}  // namespace celltune
