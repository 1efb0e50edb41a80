#pragma once

#include <celltune/bo.hpp>
#include <celltune/turbo.hpp>

#include <Eigen/Dense>

#include <vector>

namespace celltune {

// Observations carried over from a finished run, inputs in the unit cube.
struct SourceData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// Initial dataset for a seeded trust-region run. ceil(mix * n_init) slots
// stay fresh, taken verbatim from the cold-start design; the remainder is
// filled with the source's best observations (value descending, ties keeping
// source order), injected without spending evaluations. mix = 1 reproduces
// the cold start exactly; a short source fills what it can.
TurboSeed build_seeded_dataset(const SourceData& source, double mix, int dim,
                               const TurboConfig& cfg);

struct TransferArm {
  double mix = 1.0;
  RunTrace trace;
};

// One seeded run per mix fraction, all under the same config and budget.
std::vector<TransferArm> run_transfer_experiment(
    const ObjectiveFn& target, const BoxBounds& box, const TurboConfig& cfg,
    const SourceData& source, const std::vector<double>& mixes);

}  // namespace celltune
