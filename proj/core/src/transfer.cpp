#include <celltune/transfer.hpp>

#include <celltune/errors.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace celltune {

TurboSeed build_seeded_dataset(const SourceData& source, double mix, int dim,
                               const TurboConfig& cfg) {
  if (source.x.rows() != source.y.size())
    throw ConfigError("source values must match source points one to one");
  if (source.x.rows() > 0 && source.x.cols() != dim)
    throw ConfigError("source dimension does not match the target search space");
  if (!(mix >= 0.0 && mix <= 1.0)) throw ConfigError("mix must lie in [0, 1]");

  const int per_region = cfg.n_init_per_region > 0 ? cfg.n_init_per_region
                                                   : 2 * dim;
  const int n_init = cfg.n_regions * per_region;
  const int fresh = static_cast<int>(std::ceil(mix * n_init));
  const int copied =
      std::min<int>(n_init - fresh, static_cast<int>(source.y.size()));

  std::vector<int> order(source.y.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return source.y[a] > source.y[b]; });

  TurboSeed seed;
  seed.x.resize(fresh + copied, dim);
  seed.value.assign(static_cast<std::size_t>(fresh + copied), std::nullopt);
  if (fresh > 0)
    seed.x.topRows(fresh) = turbo_initial_design(dim, cfg).topRows(fresh);
  for (int k = 0; k < copied; ++k) {
    seed.x.row(fresh + k) = source.x.row(order[k]);
    seed.value[fresh + k] = source.y[order[k]];
  }
  return seed;
}

std::vector<TransferArm> run_transfer_experiment(
    const ObjectiveFn& target, const BoxBounds& box, const TurboConfig& cfg,
    const SourceData& source, const std::vector<double>& mixes) {
  std::vector<TransferArm> arms;
  arms.reserve(mixes.size());
  for (double mix : mixes) {
    const TurboSeed seed = build_seeded_dataset(source, mix, box.dim(), cfg);
    arms.push_back({mix, run_turbo(target, box, cfg, &seed)});
  }
  return arms;
}

}  // namespace celltune
