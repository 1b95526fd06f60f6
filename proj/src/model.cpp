#include "thermocc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace thermocc {

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("invalid value for '" + key + "': " + what);
}

}  // namespace

void validate(const SiamConfig& c) {
  require(c.lambda_disc > 1.0, "lambda_disc", "must be > 1");
  require(c.n_bath > 0 && c.n_bath % 2 == 0, "n_bath", "must be a positive even integer");
  require(c.band_halfwidth > 0.0, "band_halfwidth", "must be > 0");
  require(c.dt > 0.0, "dt", "must be > 0");
  require(c.t_final >= 0.0, "t_final", "must be >= 0");
  require(c.temperature >= 0.0, "temperature", "must be >= 0");
  require(c.gamma >= 0.0, "gamma", "must be >= 0");
  require(c.init_imp_occ_alpha >= 0.0 && c.init_imp_occ_alpha <= 1.0, "init_imp_occ_alpha",
          "must lie in [0, 1]");
  require(c.init_imp_occ_beta >= 0.0 && c.init_imp_occ_beta <= 1.0, "init_imp_occ_beta",
          "must lie in [0, 1]");
  require(c.svd_threshold >= 0.0, "svd_threshold", "must be >= 0");
  require(c.max_bond >= 1, "max_bond", "must be >= 1");
  require(c.output_interval > 0.0, "output_interval", "must be > 0");
}

BathDiscretization build_bath(const SiamConfig& config) {
  if (config.n_bath <= 0 || config.n_bath % 2 != 0)
    throw ConfigError("invalid value for 'n_bath': must be a positive even integer");
  if (!(config.lambda_disc > 1.0)) throw ConfigError("invalid value for 'lambda_disc': must be > 1");

  const int per_side = config.n_bath / 2;
  const double D = config.band_halfwidth;
  const double L = config.lambda_disc;

  std::vector<double> mid(per_side), width(per_side);
  for (int n = 0; n < per_side; ++n) {
    const double hi = D * std::pow(L, -n);
    const double lo = D * std::pow(L, -(n + 1));
    mid[n] = 0.5 * (hi + lo);
    width[n] = hi - lo;
  }
  const double total_width = 2.0 * std::accumulate(width.begin(), width.end(), 0.0);

  // Pair (energy, width) for both band sides, then sort by energy.
  std::vector<std::pair<double, double>> levels;
  levels.reserve(config.n_bath);
  for (int n = 0; n < per_side; ++n) {
    levels.emplace_back(-mid[n], width[n]);
    levels.emplace_back(mid[n], width[n]);
  }
  std::sort(levels.begin(), levels.end());

  BathDiscretization bath;
  bath.energies.reserve(config.n_bath);
  bath.couplings.reserve(config.n_bath);
  for (const auto& [e, w] : levels) {
    bath.energies.push_back(e);
    bath.couplings.push_back(config.V * std::sqrt(w / total_width));
  }
  return bath;
}

double occupation(double eps, double temperature) {
  if (temperature <= 0.0) {
    if (eps < 0.0) return 1.0;
    if (eps > 0.0) return 0.0;
    return 0.5;
  }
  const double x = eps / temperature;
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (std::exp(x) + 1.0);
}

double impurity_level(double t, const SiamConfig& config) {
  return config.epsilon0 + config.delta_eps * std::sin(config.omega * t);
}

Occupations make_occupations(const SiamConfig& config, const BathDiscretization& bath) {
  const int n = static_cast<int>(bath.energies.size()) + 1;
  Occupations occ;
  for (Spin s : kSpins) {
    RVector v(n);
    v(0) = s == Spin::alpha ? config.init_imp_occ_alpha : config.init_imp_occ_beta;
    for (int i = 1; i < n; ++i) v(i) = occupation(bath.energies[i - 1], config.temperature);
    occ.v[spin_index(s)] = v;
  }
  return occ;
}

RMatrix one_body_matrix(const SiamConfig& config, const BathDiscretization& bath, double t) {
  const int n = static_cast<int>(bath.energies.size()) + 1;
  RMatrix h = RMatrix::Zero(n, n);
  h(0, 0) = impurity_level(t, config);
  for (int i = 1; i < n; ++i) {
    h(i, i) = bath.energies[i - 1];
    h(0, i) = bath.couplings[i - 1];
    h(i, 0) = bath.couplings[i - 1];
  }
  return h;
}

}  // namespace thermocc
