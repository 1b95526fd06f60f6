#pragma once

#include <array>
#include <vector>

#include "thermocc/types.hpp"

namespace thermocc {

/// All physical and numerical parameters of one run. Energies in eV,
/// times in 1/eV (hbar = 1). Defaults reproduce the asymmetric base case.
struct SiamConfig {
  double epsilon0 = -0.08;
  double V = 0.04;
  double U = 0.1;
  double temperature = 0.04;
  double gamma = 0.0;
  double delta_eps = 0.0;
  double omega = 0.0;
  double lambda_disc = 1.1;
  int n_bath = 100;
  double band_halfwidth = 1.0;
  double dt = 0.01;
  double t_final = 200.0;
  double init_imp_occ_alpha = 1.0;
  double init_imp_occ_beta = 0.0;
  double svd_threshold = 1e-12;
  int max_bond = 200;
  double output_interval = 0.5;
  bool allow_large_doubles = false;

  int n_orbitals() const { return n_bath + 1; }
};

/// Throws ConfigError naming the offending key.
void validate(const SiamConfig& config);

struct BathDiscretization {
  std::vector<double> energies;
  std::vector<double> couplings;
};

/// Logarithmic (Wilson) discretization of a flat band of half-width D.
/// Levels are sorted by energy; index i here is bath orbital i + 1.
BathDiscretization build_bath(const SiamConfig& config);

/// Fermi-Dirac number at chemical potential zero; exact step at T = 0.
double occupation(double eps, double temperature);

/// epsilon0 + delta_eps * sin(omega t).
double impurity_level(double t, const SiamConfig& config);

/// Reference occupations v (u = 1 - v) per spin over orbitals 0..N_b.
/// Orbital 0 is the impurity and takes the configured initial occupation.
struct Occupations {
  std::array<RVector, 2> v;

  int n_orbitals() const { return static_cast<int>(v[0].size()); }
  double v_of(Spin s, int i) const { return v[spin_index(s)](i); }
  double u_of(Spin s, int i) const { return 1.0 - v[spin_index(s)](i); }
};

Occupations make_occupations(const SiamConfig& config, const BathDiscretization& bath);

/// One-body Hamiltonian of the coupled, non-interacting model (impurity level
/// at time t, bath levels, hybridization); identical for both spins.
RMatrix one_body_matrix(const SiamConfig& config, const BathDiscretization& bath, double t = 0.0);

}  // namespace thermocc
