#pragma once

#include <array>
#include <vector>

#include "thermocc/model.hpp"
#include "thermocc/operators.hpp"

namespace thermocc {

/// Generator of the density-matrix ket in the thermal quasi-particle
/// representation:
///
///   H' = sum_{pq,s} h_pq b+_ps b_qs - h*_pq b~+_ps b~_qs + P_pq b+_ps b~+_qs + W'
///
/// h carries the mean-field shift and the -i gamma broadening of the bath
/// levels, P is the (antisymmetric) pairing matrix and W' the remaining
/// normal-ordered monomials of the Hubbard term.
struct SuperHamiltonian {
  int n_orbitals = 0;
  std::array<CMatrix, 2> h;
  std::array<CMatrix, 2> pairing;
  std::vector<OperatorTerm> interaction;

  // h(0,0) = impurity_level(t) + level_offset
  std::array<Complex, 2> level_offset{};
  double epsilon0 = 0.0;
  double delta_eps = 0.0;
  double omega = 0.0;
  double time = 0.0;

  CMatrix h_tilde(Spin s) const { return -h[spin_index(s)].conjugate(); }

  /// Re-evaluates the driven impurity entry h(0,0) at time t.
  void set_time(double t);
};

/// H - H~ + D in the untransformed alphabet (dissipator on bath levels only).
std::vector<BareTerm> bare_generator_terms(const SiamConfig& config, const BathDiscretization& bath,
                                           const Occupations& occ, double t);

/// Bogoliubov-transforms the bare generator and sorts the normal-ordered
/// result into one-body, pairing and interaction parts.
SuperHamiltonian build_super_hamiltonian(const SiamConfig& config, const BathDiscretization& bath,
                                         const Occupations& occ, double t = 0.0);

/// Every stored term, viewed as a list of normal-ordered monomials.
std::vector<OperatorTerm> all_terms(const SuperHamiltonian& sh);

struct TraceCheck {
  bool ok = true;
  std::vector<OperatorTerm> offending;
};

/// <1| H' = 0 holds iff every normal-ordered monomial has a creation symbol.
TraceCheck verify_trace_preservation(const SuperHamiltonian& sh);
TraceCheck verify_trace_preservation(const std::vector<OperatorTerm>& terms);

/// <a+_is a_is> = v_is + t1_ii(s).
std::array<RVector, 2> number_expectation(const Occupations& occ, const std::array<CMatrix, 2>& t1);

}  // namespace thermocc
