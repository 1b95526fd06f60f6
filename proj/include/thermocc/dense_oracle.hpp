#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/SparseCore>

#include "thermocc/amplitudes.hpp"
#include "thermocc/model.hpp"
#include "thermocc/observables.hpp"
#include "thermocc/operators.hpp"
#include "thermocc/super_hamiltonian.hpp"

namespace thermocc {

using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using DenseState = CVector;

/// Doubled Fock space over 4(N_b+1) modes. Spin-orbitals are site-major
/// (impurity alpha, impurity beta, bath 1 alpha, ...); each spin-orbital owns
/// a non-tilde mode followed by its tilde mode. Mode m is bit m of the basis
/// index; the Jordan-Wigner string runs over all lower modes.
class FockBasis {
 public:
  explicit FockBasis(int n_orbitals);

  int n_orbitals() const { return n_orbitals_; }
  int n_modes() const { return 4 * n_orbitals_; }
  Eigen::Index dimension() const { return Eigen::Index{1} << n_modes(); }

  int mode(Spin s, int orbital, bool tilde) const { return 2 * (2 * orbital + spin_index(s)) + (tilde ? 1 : 0); }

  /// Annihilator or creator of one mode, with Jordan-Wigner signs.
  SparseMatrix ladder(int mode, bool creation) const;

  /// Bare physical/tilde operator a, a+, a~, a~+.
  SparseMatrix bare(bool creation, bool tilde, Spin s, int orbital) const;

  /// Quasi-particle symbol realized as an independent fermionic mode of the
  /// same layout (used by the projection oracle, not by the Liouville path).
  SparseMatrix symbol(const OperatorSymbol& sym) const;

  SparseMatrix identity() const;

 private:
  int n_orbitals_;
};

inline constexpr int kDenseMaxBath = 4;

/// |1> = prod_i (1 + a+_i a~+_i) |0>.
DenseState unit_state(const FockBasis& basis);

/// prod_i ((1 - v_i) + v_i a+_i a~+_i) |0>, so <1|rho0> = 1 and <a+_i a_i> = v_i.
DenseState build_thermal_ket(const FockBasis& basis, const Occupations& occ);

/// Generator G(t) = G_static + drive(t) G_drive, with drive(t) = delta_eps sin(omega t).
struct DenseGenerator {
  SparseMatrix static_part;
  SparseMatrix drive_part;
  double delta_eps = 0.0;
  double omega = 0.0;

  double drive(double t) const { return delta_eps * std::sin(omega * t); }
  SparseMatrix at(double t) const;
  /// y = G(t) x
  void apply(double t, const DenseState& x, DenseState& y) const;
};

/// H - H~ + D in the untransformed alphabet, built directly from mode matrices.
DenseGenerator build_generator(const FockBasis& basis, const SiamConfig& config, const BathDiscretization& bath,
                               const Occupations& occ);

/// Matrix of one term list in the a-operator space after substituting
/// b+ = a+ - a~, b~+ = a~+ + a, b = u a - v a~+, b~ = u a~ + v a+.
SparseMatrix quasiparticle_operator(const FockBasis& basis, const std::vector<OperatorTerm>& terms,
                                    const Occupations& occ);

/// Row vectors <1| and <1| a+_is a_is used for measurement.
struct DenseMeasurement {
  CVector unit;
  std::array<std::vector<CVector>, 2> number;  // [spin][orbital]

  DenseMeasurement(const FockBasis& basis);
  Complex trace(const DenseState& rho) const { return unit.dot(rho); }
  double population(Spin s, int orbital, const DenseState& rho) const {
    return number[spin_index(s)][orbital].dot(rho).real();
  }
};

/// RK4 propagation of the density-matrix ket with the configured dt and
/// output interval.
TrajectoryRecord propagate_dense(const SiamConfig& config);

/// Lower-level entry point: propagate an explicit initial ket.
TrajectoryRecord propagate_dense(const SiamConfig& config, const DenseState& initial);

/// Residuals <0| P e^{-T} H' e^{T} |0> computed in an explicit quasi-particle
/// Fock space (N_b <= 2).
ClusterAmplitudes projection_oracle(const SuperHamiltonian& sh, const ClusterAmplitudes& amplitudes);

}  // namespace thermocc
