#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "thermocc/model.hpp"
#include "thermocc/observables.hpp"

namespace thermocc {

/// Operator on two adjacent sites; row/column index 4 * left + right.
using Matrix16 = Eigen::Matrix<Complex, 16, 16>;
using Matrix4 = Eigen::Matrix<Complex, 4, 4>;

/// Local basis of one site: index 2 * n + n~ for the occupations of the
/// site's physical mode and its tilde partner. The Jordan-Wigner order is
/// site-major with the physical mode first.
namespace local {
Matrix4 annihilate(bool tilde);
Matrix4 parity();
/// Left-site operator on the pair: X (x) 1.
Matrix16 on_left(const Matrix4& x);
/// Right-site operator on the pair with the left-site parity string.
Matrix16 on_right(const Matrix4& x);
}  // namespace local

/// Matrix-product ket over 2 (N_b + 1) sites: alpha impurity, alpha bath
/// 1..N_b, beta impurity, beta bath 1..N_b. Site k holds tensors A[s] of
/// shape bond(k) x bond(k + 1).
class MpsState {
 public:
  MpsState() = default;

  /// Product of ((1 - v)|00> + v|11>) per site.
  static MpsState thermal(const Occupations& occ);

  int n_sites() const { return static_cast<int>(sites_.size()); }
  int n_orbitals() const { return n_sites() / 2; }
  Eigen::Index bond(int k) const;
  Eigen::Index max_bond() const;
  int site_of(Spin s, int orbital) const { return spin_index(s) * n_orbitals() + orbital; }

  std::array<CMatrix, 4>& site(int k) { return sites_[static_cast<std::size_t>(k)]; }
  const std::array<CMatrix, 4>& site(int k) const { return sites_[static_cast<std::size_t>(k)]; }

  /// <1|rho>
  Complex trace() const;
  /// <1| n_k |rho> for every site.
  RVector densities() const;

  /// Full ket indexed by sum_k s_k 4^(n_sites - 1 - k). Small systems only.
  CVector to_dense() const;

  /// Binary dump: "TCMPS001", uint64 site count, uint64 bond dimensions
  /// (site count + 1), then per site the row-major complex tensor
  /// [left][state][right] as little-endian float64 (re, im) pairs.
  void save(std::ostream& os) const;
  static MpsState load(std::istream& is);

 private:
  std::vector<std::array<CMatrix, 4>> sites_;
};

/// Two-site gates for one half step.
struct GateSet {
  std::array<std::vector<Matrix16>, 2> bath;  // [spin][i - 1], impurity on the left
  Matrix16 interaction;                       // alpha impurity left, beta impurity right
  Matrix16 swap;
};

/// Fermionic exchange of two adjacent sites: the product of the physical
/// and tilde mode transpositions 1 + p+q + q+p - n_p - n_q.
Matrix16 fermionic_swap();

/// Generator blocks (H - H~ + D restricted to the pair).
Matrix16 bath_block(const SiamConfig& config, const BathDiscretization& bath, const Occupations& occ, Spin s, int i);
Matrix16 interaction_block(const SiamConfig& config, double t);

/// exp(-i K dt / 2) for every block, interaction block at time t.
GateSet build_gates(const SiamConfig& config, const BathDiscretization& bath, const Occupations& occ, double dt,
                    double t);

struct SweepStats {
  double discarded_weight = 0.0;  // sum over SVDs of the relative discarded weight
  Eigen::Index max_bond = 0;
};

/// Truncation policy; bond overflow throws CapacityError.
struct SvdPolicy {
  double threshold = 1e-12;  // relative to the largest singular value
  int max_bond = 200;
  double time = 0.0;         // reported on overflow
};

/// One full step: the forward half sweep (alpha chain with swaps, impurity
/// pair, beta chain) then its mirror image. The orthogonality centre must sit
/// on site 0 and returns there.
SweepStats sweep(MpsState& state, const GateSet& gates, const SvdPolicy& policy);

class TebdPropagator {
 public:
  explicit TebdPropagator(const SiamConfig& config);

  void step();
  double time() const { return time_; }
  const MpsState& state() const { return state_; }
  double discarded_weight() const { return discarded_; }
  TrajectoryPoint measure() const;

 private:
  SiamConfig config_;
  BathDiscretization bath_;
  Occupations occ_;
  GateSet gates_;
  MpsState state_;
  long steps_ = 0;
  double time_ = 0.0;
  double discarded_ = 0.0;
};

/// final_state, when given, receives the MPS at t_final.
TrajectoryRecord propagate_tebd(const SiamConfig& config, MpsState* final_state = nullptr);

}  // namespace thermocc
