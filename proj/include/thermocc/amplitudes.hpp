#pragma once

#include <array>

#include <unsupported/Eigen/CXX11/Tensor>

#include "thermocc/types.hpp"

namespace thermocc {

using Tensor4 = Eigen::Tensor<Complex, 4, Eigen::RowMajor>;

/// Spin blocks of the doubles amplitudes. Same-spin blocks are antisymmetric
/// in (i,k) and (j,l); the mixed block stores t^{i(a) k(b)}_{j(a) l(b)}.
enum class DoublesBlock : int { aa = 0, bb = 1, ab = 2 };

inline constexpr DoublesBlock kDoublesBlocks[3] = {DoublesBlock::aa, DoublesBlock::bb, DoublesBlock::ab};

constexpr int block_index(DoublesBlock b) { return static_cast<int>(b); }

/// t1[s](i,j) multiplies b+_is b~+_js; t2 blocks are indexed (i,k,j,l) and
/// multiply b+_i b+_k b~+_l b~+_j. The same container holds residuals.
struct ClusterAmplitudes {
  std::array<CMatrix, 2> t1;
  std::array<Tensor4, 3> t2;
  double time = 0.0;

  static ClusterAmplitudes zero(int n_orbitals, bool with_doubles);

  int n_orbitals() const { return static_cast<int>(t1[0].rows()); }
  bool has_doubles() const { return t2[0].size() > 0; }

  void set_zero();
  bool all_finite() const;
  double max_abs() const;
};

/// out = y + a * k
void assign_axpy(ClusterAmplitudes& out, const ClusterAmplitudes& y, Complex a, const ClusterAmplitudes& k);
/// x *= a
/// stage = y + a k; acc = y + b k when `first`, else acc += b k.
void stage_accumulate(ClusterAmplitudes& stage, ClusterAmplitudes& acc, const ClusterAmplitudes& y, double a, double b,
                      const ClusterAmplitudes& k, bool first);
void scale(ClusterAmplitudes& x, Complex a);
/// acc += a * k
void add_scaled(ClusterAmplitudes& acc, Complex a, const ClusterAmplitudes& k);

/// Projects a same-spin block onto its antisymmetric part in (i,k) and (j,l).
void antisymmetrize(Tensor4& t);

/// max |t - P_ik t| and max |t - P_jl t| deviations from antisymmetry.
double antisymmetry_deviation(const Tensor4& t);

}  // namespace thermocc
