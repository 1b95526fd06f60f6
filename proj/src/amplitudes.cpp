#include "thermocc/amplitudes.hpp"

#include <algorithm>
#include <cmath>

namespace thermocc {

namespace {

Eigen::Map<CVector> flat(Tensor4& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }
Eigen::Map<const CVector> flat(const Tensor4& t) { return {t.data(), static_cast<Eigen::Index>(t.size())}; }

}  // namespace

ClusterAmplitudes ClusterAmplitudes::zero(int n, bool with_doubles) {
  ClusterAmplitudes a;
  for (auto& m : a.t1) m = CMatrix::Zero(n, n);
  if (with_doubles) {
    for (auto& t : a.t2) {
      t.resize(n, n, n, n);
      t.setZero();
    }
  }
  return a;
}

void ClusterAmplitudes::set_zero() {
  for (auto& m : t1) m.setZero();
  for (auto& t : t2) t.setZero();
}

bool ClusterAmplitudes::all_finite() const {
  for (const auto& m : t1)
    if (!m.allFinite()) return false;
  for (const auto& t : t2)
    if (!flat(t).allFinite()) return false;
  return true;
}

double ClusterAmplitudes::max_abs() const {
  double m = 0.0;
  for (const auto& x : t1)
    if (x.size() > 0) m = std::max(m, x.cwiseAbs().maxCoeff());
  for (const auto& t : t2)
    if (t.size() > 0) m = std::max(m, flat(t).cwiseAbs().maxCoeff());
  return m;
}

void assign_axpy(ClusterAmplitudes& out, const ClusterAmplitudes& y, Complex a, const ClusterAmplitudes& k) {
  for (int s = 0; s < 2; ++s) out.t1[s] = y.t1[s] + a * k.t1[s];
  for (int b = 0; b < 3; ++b) {
    if (y.t2[b].size() == 0) continue;
    if (out.t2[b].size() != y.t2[b].size()) out.t2[b].resize(y.t2[b].dimensions());
    flat(out.t2[b]) = flat(y.t2[b]) + a * flat(k.t2[b]);
  }
}

void stage_accumulate(ClusterAmplitudes& stage, ClusterAmplitudes& acc, const ClusterAmplitudes& y, double a, double b,
                      const ClusterAmplitudes& k, bool first) {
  for (int s = 0; s < 2; ++s) {
    stage.t1[s] = y.t1[s] + a * k.t1[s];
    if (first) acc.t1[s] = y.t1[s] + b * k.t1[s];
    else acc.t1[s] += b * k.t1[s];
  }
  for (int blk = 0; blk < 3; ++blk) {
    if (y.t2[blk].size() == 0) continue;
    if (stage.t2[blk].size() != y.t2[blk].size()) stage.t2[blk].resize(y.t2[blk].dimensions());
    if (acc.t2[blk].size() != y.t2[blk].size()) acc.t2[blk].resize(y.t2[blk].dimensions());
    // One sweep over the large blocks.
    const Complex* __restrict yp = y.t2[blk].data();
    const Complex* __restrict kp = k.t2[blk].data();
    Complex* __restrict sp = stage.t2[blk].data();
    Complex* __restrict ap = acc.t2[blk].data();
    const Eigen::Index size = y.t2[blk].size();
    if (first) {
      for (Eigen::Index x = 0; x < size; ++x) {
        sp[x] = yp[x] + a * kp[x];
        ap[x] = yp[x] + b * kp[x];
      }
    } else {
      for (Eigen::Index x = 0; x < size; ++x) {
        sp[x] = yp[x] + a * kp[x];
        ap[x] += b * kp[x];
      }
    }
  }
}

void scale(ClusterAmplitudes& x, Complex a) {
  for (auto& m : x.t1) m *= a;
  for (auto& t : x.t2)
    if (t.size() > 0) flat(t) *= a;
}

void add_scaled(ClusterAmplitudes& acc, Complex a, const ClusterAmplitudes& k) {
  for (int s = 0; s < 2; ++s) acc.t1[s] += a * k.t1[s];
  for (int b = 0; b < 3; ++b) {
    if (acc.t2[b].size() == 0) continue;
    flat(acc.t2[b]) += a * flat(k.t2[b]);
  }
}

void antisymmetrize(Tensor4& t) {
  const Eigen::Index n = t.dimension(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i; k < n; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index l = j; l < n; ++l) {
          const Complex a = 0.25 * (t(i, k, j, l) - t(k, i, j, l) - t(i, k, l, j) + t(k, i, l, j));
          t(i, k, j, l) = a;
          t(k, i, j, l) = -a;
          t(i, k, l, j) = -a;
          t(k, i, l, j) = a;
        }
      }
    }
  }
}

double antisymmetry_deviation(const Tensor4& t) {
  const Eigen::Index n = t.dimension(0);
  double dev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index l = 0; l < n; ++l) {
          dev = std::max(dev, std::norm(t(i, k, j, l) + t(k, i, j, l)));
          dev = std::max(dev, std::norm(t(i, k, j, l) + t(i, k, l, j)));
        }
  return std::sqrt(dev);
}

}  // namespace thermocc
