#include "thermocc/observables.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace thermocc {

ImpurityObservables impurity_observables(double n_alpha, double n_beta) {
  return {n_alpha + n_beta, n_alpha - n_beta};
}

double total_number(const std::array<RVector, 2>& numbers) { return numbers[0].sum() + numbers[1].sum(); }

void TrajectoryRecord::push(TrajectoryPoint p) {
  if (!points_.empty() && !(p.time > points_.back().time))
    throw std::logic_error("TrajectoryRecord: timestamps must increase strictly");
  const auto obs = impurity_observables(p.n_imp_alpha, p.n_imp_beta);
  p.n_total = obs.n_total;
  p.polarization = obs.polarization;
  points_.push_back(p);
}

const TrajectoryPoint* TrajectoryRecord::at(double t) const {
  for (const auto& p : points_)
    if (std::abs(p.time - t) < 1e-9) return &p;
  return nullptr;
}

int record_stride(double output_interval, double dt) {
  const double r = output_interval / dt;
  const int stride = static_cast<int>(std::lround(r));
  if (stride < 1 || std::abs(r - stride) > 1e-6 * r)
    throw ConfigError("output_interval must be a positive integer multiple of dt");
  return stride;
}

TrajectoryRecord quadratic_oracle(const SiamConfig& config) {
  if (config.U != 0.0) throw ConfigError("quadratic oracle requires U = 0");
  if (config.gamma != 0.0 || config.delta_eps != 0.0)
    throw ConfigError("quadratic oracle requires gamma = 0 and delta_eps = 0");

  const BathDiscretization bath = build_bath(config);
  const Occupations occ = make_occupations(config, bath);
  const RMatrix h = one_body_matrix(config, bath);
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(h);
  const RMatrix& Q = eig.eigenvectors();
  const RVector& lambda = eig.eigenvalues();

  TrajectoryRecord rec("quadratic");
  const int stride = record_stride(config.output_interval, config.dt);
  const long steps = std::lround(config.t_final / config.dt);
  for (long step = 0; step <= steps; step += stride) {
    const double t = step * config.dt;
    const CVector phase = (-I * t * lambda.cast<Complex>()).array().exp();
    // U(t) = Q diag(phase) Q^T
    const CMatrix Ut = Q.cast<Complex>() * phase.asDiagonal() * Q.transpose().cast<Complex>();
    const RMatrix w = Ut.cwiseAbs2();
    std::array<RVector, 2> n;
    for (int s = 0; s < 2; ++s) n[s] = w * occ.v[s];
    TrajectoryPoint p;
    p.time = t;
    p.n_imp_alpha = n[0](0);
    p.n_imp_beta = n[1](0);
    p.n_electrons = total_number(n);
    p.trace_dev = 0.0;
    rec.push(p);
  }
  return rec;
}

}  // namespace thermocc
