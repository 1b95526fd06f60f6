#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "thermocc/model.hpp"

namespace thermocc {

struct ImpurityObservables {
  double n_total = 0.0;
  double polarization = 0.0;
};

ImpurityObservables impurity_observables(double n_alpha, double n_beta);

/// Sum of <a+ a> over every spin-orbital.
double total_number(const std::array<RVector, 2>& numbers);

/// One recorded time. Diagnostics a method cannot provide stay empty.
struct TrajectoryPoint {
  double time = 0.0;
  double n_imp_alpha = 0.0;
  double n_imp_beta = 0.0;
  double n_total = 0.0;
  double polarization = 0.0;
  double n_electrons = 0.0;
  std::optional<double> trace_dev;
  std::optional<double> herm_dev;
  std::optional<double> discarded_weight;
};

/// Observable time series with strictly increasing timestamps.
class TrajectoryRecord {
 public:
  TrajectoryRecord() = default;
  explicit TrajectoryRecord(std::string method) : method_(std::move(method)) {}

  /// Fills n_total and polarization from the per-spin impurity numbers.
  void push(TrajectoryPoint p);

  const std::vector<TrajectoryPoint>& points() const { return points_; }
  const std::string& method() const { return method_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const TrajectoryPoint& back() const { return points_.back(); }
  const TrajectoryPoint& operator[](std::size_t i) const { return points_[i]; }

  /// Point recorded at time t (within 1e-9), if any.
  const TrajectoryPoint* at(double t) const;

 private:
  std::string method_;
  std::vector<TrajectoryPoint> points_;
};

/// Number of output steps between records for a given dt.
int record_stride(double output_interval, double dt);

/// Exact U = 0 populations: n_i(t) = sum_k f_k |[exp(-i h t)]_ik|^2 per spin.
TrajectoryRecord quadratic_oracle(const SiamConfig& config);

}  // namespace thermocc
