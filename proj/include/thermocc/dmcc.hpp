#pragma once

#include <functional>
#include <string>

#include "thermocc/amplitudes.hpp"
#include "thermocc/model.hpp"
#include "thermocc/observables.hpp"
#include "thermocc/rk4.hpp"
#include "thermocc/super_hamiltonian.hpp"
#include "thermocc/wick.hpp"

namespace thermocc {

enum class DmccMethod { singles, singles_doubles };

std::string to_string(DmccMethod m);

/// Largest bath allowed for the doubles block without allow_large_doubles.
inline constexpr int kDoublesDefaultMaxBath = 30;

/// Generator at an arbitrary (stage) time.
using ShBuilder = std::function<const SuperHamiltonian&(double)>;

/// max over spins of max |t1 - t1^dag|.
double hermiticity_deviation(const ClusterAmplitudes& state);

/// One classical RK4 step of dt/dt = -i R(t). Same-spin t2 blocks are
/// re-antisymmetrized afterwards. Throws NumericalError on non-finite values.
ClusterAmplitudes rk4_step(const ClusterAmplitudes& state, const ShBuilder& sh_builder, const Evaluator& evaluator,
                           double dt);

/// Stateful integrator for one quench trajectory.
class DmccPropagator {
 public:
  DmccPropagator(const SiamConfig& config, DmccMethod method);

  void step();
  double time() const { return state_.time; }
  const ClusterAmplitudes& state() const { return state_; }
  const SuperHamiltonian& super_hamiltonian() const { return sh_; }
  const Occupations& occupations() const { return occ_; }
  const ContractionProgram& program() const { return evaluator_.program(); }

  /// Per-spin <a+ a> for every orbital.
  std::array<RVector, 2> numbers() const;
  TrajectoryPoint measure() const;

  /// Largest antisymmetry defect removed by the post-step projection.
  double max_antisymmetry_defect() const { return max_antisym_defect_; }

 private:
  SiamConfig config_;
  DmccMethod method_;
  Occupations occ_;
  SuperHamiltonian sh_;
  Evaluator evaluator_;
  ClusterAmplitudes state_;
  Rk4Workspace<ClusterAmplitudes> ws_;
  double max_antisym_defect_ = 0.0;
};

/// Quench from the decoupled thermal reference; records every output_interval.
TrajectoryRecord run_quench(const SiamConfig& config, DmccMethod method);

}  // namespace thermocc
