#include "thermocc/dmcc.hpp"

#include <cmath>
#include <sstream>

namespace thermocc {

std::string to_string(DmccMethod m) { return m == DmccMethod::singles ? "dmcc-s" : "dmcc-sd"; }

double hermiticity_deviation(const ClusterAmplitudes& state) {
  double dev = 0.0;
  for (const auto& t : state.t1)
    if (t.size() > 0) dev = std::max(dev, (t - t.adjoint()).cwiseAbs().maxCoeff());
  return dev;
}

namespace {

void residual_derivative(const ShBuilder& sh_builder, const Evaluator& evaluator, double t,
                         const ClusterAmplitudes& y, ClusterAmplitudes& dydt) {
  evaluator.evaluate(sh_builder(t), y, dydt, Complex{0.0, -1.0});
}

double enforce_antisymmetry(ClusterAmplitudes& s) {
  if (!s.has_doubles()) return 0.0;
  double defect = 0.0;
  for (DoublesBlock b : {DoublesBlock::aa, DoublesBlock::bb}) {
    Tensor4& t = s.t2[block_index(b)];
    defect = std::max(defect, antisymmetry_deviation(t));
    antisymmetrize(t);
  }
  return defect;
}

void check_finite(const ClusterAmplitudes& s) {
  if (!s.all_finite()) {
    std::ostringstream os;
    os << "non-finite cluster amplitudes at t = " << s.time;
    throw NumericalError(os.str());
  }
}

}  // namespace

ClusterAmplitudes rk4_step(const ClusterAmplitudes& state, const ShBuilder& sh_builder, const Evaluator& evaluator,
                           double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  ClusterAmplitudes y = state;
  Rk4Workspace<ClusterAmplitudes> ws;
  auto f = [&](double t, const ClusterAmplitudes& x, ClusterAmplitudes& dx) {
    residual_derivative(sh_builder, evaluator, t, x, dx);
  };
  rk4_advance(y, state.time, dt, f, ws);
  y.time = state.time + dt;
  check_finite(y);
  enforce_antisymmetry(y);
  return y;
}

DmccPropagator::DmccPropagator(const SiamConfig& config, DmccMethod method)
    : config_(config), method_(method), evaluator_(ContractionProgram{}) {
  validate(config_);
  const bool doubles = method == DmccMethod::singles_doubles;
  if (doubles && config_.n_bath > kDoublesDefaultMaxBath && !config_.allow_large_doubles) {
    std::ostringstream os;
    os << "doubles amplitudes for n_bath = " << config_.n_bath << " need about "
       << 3.0 * std::pow(config_.n_bath + 1.0, 4) * 16.0 * 7.0 / 1e9
       << " GB; set allow_large_doubles = true to proceed";
    throw CapacityError(os.str());
  }
  const BathDiscretization bath = build_bath(config_);
  occ_ = make_occupations(config_, bath);
  sh_ = build_super_hamiltonian(config_, bath, occ_, 0.0);

  OneBodyLayout layout = OneBodyLayout::arrowhead;
  for (Spin s : kSpins)
    if (!is_arrowhead(sh_.h[spin_index(s)]) || !is_arrowhead(sh_.pairing[spin_index(s)]))
      layout = OneBodyLayout::dense;
  evaluator_ =
      Evaluator(generate_eom(sh_, doubles ? Truncation::singles_doubles : Truncation::singles, layout));
  state_ = ClusterAmplitudes::zero(config_.n_orbitals(), doubles);
}

void DmccPropagator::step() {
  ShBuilder builder = [this](double t) -> const SuperHamiltonian& {
    sh_.set_time(t);
    return sh_;
  };
  auto f = [&](double t, const ClusterAmplitudes& x, ClusterAmplitudes& dx) {
    residual_derivative(builder, evaluator_, t, x, dx);
  };
  const double t0 = state_.time;
  rk4_advance(state_, t0, config_.dt, f, ws_);
  state_.time = t0 + config_.dt;
  check_finite(state_);
  max_antisym_defect_ = std::max(max_antisym_defect_, enforce_antisymmetry(state_));
}

std::array<RVector, 2> DmccPropagator::numbers() const { return number_expectation(occ_, state_.t1); }

TrajectoryPoint DmccPropagator::measure() const {
  const auto n = numbers();
  TrajectoryPoint p;
  p.time = state_.time;
  p.n_imp_alpha = n[0](0);
  p.n_imp_beta = n[1](0);
  const ImpurityObservables imp = impurity_observables(p.n_imp_alpha, p.n_imp_beta);
  p.n_total = imp.n_total;
  p.polarization = imp.polarization;
  p.n_electrons = total_number(n);
  // <1|rho> = 1 holds identically: no scalar residual exists.
  p.trace_dev = 0.0;
  p.herm_dev = hermiticity_deviation(state_);
  return p;
}

TrajectoryRecord run_quench(const SiamConfig& config, DmccMethod method) {
  DmccPropagator prop(config, method);
  const int stride = record_stride(config.output_interval, config.dt);
  const long steps = std::lround(config.t_final / config.dt);
  TrajectoryRecord rec(to_string(method));
  rec.push(prop.measure());
  for (long step = 1; step <= steps; ++step) {
    prop.step();
    if (step % stride == 0) {
      TrajectoryPoint p = prop.measure();
      p.time = step * config.dt;
      rec.push(p);
    }
  }
  return rec;
}

}  // namespace thermocc
