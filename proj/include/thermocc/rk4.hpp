#pragma once

#include "thermocc/types.hpp"

namespace thermocc {

// Vector-space operations used by rk4_advance; ClusterAmplitudes provides
// its own overloads.
inline void assign_axpy(CVector& out, const CVector& y, Complex a, const CVector& k) { out = y + a * k; }
inline void add_scaled(CVector& acc, Complex a, const CVector& k) { acc += a * k; }
inline void stage_accumulate(CVector& stage, CVector& acc, const CVector& y, double a, double b, const CVector& k,
                             bool first) {
  stage = y + a * k;
  if (first) acc = y + b * k;
  else acc += b * k;
}

template <class State>
struct Rk4Workspace {
  State k, stage, acc;
};

/// Classical fourth-order Runge-Kutta step y(t) -> y(t + dt), arranged so
/// each stage touches the state once. `derivative(time, y, dydt)` must
/// overwrite dydt.
template <class State, class Derivative>
void rk4_advance(State& y, double t, double dt, Derivative&& derivative, Rk4Workspace<State>& ws) {
  derivative(t, y, ws.k);
  stage_accumulate(ws.stage, ws.acc, y, 0.5 * dt, dt / 6.0, ws.k, true);
  derivative(t + 0.5 * dt, ws.stage, ws.k);
  stage_accumulate(ws.stage, ws.acc, y, 0.5 * dt, dt / 3.0, ws.k, false);
  derivative(t + 0.5 * dt, ws.stage, ws.k);
  stage_accumulate(ws.stage, ws.acc, y, dt, dt / 3.0, ws.k, false);
  derivative(t + dt, ws.stage, ws.k);
  assign_axpy(y, ws.acc, dt / 6.0, ws.k);
}

}  // namespace thermocc
