#include <doctest.h>

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "thermocc/observables.hpp"

using namespace thermocc;

namespace {

SiamConfig free_config(int n_bath) {
  SiamConfig c;
  c.n_bath = n_bath;
  c.U = 0.0;
  c.t_final = 50.0;
  c.output_interval = 1.0;
  return c;
}

}  // namespace

TEST_CASE("impurity observables") {
  const auto quench = impurity_observables(1.0, 0.0);
  CHECK(quench.n_total == 1.0);
  CHECK(quench.polarization == 1.0);
  const auto flat = impurity_observables(0.3, 0.3);
  CHECK(flat.n_total == 0.6);
  CHECK(flat.polarization == 0.0);
}

TEST_CASE("total number counts the filled bath at zero temperature") {
  SiamConfig c = free_config(30);
  c.temperature = 0.0;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  int below = 0;
  for (double e : bath.energies) below += e < 0.0;
  CHECK(below == c.n_bath / 2);
  CHECK(total_number(occ.v) == doctest::Approx(2.0 * below + 1.0).epsilon(1e-15));
}

TEST_CASE("records fill derived columns and keep time ordered") {
  TrajectoryRecord r("x");
  TrajectoryPoint p;
  p.time = 0.0;
  p.n_imp_alpha = 0.75;
  p.n_imp_beta = 0.25;
  r.push(p);
  CHECK(r[0].n_total == 1.0);
  CHECK(r[0].polarization == 0.5);
  CHECK_THROWS_AS(r.push(p), std::logic_error);
  p.time = 0.5;
  r.push(p);
  CHECK(r.at(0.5) != nullptr);
  CHECK(r.at(0.25) == nullptr);
}

TEST_CASE("record stride") {
  CHECK(record_stride(0.5, 0.01) == 50);
  CHECK(record_stride(1.0, 0.2) == 5);
  CHECK_THROWS_AS(record_stride(0.5, 0.3), ConfigError);
}

TEST_CASE("quadratic oracle without hybridization is static") {
  SiamConfig c = free_config(4);
  c.V = 0.0;
  const auto rec = quadratic_oracle(c);
  for (const auto& p : rec.points()) {
    CHECK(std::abs(p.n_imp_alpha - 1.0) < 1e-15);
    CHECK(std::abs(p.n_imp_beta) < 1e-15);
  }
}

TEST_CASE("quadratic oracle conserves the electron number") {
  const auto rec = quadratic_oracle(free_config(30));
  for (const auto& p : rec.points()) CHECK(std::abs(p.n_electrons - rec[0].n_electrons) < 1e-12);
}

TEST_CASE("quadratic oracle matches a direct matrix exponential") {
  SiamConfig c = free_config(6);
  c.init_imp_occ_alpha = 0.8;
  c.init_imp_occ_beta = 0.1;
  const auto rec = quadratic_oracle(c);
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const CMatrix h = one_body_matrix(c, bath).cast<Complex>();
  for (double t : {0.0, 7.0, 23.0, 50.0}) {
    const CMatrix U = (Complex{0.0, -t} * h).exp();
    const TrajectoryPoint* p = rec.at(t);
    REQUIRE(p != nullptr);
    for (int s = 0; s < 2; ++s) {
      // <n_0(t)> = [U f U^dag]_00 for a diagonal initial density f.
      const CMatrix rho = U * occ.v[s].cast<Complex>().asDiagonal() * U.adjoint();
      const double n0 = s == 0 ? p->n_imp_alpha : p->n_imp_beta;
      CHECK(std::abs(rho(0, 0).real() - n0) < 1e-12);
    }
  }
}

TEST_CASE("quadratic oracle refuses interacting or open models") {
  SiamConfig c = free_config(2);
  c.U = 0.1;
  CHECK_THROWS_AS(quadratic_oracle(c), ConfigError);
  c.U = 0.0;
  c.gamma = 0.1;
  CHECK_THROWS_AS(quadratic_oracle(c), ConfigError);
  c.gamma = 0.0;
  c.delta_eps = 0.08;
  CHECK_THROWS_AS(quadratic_oracle(c), ConfigError);
}
