#include <doctest.h>

#include <cmath>
#include <sstream>

#include "thermocc/dense_oracle.hpp"
#include "thermocc/tebd_oracle.hpp"

using namespace thermocc;

namespace {

SiamConfig small(double U = 0.1, double gamma = 0.0) {
  SiamConfig c;
  c.n_bath = 2;
  c.U = U;
  c.gamma = gamma;
  c.t_final = 20.0;
  c.output_interval = 1.0;
  c.dt = 0.005;
  return c;
}

double max_population_gap(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    REQUIRE(a[k].time == doctest::Approx(b[k].time));
    m = std::max({m, std::abs(a[k].n_imp_alpha - b[k].n_imp_alpha), std::abs(a[k].n_imp_beta - b[k].n_imp_beta)});
  }
  return m;
}

// Unit bra of a site pair: (<00| + <11|) on each site.
Eigen::Matrix<Complex, 16, 1> unit_pair() {
  Eigen::Matrix<Complex, 4, 1> one(1.0, 0.0, 0.0, 1.0);
  Eigen::Matrix<Complex, 16, 1> u;
  for (int a = 0; a < 4; ++a) u.segment<4>(4 * a) = one(a) * one;
  return u;
}

int popcount4(int x) { return (x & 1) + ((x >> 1) & 1); }

}  // namespace

TEST_CASE("local operators anticommute across the pair") {
  const Matrix16 a = local::on_left(local::annihilate(false));
  const Matrix16 at = local::on_left(local::annihilate(true));
  const Matrix16 b = local::on_right(local::annihilate(false));
  const Matrix16 bt = local::on_right(local::annihilate(true));
  const std::array<Matrix16, 4> ops{a, at, b, bt};
  for (std::size_t p = 0; p < 4; ++p) {
    for (std::size_t q = 0; q < 4; ++q) {
      const Matrix16 anti = ops[p] * ops[q].adjoint() + ops[q].adjoint() * ops[p];
      const Matrix16 expected = p == q ? Matrix16(Matrix16::Identity()) : Matrix16(Matrix16::Zero());
      CHECK((anti - expected).cwiseAbs().maxCoeff() == 0.0);
      CHECK((ops[p] * ops[q] + ops[q] * ops[p]).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("fermionic swap is an involution exchanging sites with a parity sign") {
  const Matrix16 S = fermionic_swap();
  CHECK((S * S - Matrix16::Identity()).cwiseAbs().maxCoeff() == 0.0);
  for (int x = 0; x < 4; ++x) {
    for (int y = 0; y < 4; ++y) {
      const double sign = (popcount4(x) * popcount4(y)) % 2 ? -1.0 : 1.0;
      for (int r = 0; r < 16; ++r) {
        const Complex expected = r == 4 * y + x ? Complex{sign} : Complex{};
        CHECK(S(r, 4 * x + y) == expected);
      }
    }
  }
}

TEST_CASE("swap carries operators to the neighbouring site") {
  const Matrix16 S = fermionic_swap();
  const Matrix16 a = local::on_left(local::annihilate(false));
  const Matrix16 b = local::on_right(local::annihilate(false));
  const Matrix16 at = local::on_left(local::annihilate(true));
  const Matrix16 bt = local::on_right(local::annihilate(true));
  CHECK((S * a * S - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((S * at * S - bt).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("closed gates are unitary") {
  SiamConfig c = small();
  c.delta_eps = 0.08;
  c.omega = 0.5;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const GateSet g = build_gates(c, bath, occ, 0.05, 1.7);
  for (const auto& chain : g.bath)
    for (const auto& m : chain) CHECK((m.adjoint() * m - Matrix16::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.interaction.adjoint() * g.interaction - Matrix16::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gates reduce to the first-order series for small steps") {
  const SiamConfig c = small(0.1, 0.2);
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const Matrix16 k = bath_block(c, bath, occ, Spin::beta, 2);
  auto err = [&](double dt) {
    const Matrix16 g = build_gates(c, bath, occ, dt, 0.0).bath[1][1];
    return (g - (Matrix16::Identity() - Complex{0.0, 0.5 * dt} * k)).cwiseAbs().maxCoeff();
  };
  const double e1 = err(1e-3);
  const double e2 = err(5e-4);
  CHECK(e1 < 1e-5);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("every generator block annihilates the unit bra") {
  SiamConfig c = small(0.3, 0.2);
  c.delta_eps = 0.08;
  c.omega = 0.5;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const auto u = unit_pair();
  for (Spin s : kSpins)
    for (int i = 1; i <= c.n_bath; ++i)
      CHECK((u.transpose() * bath_block(c, bath, occ, s, i)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((u.transpose() * interaction_block(c, 0.4)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("thermal product state") {
  const SiamConfig c = small();
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const MpsState m = MpsState::thermal(occ);
  CHECK(m.n_sites() == 6);
  CHECK(m.max_bond() == 1);
  CHECK(m.trace() == Complex{1.0});
  const RVector d = m.densities();
  CHECK(d(m.site_of(Spin::alpha, 0)) == 1.0);
  CHECK(d(m.site_of(Spin::beta, 0)) == 0.0);
  for (Spin s : kSpins)
    for (int i = 1; i <= c.n_bath; ++i) CHECK(d(m.site_of(s, i)) == doctest::Approx(occ.v_of(s, i)).epsilon(1e-15));
}

TEST_CASE("identity gates leave the state unchanged") {
  const SiamConfig c = small();
  TebdPropagator prop(c);
  for (int k = 0; k < 20; ++k) prop.step();
  MpsState m = prop.state();
  const CVector before = m.to_dense();
  GateSet id;
  for (auto& chain : id.bath) chain.assign(static_cast<std::size_t>(c.n_bath), Matrix16::Identity());
  id.interaction = Matrix16::Identity();
  id.swap = Matrix16::Identity();
  const SvdPolicy exact{0.0, 200, 0.0};
  sweep(m, id, exact);
  CHECK((m.to_dense() - before).cwiseAbs().maxCoeff() < 1e-13);

  // Swaps alone cancel between the two half sweeps.
  id.swap = fermionic_swap();
  sweep(m, id, exact);
  CHECK((m.to_dense() - before).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("closed populations match the dense oracle") {
  const SiamConfig c = small();
  SiamConfig cd = c;
  const auto tebd = propagate_tebd(c);
  const auto dense = propagate_dense(cd);
  const double gap = max_population_gap(tebd, dense);
  MESSAGE("max gap " << gap);
  CHECK(gap < 1e-4);
  for (const auto& p : tebd.points()) {
    CHECK(*p.trace_dev < 1e-8);
    CHECK(std::abs(p.n_electrons - tebd[0].n_electrons) < 1e-4);
    CHECK(*p.discarded_weight < 1e-6);
  }
}

TEST_CASE("driven dissipative populations match the dense oracle") {
  SiamConfig c = small(0.1, 0.2);
  c.delta_eps = 0.08;
  c.omega = 4.0 * std::acos(-1.0) * c.V;
  const auto tebd = propagate_tebd(c);
  const auto dense = propagate_dense(c);
  const double gap = max_population_gap(tebd, dense);
  MESSAGE("max gap " << gap);
  CHECK(gap < 1e-4);
  for (const auto& p : tebd.points()) CHECK(*p.trace_dev < 1e-8);
}

TEST_CASE("Trotter error shrinks fourfold when the step halves") {
  SiamConfig c = small();
  c.t_final = 20.0;
  c.output_interval = 2.0;
  SiamConfig cd = c;
  cd.dt = 0.01;
  const auto dense = propagate_dense(cd);
  auto gap = [&](double dt) {
    SiamConfig ct = c;
    ct.dt = dt;
    return max_population_gap(propagate_tebd(ct), dense);
  };
  const double e1 = gap(0.4);
  const double e2 = gap(0.2);
  MESSAGE("errors " << e1 << " " << e2);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("state dump round trip") {
  TebdPropagator prop(small());
  for (int k = 0; k < 10; ++k) prop.step();
  std::stringstream buf;
  prop.state().save(buf);
  const MpsState back = MpsState::load(buf);
  REQUIRE(back.n_sites() == prop.state().n_sites());
  for (int k = 0; k <= back.n_sites(); ++k) CHECK(back.bond(k) == prop.state().bond(k));
  CHECK((back.to_dense() - prop.state().to_dense()).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bad("not a dump");
  CHECK_THROWS(MpsState::load(bad));
}

TEST_CASE("bond overflow is a hard error") {
  SiamConfig c = small();
  c.max_bond = 2;
  TebdPropagator prop(c);
  CHECK_THROWS_AS(
      [&] {
        for (int k = 0; k < 50; ++k) prop.step();
      }(),
      CapacityError);
}
