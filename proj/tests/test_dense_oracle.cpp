#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "thermocc/dense_oracle.hpp"
#include "thermocc/rk4.hpp"

using namespace thermocc;

namespace {

SiamConfig small_config(double U, double gamma, double T = 0.04) {
  SiamConfig c;
  c.n_bath = 2;
  c.lambda_disc = 1.5;
  c.U = U;
  c.gamma = gamma;
  c.temperature = T;
  c.V = 0.2;
  return c;
}

// One bath level; the symmetric discretization needs an even count.
BathDiscretization single_level(double energy = 0.15, double coupling = 0.2) { return {{energy}, {coupling}}; }

CMatrix dense(const SparseMatrix& m) { return CMatrix(m); }

// Physical-only Fock space of 2n modes, site-major, alpha before beta.
struct PhysicalSpace {
  int n;
  std::vector<CMatrix> a;  // index 2*i + spin

  explicit PhysicalSpace(int n_orbitals) : n(n_orbitals) {
    const int modes = 2 * n;
    const Eigen::Index dim = Eigen::Index{1} << modes;
    for (int m = 0; m < modes; ++m) {
      CMatrix op = CMatrix::Zero(dim, dim);
      for (Eigen::Index x = 0; x < dim; ++x) {
        if (!((x >> m) & 1)) continue;
        int lower = 0;
        for (int k = 0; k < m; ++k) lower += (x >> k) & 1;
        op(x ^ (Eigen::Index{1} << m), x) = (lower % 2) ? -1.0 : 1.0;
      }
      a.push_back(op);
    }
  }
  const CMatrix& ann(Spin s, int i) const { return a[2 * i + spin_index(s)]; }
  CMatrix number(Spin s, int i) const { return ann(s, i).adjoint() * ann(s, i); }
  Eigen::Index dim() const { return a[0].rows(); }
};

CMatrix physical_hamiltonian(const PhysicalSpace& ps, const SiamConfig& c, const BathDiscretization& bath, double t) {
  const RMatrix h = one_body_matrix(c, bath, t);
  CMatrix H = CMatrix::Zero(ps.dim(), ps.dim());
  for (Spin s : kSpins)
    for (int p = 0; p < ps.n; ++p)
      for (int q = 0; q < ps.n; ++q)
        if (h(p, q) != 0.0) H += h(p, q) * ps.ann(s, p).adjoint() * ps.ann(s, q);
  H += c.U * ps.number(Spin::alpha, 0) * ps.number(Spin::beta, 0);
  return H;
}

// The same Hamiltonian acting on the non-tilde modes of the doubled space.
SparseMatrix doubled_hamiltonian(const FockBasis& basis, const SiamConfig& c, const BathDiscretization& bath) {
  const RMatrix h = one_body_matrix(c, bath, 0.0);
  SparseMatrix H(basis.dimension(), basis.dimension());
  for (Spin s : kSpins)
    for (int p = 0; p < basis.n_orbitals(); ++p)
      for (int q = 0; q < basis.n_orbitals(); ++q)
        if (h(p, q) != 0.0)
          H += h(p, q) * SparseMatrix(basis.bare(true, false, s, p) * basis.bare(false, false, s, q));
  const SparseMatrix na = basis.bare(true, false, Spin::alpha, 0) * basis.bare(false, false, Spin::alpha, 0);
  const SparseMatrix nb = basis.bare(true, false, Spin::beta, 0) * basis.bare(false, false, Spin::beta, 0);
  H += c.U * SparseMatrix(na * nb);
  return H;
}

}  // namespace

TEST_CASE("thermal ket reproduces the reference occupations") {
  SiamConfig c = small_config(0.1, 0.0);
  c.init_imp_occ_alpha = 0.35;
  c.init_imp_occ_beta = 0.8;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const FockBasis basis(c.n_orbitals());
  const DenseState rho = build_thermal_ket(basis, occ);
  const DenseMeasurement meas(basis);
  CHECK(std::abs(meas.trace(rho) - 1.0) < 1e-14);
  for (Spin s : kSpins)
    for (int i = 0; i < basis.n_orbitals(); ++i)
      CHECK(std::abs(meas.population(s, i, rho) - occ.v_of(s, i)) < 1e-14);
}

TEST_CASE("thermal ket at integer occupations") {
  Occupations occ;
  occ.v[0] = RVector::Zero(1);
  occ.v[1] = RVector::Zero(1);
  const FockBasis basis(1);
  DenseState rho = build_thermal_ket(basis, occ);
  CHECK(rho(0) == Complex{1.0, 0.0});
  CHECK(rho.squaredNorm() == 1.0);

  occ.v[0](0) = 1.0;
  rho = build_thermal_ket(basis, occ);
  const Eigen::Index full_alpha = (Eigen::Index{1} << basis.mode(Spin::alpha, 0, false)) |
                                  (Eigen::Index{1} << basis.mode(Spin::alpha, 0, true));
  CHECK(std::abs(rho(full_alpha)) == doctest::Approx(1.0));
  CHECK(rho.squaredNorm() == doctest::Approx(1.0));
}

TEST_CASE("unit bra annihilates the generator") {
  SiamConfig c = small_config(0.1, 0.2);
  c.delta_eps = 0.08;
  c.omega = 0.5;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const FockBasis basis(c.n_orbitals());
  const DenseGenerator g = build_generator(basis, c, bath, occ);
  const CVector unit = unit_state(basis);
  for (double t : {0.0, 1.7}) {
    const CVector left = g.at(t).adjoint() * unit;
    CHECK(left.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("closed quadratic spectrum is the set of many-body energy differences") {
  SiamConfig c = small_config(0.0, 0.0);
  c.n_bath = 1;
  const auto bath = single_level();
  Occupations occ;
  occ.v[0] = RVector::Constant(2, 0.3);
  occ.v[1] = RVector::Constant(2, 0.3);
  const FockBasis basis(2);
  const CMatrix G = dense(build_generator(basis, c, bath, occ).static_part);
  REQUIRE((G - G.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(G, Eigen::EigenvaluesOnly);
  std::vector<double> got(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());

  Eigen::SelfAdjointEigenSolver<RMatrix> one(one_body_matrix(c, bath));
  const RVector e = one.eigenvalues();
  std::vector<double> energies;
  for (int mask = 0; mask < 16; ++mask) {
    double E = 0.0;
    for (int k = 0; k < 4; ++k)
      if ((mask >> k) & 1) E += e(k % 2);
    energies.push_back(E);
  }
  std::vector<double> expected;
  for (double a : energies)
    for (double b : energies) expected.push_back(a - b);
  std::sort(got.begin(), got.end());
  std::sort(expected.begin(), expected.end());
  REQUIRE(got.size() == expected.size());
  for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - expected[k]) < 1e-12);
}

TEST_CASE("coupled Gibbs state is stationary") {
  for (double U : {0.0, 0.3}) {
    SiamConfig c = small_config(U, 0.0);
    c.n_bath = 1;
    const auto bath = single_level();
    Occupations occ;
    occ.v[0] = RVector::Constant(2, 0.5);
    occ.v[1] = RVector::Constant(2, 0.5);
    const FockBasis basis(2);
    const CMatrix H = dense(doubled_hamiltonian(basis, c, bath));
    const CMatrix boltzmann = (-H / 0.1).exp();
    const CVector rho = boltzmann * unit_state(basis);
    const CVector g = build_generator(basis, c, bath, occ).static_part * rho;
    CHECK(rho.norm() > 0.1);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dissipative ket dynamics match a direct Lindblad propagation") {
  SiamConfig c = small_config(0.25, 0.15);
  c.n_bath = 1;
  c.delta_eps = 0.1;
  c.omega = 0.7;
  const auto bath = single_level(0.1, 0.3);
  Occupations occ;
  occ.v[0] = RVector(2);
  occ.v[1] = RVector(2);
  occ.v[0] << 1.0, 0.25;
  occ.v[1] << 0.0, 0.25;

  const FockBasis basis(2);
  const DenseGenerator gen = build_generator(basis, c, bath, occ);
  const DenseMeasurement meas(basis);
  DenseState ket = build_thermal_ket(basis, occ);

  const PhysicalSpace ps(2);
  CMatrix rho = CMatrix::Identity(ps.dim(), ps.dim());
  for (Spin s : kSpins)
    for (int i = 0; i < 2; ++i) {
      const double v = occ.v_of(s, i);
      const CMatrix n = ps.number(s, i);
      rho = rho * ((1.0 - v) * (CMatrix::Identity(ps.dim(), ps.dim()) - n) + v * n);
    }
  std::vector<CMatrix> jumps;
  for (Spin s : kSpins) {
    const double v = occ.v_of(s, 1);
    jumps.push_back(std::sqrt(2.0 * c.gamma * (1.0 - v)) * ps.ann(s, 1));
    jumps.push_back(std::sqrt(2.0 * c.gamma * v) * CMatrix(ps.ann(s, 1).adjoint()));
  }

  auto ket_rhs = [&](double t, const DenseState& x, DenseState& dx) {
    gen.apply(t, x, dx);
    dx *= Complex{0.0, -1.0};
  };
  auto lindblad_rhs = [&](double t, const CMatrix& r, CMatrix& dr) {
    const CMatrix H = physical_hamiltonian(ps, c, bath, t);
    dr = Complex{0.0, -1.0} * (H * r - r * H);
    for (const auto& L : jumps) {
      const CMatrix LdL = L.adjoint() * L;
      dr += L * r * L.adjoint() - 0.5 * (LdL * r + r * LdL);
    }
  };

  Rk4Workspace<DenseState> ws_ket;
  struct MatrixStage {
    CMatrix k1, k2, k3, k4, stage;
  } ws;
  const double dt = 0.01;
  double worst = 0.0;
  for (int step = 0; step < 1500; ++step) {
    const double t = step * dt;
    rk4_advance(ket, t, dt, ket_rhs, ws_ket);
    lindblad_rhs(t, rho, ws.k1);
    ws.stage = rho + 0.5 * dt * ws.k1;
    lindblad_rhs(t + 0.5 * dt, ws.stage, ws.k2);
    ws.stage = rho + 0.5 * dt * ws.k2;
    lindblad_rhs(t + 0.5 * dt, ws.stage, ws.k3);
    ws.stage = rho + dt * ws.k3;
    lindblad_rhs(t + dt, ws.stage, ws.k4);
    rho += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
    if (step % 100 == 99) {
      for (Spin s : kSpins)
        for (int i = 0; i < 2; ++i) {
          const double direct = (ps.number(s, i) * rho).trace().real();
          worst = std::max(worst, std::abs(direct - meas.population(s, i, ket)));
        }
      CHECK(std::abs(rho.trace() - 1.0) < 1e-12);
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("transformed generator equals the bare generator") {
  SiamConfig c = small_config(0.1, 0.2);
  c.delta_eps = 0.08;
  c.omega = 0.5;
  c.init_imp_occ_alpha = 0.9;
  c.init_imp_occ_beta = 0.15;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const FockBasis basis(c.n_orbitals());
  const DenseGenerator gen = build_generator(basis, c, bath, occ);
  for (double t : {0.0, 2.3}) {
    const SuperHamiltonian sh = build_super_hamiltonian(c, bath, occ, t);
    const SparseMatrix diff = quasiparticle_operator(basis, all_terms(sh), occ) - gen.at(t);
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    CHECK(worst < 1e-14);
  }
}

TEST_CASE("quasi-particles annihilate the thermal ket and the unit bra") {
  SiamConfig c = small_config(0.1, 0.0);
  c.init_imp_occ_alpha = 0.6;
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const FockBasis basis(c.n_orbitals());
  const DenseState rho = build_thermal_ket(basis, occ);
  const CVector unit = unit_state(basis);
  auto op = [&](bool creation, bool tilde, Spin s, int i) {
    const OperatorSymbol sym = creation ? create(tilde, s, Index::orbital(i)) : annihilate(tilde, s, Index::orbital(i));
    return quasiparticle_operator(basis, {OperatorTerm{1.0, {sym}}}, occ);
  };
  for (Spin s : kSpins)
    for (int i = 0; i < basis.n_orbitals(); ++i)
      for (bool tilde : {false, true}) {
        CHECK((op(false, tilde, s, i) * rho).norm() < 1e-14);
        CHECK((op(true, tilde, s, i).adjoint() * unit).norm() < 1e-14);
        const SparseMatrix b = op(false, tilde, s, i);
        const SparseMatrix bd = op(true, tilde, s, i);
        const CMatrix anti = dense(SparseMatrix(b * bd)) + dense(SparseMatrix(bd * b));
        CHECK((anti - CMatrix::Identity(basis.dimension(), basis.dimension())).cwiseAbs().maxCoeff() < 1e-14);
      }
}

TEST_CASE("closed dense propagation conserves trace, number and energy") {
  SiamConfig c = small_config(0.1, 0.0);
  const auto bath = build_bath(c);
  const auto occ = make_occupations(c, bath);
  const FockBasis basis(c.n_orbitals());
  const DenseGenerator gen = build_generator(basis, c, bath, occ);
  const DenseMeasurement meas(basis);
  const CVector energy_bra = doubled_hamiltonian(basis, c, bath).adjoint() * meas.unit;
  DenseState rho = build_thermal_ket(basis, occ);
  auto number = [&](const DenseState& x) {
    double total = 0.0;
    for (Spin s : kSpins)
      for (int i = 0; i < basis.n_orbitals(); ++i) total += meas.population(s, i, x);
    return total;
  };
  const double n0 = number(rho);
  const Complex e0 = energy_bra.dot(rho);
  Rk4Workspace<DenseState> ws;
  auto rhs = [&](double t, const DenseState& x, DenseState& dx) {
    gen.apply(t, x, dx);
    dx *= Complex{0.0, -1.0};
  };
  for (int step = 0; step < 2000; ++step) rk4_advance(rho, step * 0.01, 0.01, rhs, ws);
  CHECK(std::abs(meas.trace(rho) - 1.0) < 1e-12);
  CHECK(std::abs(number(rho) - n0) < 1e-10);
  CHECK(std::abs(energy_bra.dot(rho) - e0) < 1e-8);
}

TEST_CASE("decoupled quench keeps populations constant") {
  SiamConfig c = small_config(0.0, 0.0);
  c.V = 0.0;
  c.t_final = 10.0;
  const auto rec = propagate_dense(c);
  for (const auto& p : rec.points()) {
    CHECK(p.n_imp_alpha == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(p.n_imp_beta) < 1e-14);
  }
}

TEST_CASE("dissipative trace stays at one") {
  SiamConfig c = small_config(0.1, 0.2);
  c.t_final = 50.0;
  c.output_interval = 5.0;
  const auto rec = propagate_dense(c);
  for (const auto& p : rec.points()) CHECK(*p.trace_dev < 1e-10);
  CHECK(rec.back().time == doctest::Approx(50.0));
}

TEST_CASE("dense quench agrees with the quadratic oracle at U = 0") {
  SiamConfig c = small_config(0.0, 0.0);
  c.t_final = 20.0;
  const auto dense_rec = propagate_dense(c);
  const auto exact = quadratic_oracle(c);
  REQUIRE(dense_rec.size() == exact.size());
  for (std::size_t k = 0; k < exact.size(); ++k) {
    CHECK(std::abs(dense_rec[k].n_imp_alpha - exact[k].n_imp_alpha) < 1e-10);
    CHECK(std::abs(dense_rec[k].n_imp_beta - exact[k].n_imp_beta) < 1e-10);
    CHECK(std::abs(dense_rec[k].n_electrons - exact[k].n_electrons) < 1e-10);
  }
}

TEST_CASE("dense oracle refuses large baths") {
  SiamConfig c = small_config(0.1, 0.0);
  c.n_bath = 6;
  CHECK_THROWS_AS(propagate_dense(c), CapacityError);
  CHECK_THROWS_AS(FockBasis(6), CapacityError);
}
