#include "thermocc/dense_oracle.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "thermocc/rk4.hpp"

namespace thermocc {

namespace {

SparseMatrix mul(const SparseMatrix& a, const SparseMatrix& b) { return SparseMatrix(a * b); }

}  // namespace

FockBasis::FockBasis(int n_orbitals) : n_orbitals_(n_orbitals) {
  if (n_orbitals < 1 || n_orbitals > kDenseMaxBath + 1)
    throw CapacityError("dense Fock space supports at most " + std::to_string(kDenseMaxBath) + " bath levels");
}

SparseMatrix FockBasis::ladder(int mode, bool creation) const {
  if (mode < 0 || mode >= 4 * n_orbitals_) throw std::out_of_range("FockBasis: mode out of range");
  const Eigen::Index dim = dimension();
  const std::uint64_t bit = std::uint64_t{1} << mode;
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(dim / 2));
  for (std::uint64_t x = 0; x < static_cast<std::uint64_t>(dim); ++x) {
    const bool occupied = (x & bit) != 0;
    if (occupied == creation) continue;
    const double sign = (std::popcount(x & (bit - 1)) % 2) ? -1.0 : 1.0;
    trip.emplace_back(static_cast<Eigen::Index>(x ^ bit), static_cast<Eigen::Index>(x), sign);
  }
  SparseMatrix m(dim, dim);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SparseMatrix FockBasis::bare(bool creation, bool tilde, Spin s, int orbital) const {
  return ladder(mode(s, orbital, tilde), creation);
}

SparseMatrix FockBasis::symbol(const OperatorSymbol& sym) const {
  if (sym.index.is_label) throw std::invalid_argument("FockBasis::symbol needs a concrete index");
  return ladder(mode(sym.spin, sym.index.value, sym.tilde), sym.creation);
}

SparseMatrix FockBasis::identity() const {
  SparseMatrix m(dimension(), dimension());
  m.setIdentity();
  return m;
}

DenseState unit_state(const FockBasis& basis) {
  DenseState x = DenseState::Zero(basis.dimension());
  x(0) = 1.0;
  for (int i = 0; i < basis.n_orbitals(); ++i) {
    for (Spin s : kSpins) {
      const SparseMatrix pair = mul(basis.bare(true, false, s, i), basis.bare(true, true, s, i));
      x = (x + pair * x).eval();
    }
  }
  return x;
}

DenseState build_thermal_ket(const FockBasis& basis, const Occupations& occ) {
  DenseState x = DenseState::Zero(basis.dimension());
  x(0) = 1.0;
  for (int i = 0; i < basis.n_orbitals(); ++i) {
    for (Spin s : kSpins) {
      const double v = occ.v_of(s, i);
      const SparseMatrix pair = mul(basis.bare(true, false, s, i), basis.bare(true, true, s, i));
      x = ((1.0 - v) * x + v * (pair * x)).eval();
    }
  }
  return x;
}

SparseMatrix DenseGenerator::at(double t) const {
  SparseMatrix g = static_part;
  if (delta_eps != 0.0) g += drive(t) * drive_part;
  return g;
}

void DenseGenerator::apply(double t, const DenseState& x, DenseState& y) const {
  y.noalias() = static_part * x;
  const double d = drive(t);
  if (d != 0.0) y.noalias() += d * (drive_part * x);
}

DenseGenerator build_generator(const FockBasis& basis, const SiamConfig& config, const BathDiscretization& bath,
                               const Occupations& occ) {
  const int n = basis.n_orbitals();
  if (static_cast<int>(bath.energies.size()) + 1 != n)
    throw std::invalid_argument("build_generator: bath does not match the Fock basis");
  const RMatrix h0 = one_body_matrix(config, bath, 0.0);

  std::array<std::vector<SparseMatrix>, 2> a, ad, at, atd;
  for (Spin s : kSpins) {
    for (int i = 0; i < n; ++i) {
      a[spin_index(s)].push_back(basis.bare(false, false, s, i));
      ad[spin_index(s)].push_back(basis.bare(true, false, s, i));
      at[spin_index(s)].push_back(basis.bare(false, true, s, i));
      atd[spin_index(s)].push_back(basis.bare(true, true, s, i));
    }
  }

  DenseGenerator g;
  g.delta_eps = config.delta_eps;
  g.omega = config.omega;
  g.static_part = SparseMatrix(basis.dimension(), basis.dimension());
  g.drive_part = SparseMatrix(basis.dimension(), basis.dimension());

  for (int s = 0; s < 2; ++s) {
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) {
        if (h0(p, q) == 0.0) continue;
        // H - H~; h0 is real so the tilde copy has the same coefficient.
        g.static_part += h0(p, q) * (mul(ad[s][p], a[s][q]) - mul(atd[s][p], at[s][q]));
      }
    }
    g.drive_part += mul(ad[s][0], a[s][0]) - mul(atd[s][0], at[s][0]);
  }
  if (config.U != 0.0) {
    const SparseMatrix n_a = mul(ad[0][0], a[0][0]);
    const SparseMatrix n_b = mul(ad[1][0], a[1][0]);
    const SparseMatrix nt_a = mul(atd[0][0], at[0][0]);
    const SparseMatrix nt_b = mul(atd[1][0], at[1][0]);
    g.static_part += config.U * (mul(n_a, n_b) - mul(nt_a, nt_b));
  }
  if (config.gamma > 0.0) {
    const Complex mi{0.0, -1.0};
    const SparseMatrix one = basis.identity();
    for (int s = 0; s < 2; ++s) {
      for (int i = 1; i < n; ++i) {
        const double v = occ.v[s](i);
        const double g1 = config.gamma * (1.0 - v);
        const double g2 = config.gamma * v;
        const SparseMatrix d = (g1 - g2) * (mul(ad[s][i], a[s][i]) + mul(atd[s][i], at[s][i])) -
                               2.0 * g1 * mul(at[s][i], a[s][i]) + 2.0 * g2 * mul(atd[s][i], ad[s][i]) +
                               2.0 * g2 * one;
        g.static_part += mi * d;
      }
    }
  }
  g.static_part.prune(Complex{0.0, 0.0});
  return g;
}

SparseMatrix quasiparticle_operator(const FockBasis& basis, const std::vector<OperatorTerm>& terms,
                                    const Occupations& occ) {
  SparseMatrix out(basis.dimension(), basis.dimension());
  for (const auto& term : terms) {
    SparseMatrix prod = basis.identity();
    for (const auto& sym : term.symbols) {
      if (sym.index.is_label) throw std::invalid_argument("quasiparticle_operator needs concrete indices");
      const int i = sym.index.value;
      const double v = occ.v_of(sym.spin, i);
      const double u = 1.0 - v;
      SparseMatrix m;
      if (sym.creation && !sym.tilde)
        m = basis.bare(true, false, sym.spin, i) - basis.bare(false, true, sym.spin, i);
      else if (sym.creation && sym.tilde)
        m = basis.bare(true, true, sym.spin, i) + basis.bare(false, false, sym.spin, i);
      else if (!sym.tilde)
        m = u * basis.bare(false, false, sym.spin, i) - v * basis.bare(true, true, sym.spin, i);
      else
        m = u * basis.bare(false, true, sym.spin, i) + v * basis.bare(true, false, sym.spin, i);
      prod = mul(prod, m);
    }
    out += term.coeff * prod;
  }
  return out;
}

DenseMeasurement::DenseMeasurement(const FockBasis& basis) : unit(unit_state(basis)) {
  for (Spin s : kSpins) {
    for (int i = 0; i < basis.n_orbitals(); ++i) {
      const SparseMatrix num = mul(basis.bare(true, false, s, i), basis.bare(false, false, s, i));
      number[spin_index(s)].push_back(num * unit);  // number operator is Hermitian
    }
  }
}

TrajectoryRecord propagate_dense(const SiamConfig& config) {
  validate(config);
  if (config.n_bath > kDenseMaxBath)
    throw CapacityError("dense oracle refused: n_bath = " + std::to_string(config.n_bath) + " exceeds " +
                        std::to_string(kDenseMaxBath));
  const BathDiscretization bath = build_bath(config);
  const Occupations occ = make_occupations(config, bath);
  const FockBasis basis(config.n_orbitals());
  return propagate_dense(config, build_thermal_ket(basis, occ));
}

TrajectoryRecord propagate_dense(const SiamConfig& config, const DenseState& initial) {
  const BathDiscretization bath = build_bath(config);
  const Occupations occ = make_occupations(config, bath);
  const FockBasis basis(config.n_orbitals());
  if (initial.size() != basis.dimension()) throw std::invalid_argument("propagate_dense: state dimension mismatch");
  const DenseGenerator gen = build_generator(basis, config, bath, occ);
  const DenseMeasurement meas(basis);

  TrajectoryRecord rec("dense");
  auto record = [&](double t, const DenseState& rho) {
    TrajectoryPoint p;
    p.time = t;
    p.n_imp_alpha = meas.population(Spin::alpha, 0, rho);
    p.n_imp_beta = meas.population(Spin::beta, 0, rho);
    double total = 0.0;
    for (Spin s : kSpins)
      for (int i = 0; i < basis.n_orbitals(); ++i) total += meas.population(s, i, rho);
    p.n_electrons = total;
    p.trace_dev = std::abs(meas.trace(rho) - 1.0);
    rec.push(p);
  };

  const int stride = record_stride(config.output_interval, config.dt);
  const long steps = std::lround(config.t_final / config.dt);
  DenseState rho = initial;
  Rk4Workspace<DenseState> ws;
  auto derivative = [&](double t, const DenseState& x, DenseState& dx) {
    gen.apply(t, x, dx);
    dx *= Complex{0.0, -1.0};
  };
  record(0.0, rho);
  for (long step = 1; step <= steps; ++step) {
    const double t = (step - 1) * config.dt;
    rk4_advance(rho, t, config.dt, derivative, ws);
    if (!rho.allFinite())
      throw NumericalError("dense propagation produced non-finite values at t = " + std::to_string(t + config.dt));
    if (step % stride == 0) record(step * config.dt, rho);
  }
  return rec;
}

ClusterAmplitudes projection_oracle(const SuperHamiltonian& sh, const ClusterAmplitudes& amplitudes) {
  const int n = sh.n_orbitals;
  if (n > 3) throw CapacityError("projection oracle supports at most 2 bath levels");
  if (amplitudes.n_orbitals() != n) throw std::invalid_argument("projection_oracle: dimension mismatch");
  const FockBasis basis(n);
  const bool doubles = amplitudes.has_doubles();

  // b and b~ annihilators (index [spin][orbital]) and their adjoints.
  std::array<std::vector<SparseMatrix>, 2> b, bt, bd, btd;
  for (Spin s : kSpins) {
    for (int i = 0; i < n; ++i) {
      b[spin_index(s)].push_back(basis.ladder(basis.mode(s, i, false), false));
      bt[spin_index(s)].push_back(basis.ladder(basis.mode(s, i, true), false));
      bd[spin_index(s)].push_back(basis.ladder(basis.mode(s, i, false), true));
      btd[spin_index(s)].push_back(basis.ladder(basis.mode(s, i, true), true));
    }
  }

  SparseMatrix H(basis.dimension(), basis.dimension());
  for (const auto& term : all_terms(sh)) {
    SparseMatrix prod = basis.identity();
    for (const auto& sym : term.symbols) prod = mul(prod, basis.symbol(sym));
    H += term.coeff * prod;
  }

  SparseMatrix T(basis.dimension(), basis.dimension());
  for (int s = 0; s < 2; ++s)
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        if (amplitudes.t1[s](x, y) != Complex{}) T += amplitudes.t1[s](x, y) * mul(bd[s][x], btd[s][y]);
  if (doubles) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) {
            for (int s = 0; s < 2; ++s) {
              const Complex c = amplitudes.t2[s](i, k, j, l);
              if (c != Complex{}) T += (0.25 * c) * mul(mul(bd[s][i], bd[s][k]), mul(btd[s][l], btd[s][j]));
            }
            const Complex c = amplitudes.t2[2](i, k, j, l);
            if (c != Complex{}) T += c * mul(mul(bd[0][i], bd[1][k]), mul(btd[1][l], btd[0][j]));
          }
  }

  auto exp_apply = [&](Complex sign, const DenseState& x) {
    DenseState sum = x;
    DenseState term = x;
    for (int k = 1; k <= basis.n_modes(); ++k) {
      term = ((sign / static_cast<double>(k)) * (T * term)).eval();
      if (term.squaredNorm() == 0.0) break;
      sum += term;
    }
    return sum;
  };

  DenseState vac = DenseState::Zero(basis.dimension());
  vac(0) = 1.0;
  const DenseState psi = exp_apply(-1.0, H * exp_apply(1.0, vac));

  ClusterAmplitudes r = ClusterAmplitudes::zero(n, doubles);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < n; ++i) {
      const DenseState bi = b[s][i] * psi;
      for (int j = 0; j < n; ++j) r.t1[s](i, j) = (bt[s][j] * bi)(0);
    }
  if (doubles) {
    const std::array<std::array<int, 2>, 3> spins{{{0, 0}, {1, 1}, {0, 1}}};
    for (int blk = 0; blk < 3; ++blk) {
      const int s1 = spins[blk][0];
      const int s2 = spins[blk][1];
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          const DenseState x = b[s2][k] * (b[s1][i] * psi);
          for (int l = 0; l < n; ++l) {
            const DenseState y = bt[s2][l] * x;
            for (int j = 0; j < n; ++j) r.t2[blk](i, k, j, l) = (bt[s1][j] * y)(0);
          }
        }
    }
  }
  return r;
}

}  // namespace thermocc
