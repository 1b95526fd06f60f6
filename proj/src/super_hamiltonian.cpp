#include "thermocc/super_hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thermocc {

void SuperHamiltonian::set_time(double t) {
  time = t;
  const double level = epsilon0 + delta_eps * std::sin(omega * t);
  for (Spin s : kSpins) h[spin_index(s)](0, 0) = level + level_offset[spin_index(s)];
}

namespace {

BareOperator op(bool creation, bool tilde, Spin s, int i) { return {creation, tilde, s, i}; }

}  // namespace

std::vector<BareTerm> bare_generator_terms(const SiamConfig& config, const BathDiscretization& bath,
                                           const Occupations& occ, double t) {
  const RMatrix h0 = one_body_matrix(config, bath, t);
  const int n = static_cast<int>(h0.rows());

  std::vector<BareTerm> hamiltonian;
  for (Spin s : kSpins) {
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        if (h0(p, q) != 0.0) hamiltonian.push_back({h0(p, q), {op(true, false, s, p), op(false, false, s, q)}});
  }
  if (config.U != 0.0) {
    hamiltonian.push_back({config.U,
                           {op(true, false, Spin::alpha, 0), op(false, false, Spin::alpha, 0),
                            op(true, false, Spin::beta, 0), op(false, false, Spin::beta, 0)}});
  }

  std::vector<BareTerm> out = hamiltonian;
  for (const auto& term : hamiltonian) {
    BareTerm tc = tilde_conjugate(term);
    tc.coeff = -tc.coeff;
    out.push_back(std::move(tc));
  }

  if (config.gamma > 0.0) {
    const Complex mi{0.0, -1.0};
    for (Spin s : kSpins) {
      for (int i = 1; i < n; ++i) {
        const double v = occ.v_of(s, i);
        const double g1 = config.gamma * (1.0 - v);
        const double g2 = config.gamma * v;
        out.push_back({mi * (g1 - g2), {op(true, false, s, i), op(false, false, s, i)}});
        out.push_back({mi * (g1 - g2), {op(true, true, s, i), op(false, true, s, i)}});
        out.push_back({mi * (-2.0 * g1), {op(false, true, s, i), op(false, false, s, i)}});
        out.push_back({mi * (2.0 * g2), {op(true, true, s, i), op(true, false, s, i)}});
        out.push_back({mi * (2.0 * g2), {}});
      }
    }
  }
  return out;
}

SuperHamiltonian build_super_hamiltonian(const SiamConfig& config, const BathDiscretization& bath,
                                         const Occupations& occ, double t) {
  const int n = static_cast<int>(bath.energies.size()) + 1;
  if (occ.n_orbitals() != n || occ.v[1].size() != n)
    throw std::invalid_argument("occupations do not match the bath discretization");

  const OperatorSum sum = to_quasiparticles(bare_generator_terms(config, bath, occ, t), occ);

  double scale = std::max({1.0, std::abs(config.U), std::abs(config.V), std::abs(config.epsilon0),
                           config.gamma, std::abs(config.delta_eps), config.band_halfwidth});
  const double tol = 1e-14 * scale;

  SuperHamiltonian sh;
  sh.n_orbitals = n;
  sh.epsilon0 = config.epsilon0;
  sh.delta_eps = config.delta_eps;
  sh.omega = config.omega;
  sh.time = t;
  std::array<CMatrix, 2> h_tilde;
  for (int s = 0; s < 2; ++s) {
    sh.h[s] = CMatrix::Zero(n, n);
    sh.pairing[s] = CMatrix::Zero(n, n);
    h_tilde[s] = CMatrix::Zero(n, n);
  }

  for (const auto& term : sum.terms(tol)) {
    if (term.symbols.size() == 2 && term.symbols[0].spin == term.symbols[1].spin) {
      const auto& a = term.symbols[0];
      const auto& b = term.symbols[1];
      const int s = spin_index(a.spin);
      const int p = a.index.value;
      const int q = b.index.value;
      if (a.creation && !b.creation && !a.tilde && !b.tilde) {
        sh.h[s](p, q) += term.coeff;
        continue;
      }
      if (a.creation && !b.creation && a.tilde && b.tilde) {
        h_tilde[s](p, q) += term.coeff;
        continue;
      }
      if (a.creation && b.creation && !a.tilde && b.tilde) {
        sh.pairing[s](p, q) += term.coeff;
        continue;
      }
    }
    sh.interaction.push_back(term);
  }

  for (int s = 0; s < 2; ++s) {
    if ((h_tilde[s] + sh.h[s].conjugate()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw std::logic_error("tilde channel of the one-body generator is not -conj(h)");
  }
  const double level = impurity_level(t, config);
  for (Spin s : kSpins) sh.level_offset[spin_index(s)] = sh.h[spin_index(s)](0, 0) - level;
  return sh;
}

std::vector<OperatorTerm> all_terms(const SuperHamiltonian& sh) {
  std::vector<OperatorTerm> out;
  for (Spin s : kSpins) {
    const int si = spin_index(s);
    const CMatrix ht = sh.h_tilde(s);
    for (int p = 0; p < sh.n_orbitals; ++p) {
      for (int q = 0; q < sh.n_orbitals; ++q) {
        const Index ip = Index::orbital(p);
        const Index iq = Index::orbital(q);
        if (sh.h[si](p, q) != Complex{})
          out.push_back({sh.h[si](p, q), {create(false, s, ip), annihilate(false, s, iq)}});
        if (ht(p, q) != Complex{}) out.push_back({ht(p, q), {create(true, s, ip), annihilate(true, s, iq)}});
        if (sh.pairing[si](p, q) != Complex{})
          out.push_back({sh.pairing[si](p, q), {create(false, s, ip), create(true, s, iq)}});
      }
    }
  }
  out.insert(out.end(), sh.interaction.begin(), sh.interaction.end());
  return out;
}

TraceCheck verify_trace_preservation(const std::vector<OperatorTerm>& terms) {
  TraceCheck check;
  for (const auto& term : terms) {
    if (!is_normal_ordered(term)) {
      // Judge the normal-ordered expansion, not the written order.
      for (const auto& t : normal_order(term))
        if (t.creation_count() == 0) check.offending.push_back(t);
      continue;
    }
    if (term.creation_count() == 0) check.offending.push_back(term);
  }
  check.ok = check.offending.empty();
  return check;
}

TraceCheck verify_trace_preservation(const SuperHamiltonian& sh) {
  return verify_trace_preservation(all_terms(sh));
}

std::array<RVector, 2> number_expectation(const Occupations& occ, const std::array<CMatrix, 2>& t1) {
  std::array<RVector, 2> n;
  for (int s = 0; s < 2; ++s) n[s] = occ.v[s] + t1[s].diagonal().real();
  return n;
}

}  // namespace thermocc
