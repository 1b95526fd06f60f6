#include "thermocc/tebd_oracle.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace thermocc {

static_assert(std::endian::native == std::endian::little, "state dumps assume a little-endian host");

namespace local {

Matrix4 annihilate(bool tilde) {
  Matrix4 m = Matrix4::Zero();
  if (!tilde) {
    m(0, 2) = 1.0;  // |10> -> |00>
    m(1, 3) = 1.0;  // |11> -> |01>
  } else {
    m(0, 1) = 1.0;   // |01> -> |00>
    m(2, 3) = -1.0;  // |11> -> -|10>, passing the physical mode
  }
  return m;
}

Matrix4 parity() { return Eigen::Vector4cd(1.0, -1.0, -1.0, 1.0).asDiagonal(); }

namespace {
Matrix16 kron(const Matrix4& x, const Matrix4& y) {
  Matrix16 m;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) m.block<4, 4>(4 * a, 4 * b) = x(a, b) * y;
  return m;
}
}  // namespace

Matrix16 on_left(const Matrix4& x) { return kron(x, Matrix4::Identity()); }
Matrix16 on_right(const Matrix4& x) { return kron(parity(), x); }

}  // namespace local

namespace {

struct PairOperators {
  Matrix16 a, at, b, bt;  // left physical, left tilde, right physical, right tilde

  PairOperators()
      : a(local::on_left(local::annihilate(false))),
        at(local::on_left(local::annihilate(true))),
        b(local::on_right(local::annihilate(false))),
        bt(local::on_right(local::annihilate(true))) {}
};

Matrix16 number(const Matrix16& c) { return c.adjoint() * c; }

Matrix16 half_step(const Matrix16& k, double dt) { return (Complex{0.0, -0.5 * dt} * k).exp(); }

}  // namespace

Matrix16 fermionic_swap() {
  const PairOperators op;
  auto transposition = [](const Matrix16& p, const Matrix16& q) {
    return Matrix16(Matrix16::Identity() + p.adjoint() * q + q.adjoint() * p - number(p) - number(q));
  };
  return transposition(op.a, op.b) * transposition(op.at, op.bt);
}

Matrix16 bath_block(const SiamConfig& config, const BathDiscretization& bath, const Occupations& occ, Spin s, int i) {
  if (i < 1 || i > static_cast<int>(bath.energies.size())) throw std::out_of_range("bath_block: no such bath level");
  const PairOperators op;
  const double eps = bath.energies[static_cast<std::size_t>(i - 1)];
  const double V = bath.couplings[static_cast<std::size_t>(i - 1)];
  Matrix16 k = eps * (number(op.b) - number(op.bt));
  k += V * (op.a.adjoint() * op.b + op.b.adjoint() * op.a - op.at.adjoint() * op.bt - op.bt.adjoint() * op.at);
  if (config.gamma > 0.0) {
    const double v = occ.v_of(s, i);
    const double g1 = config.gamma * (1.0 - v);
    const double g2 = config.gamma * v;
    const Matrix16 d = (g1 - g2) * (number(op.b) + number(op.bt)) - 2.0 * g1 * op.bt * op.b +
                       2.0 * g2 * op.bt.adjoint() * op.b.adjoint() + 2.0 * g2 * Matrix16::Identity();
    k += Complex{0.0, -1.0} * d;
  }
  return k;
}

Matrix16 interaction_block(const SiamConfig& config, double t) {
  const PairOperators op;
  const double eps = impurity_level(t, config);
  const Matrix16 na = number(op.a);
  const Matrix16 nta = number(op.at);
  const Matrix16 nb = number(op.b);
  const Matrix16 ntb = number(op.bt);
  return eps * (na - nta + nb - ntb) + config.U * (na * nb - nta * ntb);
}

GateSet build_gates(const SiamConfig& config, const BathDiscretization& bath, const Occupations& occ, double dt,
                    double t) {
  GateSet g;
  for (Spin s : kSpins)
    for (int i = 1; i <= static_cast<int>(bath.energies.size()); ++i)
      g.bath[spin_index(s)].push_back(half_step(bath_block(config, bath, occ, s, i), dt));
  g.interaction = half_step(interaction_block(config, t), dt);
  g.swap = fermionic_swap();
  return g;
}

// ---------------------------------------------------------------------------
// MPS

MpsState MpsState::thermal(const Occupations& occ) {
  MpsState m;
  const int n = occ.n_orbitals();
  m.sites_.resize(static_cast<std::size_t>(2 * n));
  for (Spin s : kSpins) {
    for (int i = 0; i < n; ++i) {
      auto& t = m.site(m.site_of(s, i));
      for (auto& a : t) a = CMatrix::Zero(1, 1);
      t[0](0, 0) = 1.0 - occ.v_of(s, i);
      t[3](0, 0) = occ.v_of(s, i);
    }
  }
  return m;
}

Eigen::Index MpsState::bond(int k) const {
  if (k == n_sites()) return sites_.back()[0].cols();
  return site(k)[0].rows();
}

Eigen::Index MpsState::max_bond() const {
  Eigen::Index b = 1;
  for (const auto& s : sites_) b = std::max(b, s[0].cols());
  return b;
}

Complex MpsState::trace() const {
  CMatrix env = CMatrix::Ones(1, 1);
  for (const auto& s : sites_) env = env * (s[0] + s[3]);
  return env(0, 0);
}

RVector MpsState::densities() const {
  const int n = n_sites();
  std::vector<CMatrix> right(static_cast<std::size_t>(n + 1));
  right[static_cast<std::size_t>(n)] = CMatrix::Ones(1, 1);
  for (int k = n - 1; k >= 0; --k)
    right[static_cast<std::size_t>(k)] = (site(k)[0] + site(k)[3]) * right[static_cast<std::size_t>(k + 1)];
  RVector d(n);
  CMatrix left = CMatrix::Ones(1, 1);
  for (int k = 0; k < n; ++k) {
    d(k) = (left * site(k)[3] * right[static_cast<std::size_t>(k + 1)])(0, 0).real();
    left = left * (site(k)[0] + site(k)[3]);
  }
  return d;
}

CVector MpsState::to_dense() const {
  if (n_sites() > 12) throw CapacityError("to_dense: too many sites");
  CMatrix rows = CMatrix::Ones(1, 1);  // one row per prefix configuration
  for (const auto& s : sites_) {
    CMatrix next(rows.rows() * 4, s[0].cols());
    for (Eigen::Index r = 0; r < rows.rows(); ++r)
      for (int x = 0; x < 4; ++x) next.row(4 * r + x) = rows.row(r) * s[static_cast<std::size_t>(x)];
    rows = std::move(next);
  }
  return rows.col(0);
}

namespace {

constexpr char kMagic[8] = {'T', 'C', 'M', 'P', 'S', '0', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t x) { os.write(reinterpret_cast<const char*>(&x), sizeof x); }

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof x);
  return x;
}

}  // namespace

void MpsState::save(std::ostream& os) const {
  os.write(kMagic, sizeof kMagic);
  write_u64(os, static_cast<std::uint64_t>(n_sites()));
  for (int k = 0; k <= n_sites(); ++k) write_u64(os, static_cast<std::uint64_t>(bond(k)));
  for (const auto& s : sites_) {
    for (Eigen::Index l = 0; l < s[0].rows(); ++l)
      for (int x = 0; x < 4; ++x)
        for (Eigen::Index r = 0; r < s[0].cols(); ++r) {
          const Complex c = s[static_cast<std::size_t>(x)](l, r);
          const double re = c.real();
          const double im = c.imag();
          os.write(reinterpret_cast<const char*>(&re), sizeof re);
          os.write(reinterpret_cast<const char*>(&im), sizeof im);
        }
  }
  if (!os) throw std::runtime_error("MpsState::save: write failed");
}

MpsState MpsState::load(std::istream& is) {
  char magic[8] = {};
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("MpsState::load: not a state dump");
  const std::uint64_t n = read_u64(is);
  if (!is || n == 0 || n > 100000) throw std::runtime_error("MpsState::load: bad site count");
  std::vector<Eigen::Index> bonds(n + 1);
  for (auto& b : bonds) b = static_cast<Eigen::Index>(read_u64(is));
  if (!is || bonds.front() != 1 || bonds.back() != 1) throw std::runtime_error("MpsState::load: bad bond dimensions");
  MpsState m;
  m.sites_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& s = m.sites_[k];
    for (auto& a : s) a.resize(bonds[k], bonds[k + 1]);
    for (Eigen::Index l = 0; l < bonds[k]; ++l)
      for (int x = 0; x < 4; ++x)
        for (Eigen::Index r = 0; r < bonds[k + 1]; ++r) {
          double re = 0.0;
          double im = 0.0;
          is.read(reinterpret_cast<char*>(&re), sizeof re);
          is.read(reinterpret_cast<char*>(&im), sizeof im);
          s[static_cast<std::size_t>(x)](l, r) = Complex{re, im};
        }
  }
  if (!is) throw std::runtime_error("MpsState::load: truncated dump");
  return m;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

enum class Direction { right, left };

// Applies m to sites (k, k + 1) and splits with a truncated SVD. Moving right
// leaves site k left-normalized; moving left leaves site k + 1 right-normalized.
void apply_pair(MpsState& state, int k, const Matrix16& m, Direction dir, const SvdPolicy& policy, SweepStats& stats) {
  auto& A = state.site(k);
  auto& B = state.site(k + 1);
  const Eigen::Index dl = A[0].rows();
  const Eigen::Index dr = B[0].cols();
  std::array<CMatrix, 16> theta;
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) theta[static_cast<std::size_t>(4 * x + y)] = A[static_cast<std::size_t>(x)] * B[static_cast<std::size_t>(y)];
  CMatrix big = CMatrix::Zero(4 * dl, 4 * dr);
  for (int out = 0; out < 16; ++out)
    for (int in = 0; in < 16; ++in) {
      const Complex c = m(out, in);
      if (c == Complex{}) continue;
      big.block((out / 4) * dl, (out % 4) * dr, dl, dr) += c * theta[static_cast<std::size_t>(in)];
    }
  Eigen::JacobiSVD<CMatrix> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  Eigen::Index keep = 1;
  while (keep < sv.size() && sv(keep) > policy.threshold * sv(0)) ++keep;
  if (keep > policy.max_bond)
    throw CapacityError("TEBD bond dimension " + std::to_string(keep) + " exceeds max_bond " +
                        std::to_string(policy.max_bond) + " at t = " + std::to_string(policy.time) + " (bond " +
                        std::to_string(k + 1) + ")");
  const double total = sv.squaredNorm();
  if (total > 0.0) stats.discarded_weight += sv.tail(sv.size() - keep).squaredNorm() / total;
  stats.max_bond = std::max(stats.max_bond, keep);

  const CMatrix u = svd.matrixU().leftCols(keep);
  const CMatrix vh = svd.matrixV().leftCols(keep).adjoint();
  const auto s = sv.head(keep).cast<Complex>().asDiagonal();
  for (int x = 0; x < 4; ++x) {
    const std::size_t xs = static_cast<std::size_t>(x);
    if (dir == Direction::right) {
      A[xs] = u.middleRows(x * dl, dl);
      B[xs] = s * vh.middleCols(x * dr, dr);
    } else {
      A[xs] = u.middleRows(x * dl, dl) * s;
      B[xs] = vh.middleCols(x * dr, dr);
    }
  }
}

}  // namespace

SweepStats sweep(MpsState& state, const GateSet& gates, const SvdPolicy& policy) {
  const int n = state.n_orbitals();
  const int nb = n - 1;
  if (state.n_sites() != 2 * n || static_cast<int>(gates.bath[0].size()) != nb ||
      static_cast<int>(gates.bath[1].size()) != nb)
    throw std::invalid_argument("sweep: gate set does not match the state");
  SweepStats stats;
  // Forward: the impurity meets bath i on its right, then trades places with it.
  for (int i = 1; i <= nb; ++i)
    apply_pair(state, i - 1, gates.swap * gates.bath[0][static_cast<std::size_t>(i - 1)], Direction::right, policy, stats);
  apply_pair(state, n - 1, gates.interaction, Direction::right, policy, stats);
  for (int i = 1; i <= nb; ++i)
    apply_pair(state, n - 1 + i, gates.swap * gates.bath[1][static_cast<std::size_t>(i - 1)], Direction::right, policy,
               stats);
  // Mirror: trade back, then act.
  for (int i = nb; i >= 1; --i)
    apply_pair(state, n - 1 + i, gates.bath[1][static_cast<std::size_t>(i - 1)] * gates.swap, Direction::left, policy,
               stats);
  apply_pair(state, n - 1, gates.interaction, Direction::left, policy, stats);
  for (int i = nb; i >= 1; --i)
    apply_pair(state, i - 1, gates.bath[0][static_cast<std::size_t>(i - 1)] * gates.swap, Direction::left, policy, stats);
  return stats;
}

// ---------------------------------------------------------------------------
// Propagation

TebdPropagator::TebdPropagator(const SiamConfig& config)
    : config_(config), bath_(build_bath(config)), occ_(make_occupations(config, bath_)), state_(MpsState::thermal(occ_)) {
  validate(config);
  gates_ = build_gates(config_, bath_, occ_, config_.dt, 0.5 * config_.dt);
}

void TebdPropagator::step() {
  const double mid = time_ + 0.5 * config_.dt;
  if (config_.delta_eps != 0.0) gates_.interaction = half_step(interaction_block(config_, mid), config_.dt);
  SvdPolicy policy{config_.svd_threshold, config_.max_bond, time_ + config_.dt};
  const SweepStats stats = sweep(state_, gates_, policy);
  discarded_ += stats.discarded_weight;
  time_ = static_cast<double>(++steps_) * config_.dt;
  const Complex tr = state_.trace();
  if (!std::isfinite(tr.real()) || !std::isfinite(tr.imag()))
    throw NumericalError("TEBD produced non-finite values at t = " + std::to_string(time_));
}

TrajectoryPoint TebdPropagator::measure() const {
  const RVector d = state_.densities();
  TrajectoryPoint p;
  p.time = time_;
  p.n_imp_alpha = d(state_.site_of(Spin::alpha, 0));
  p.n_imp_beta = d(state_.site_of(Spin::beta, 0));
  p.n_electrons = d.sum();
  p.trace_dev = std::abs(state_.trace() - 1.0);
  p.discarded_weight = discarded_;
  return p;
}

TrajectoryRecord propagate_tebd(const SiamConfig& config, MpsState* final_state) {
  TebdPropagator prop(config);
  TrajectoryRecord rec("tebd");
  const int stride = record_stride(config.output_interval, config.dt);
  const long steps = std::lround(config.t_final / config.dt);
  rec.push(prop.measure());
  for (long step = 1; step <= steps; ++step) {
    prop.step();
    if (step % stride == 0) rec.push(prop.measure());
  }
  if (final_state) *final_state = prop.state();
  return rec;
}

}  // namespace thermocc
