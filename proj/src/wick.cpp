#include "thermocc/wick.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace thermocc {

// ---------------------------------------------------------------------------
// Vacuum expectation values

namespace {

bool can_contract(const OperatorSymbol& a, const OperatorSymbol& c) {
  if (a.creation || !c.creation) return false;
  if (a.tilde != c.tilde || a.spin != c.spin) return false;
  return a.index.is_label || c.index.is_label || a.index.value == c.index.value;
}

int mode_class(const OperatorSymbol& s) { return (s.tilde ? 2 : 0) + spin_index(s.spin); }

bool balanced(const std::vector<OperatorSymbol>& symbols) {
  std::array<int, 4> open{};
  // Scanning right to left, every annihilator needs an unused creator to its right.
  for (auto it = symbols.rbegin(); it != symbols.rend(); ++it) {
    int& c = open[mode_class(*it)];
    if (it->creation) ++c;
    else if (--c < 0) return false;
  }
  return std::all_of(open.begin(), open.end(), [](int c) { return c == 0; });
}

template <class Visit>
void enumerate_pairings(const std::vector<OperatorSymbol>& s, const std::vector<int>& remaining, Pairing& cur,
                        Visit& visit) {
  if (remaining.empty()) {
    visit(cur);
    return;
  }
  const int first = remaining[0];
  if (s[first].creation) return;  // <0| b+ = 0
  std::vector<int> rest;
  rest.reserve(remaining.size());
  for (std::size_t q = 1; q < remaining.size(); ++q) {
    const int pos = remaining[q];
    if (!can_contract(s[first], s[pos])) continue;
    rest.clear();
    for (std::size_t m = 1; m < remaining.size(); ++m)
      if (m != q) rest.push_back(remaining[m]);
    const int saved = cur.sign;
    if ((q - 1) % 2 == 1) cur.sign = -cur.sign;
    cur.pairs.emplace_back(first, pos);
    enumerate_pairings(s, rest, cur, visit);
    cur.pairs.pop_back();
    cur.sign = saved;
  }
}

}  // namespace

std::vector<Pairing> wick_pairings(const std::vector<OperatorSymbol>& symbols) {
  std::vector<Pairing> out;
  if (!balanced(symbols)) return out;
  std::vector<int> remaining(symbols.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  Pairing cur;
  auto visit = [&](const Pairing& p) { out.push_back(p); };
  enumerate_pairings(symbols, remaining, cur, visit);
  return out;
}

double wick_vacuum_expectation(const std::vector<OperatorSymbol>& symbols) {
  for (const auto& s : symbols)
    if (s.index.is_label) throw std::invalid_argument("wick_vacuum_expectation requires concrete indices");
  double sum = 0.0;
  for (const auto& p : wick_pairings(symbols)) sum += p.sign;
  return sum;
}

// ---------------------------------------------------------------------------
// Program metadata

int ContractionInstruction::t_power() const {
  return static_cast<int>(std::count_if(operands.begin(), operands.end(), [](const Operand& o) {
    return o.source == OperandSource::t1 || o.source == OperandSource::t2;
  }));
}

std::vector<const ContractionInstruction*> ContractionProgram::block(ResidualBlock b) const {
  std::vector<const ContractionInstruction*> out;
  for (const auto& ins : instructions)
    if (ins.output == b) out.push_back(&ins);
  return out;
}

bool is_arrowhead(const CMatrix& m, double tol) {
  for (Eigen::Index q = 1; q < m.cols(); ++q)
    for (Eigen::Index p = 1; p < m.rows(); ++p)
      if (p != q && std::abs(m(p, q)) > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

constexpr int kHamiltonianLabel = 10;
constexpr int kVertexLabel = 100;
constexpr int kFirstInternal = 4;

struct TemplateTerm {
  Operand factor;
  std::vector<OperatorSymbol> symbols;
};

enum VertexKind : int { t1_alpha = 0, t1_beta = 1, t2_aa = 2, t2_bb = 3, t2_ab = 4 };

struct Vertex {
  Operand factor;
  std::vector<OperatorSymbol> symbols;
};

Vertex make_vertex(int kind, int vertex_number) {
  const int b = kVertexLabel + 10 * vertex_number;
  auto L = [&](int k) { return Index::label(b + k); };
  Vertex v;
  switch (kind) {
    case t1_alpha:
    case t1_beta: {
      const Spin s = kind == t1_alpha ? Spin::alpha : Spin::beta;
      v.factor = {OperandSource::t1, OperandView::full, s, 0, {L(0), L(1)}};
      v.symbols = {create(false, s, L(0)), create(true, s, L(1))};
      break;
    }
    case t2_aa:
    case t2_bb: {
      const Spin s = kind == t2_aa ? Spin::alpha : Spin::beta;
      const int slot = kind == t2_aa ? block_index(DoublesBlock::aa) : block_index(DoublesBlock::bb);
      v.factor = {OperandSource::t2, OperandView::full, s, slot, {L(0), L(1), L(2), L(3)}};
      v.symbols = {create(false, s, L(0)), create(false, s, L(1)), create(true, s, L(3)), create(true, s, L(2))};
      break;
    }
    default: {
      v.factor = {OperandSource::t2, OperandView::full, Spin::alpha, block_index(DoublesBlock::ab),
                  {L(0), L(1), L(2), L(3)}};
      v.symbols = {create(false, Spin::alpha, L(0)), create(false, Spin::beta, L(1)),
                   create(true, Spin::beta, L(3)), create(true, Spin::alpha, L(2))};
      break;
    }
  }
  return v;
}

std::vector<OperatorSymbol> projector(ResidualBlock b) {
  const auto E = [](int k) { return Index::label(k); };
  const Spin a = Spin::alpha;
  const Spin be = Spin::beta;
  switch (b) {
    case ResidualBlock::r1_alpha:
      return {annihilate(true, a, E(1)), annihilate(false, a, E(0))};
    case ResidualBlock::r1_beta:
      return {annihilate(true, be, E(1)), annihilate(false, be, E(0))};
    case ResidualBlock::r2_aa:
      return {annihilate(true, a, E(2)), annihilate(true, a, E(3)), annihilate(false, a, E(1)),
              annihilate(false, a, E(0))};
    case ResidualBlock::r2_bb:
      return {annihilate(true, be, E(2)), annihilate(true, be, E(3)), annihilate(false, be, E(1)),
              annihilate(false, be, E(0))};
    case ResidualBlock::r2_ab:
      return {annihilate(true, a, E(2)), annihilate(true, be, E(3)), annihilate(false, be, E(1)),
              annihilate(false, a, E(0))};
  }
  return {};
}

bool view_nonzero(const CMatrix& m, OperandView view) {
  const Eigen::Index n = m.rows();
  switch (view) {
    case OperandView::full:
      return !m.isZero(0.0);
    case OperandView::diag:
      return !m.diagonal().isZero(0.0);
    case OperandView::row0:
      return n > 1 && !m.row(0).tail(n - 1).isZero(0.0);
    case OperandView::col0:
      return n > 1 && !m.col(0).tail(n - 1).isZero(0.0);
  }
  return false;
}

std::vector<TemplateTerm> hamiltonian_template(const SuperHamiltonian& sh, OneBodyLayout layout) {
  std::vector<TemplateTerm> out;
  const Index p = Index::label(kHamiltonianLabel);
  const Index q = Index::label(kHamiltonianLabel + 1);
  const Index zero = Index::orbital(0);

  for (Spin s : kSpins) {
    const int si = spin_index(s);
    struct Channel {
      OperandSource source;
      const CMatrix* matrix;
      bool left_tilde, right_tilde, right_creation;
    };
    const CMatrix ht = sh.h_tilde(s);
    const Channel channels[3] = {{OperandSource::h, &sh.h[si], false, false, false},
                                 {OperandSource::h_tilde, &ht, true, true, false},
                                 {OperandSource::pairing, &sh.pairing[si], false, true, true}};
    for (const auto& ch : channels) {
      auto right = [&](Index i) {
        return ch.right_creation ? create(ch.right_tilde, s, i) : annihilate(ch.right_tilde, s, i);
      };
      // The driven impurity level lives on the diagonal of h and h~.
      const bool keep_always = ch.source != OperandSource::pairing;
      if (layout == OneBodyLayout::dense) {
        if (keep_always || view_nonzero(*ch.matrix, OperandView::full))
          out.push_back({{ch.source, OperandView::full, s, 0, {p, q}}, {create(ch.left_tilde, s, p), right(q)}});
        continue;
      }
      if (keep_always || view_nonzero(*ch.matrix, OperandView::diag))
        out.push_back({{ch.source, OperandView::diag, s, 0, {p}}, {create(ch.left_tilde, s, p), right(p)}});
      if (view_nonzero(*ch.matrix, OperandView::row0))
        out.push_back({{ch.source, OperandView::row0, s, 0, {q}}, {create(ch.left_tilde, s, zero), right(q)}});
      if (view_nonzero(*ch.matrix, OperandView::col0))
        out.push_back({{ch.source, OperandView::col0, s, 0, {p}}, {create(ch.left_tilde, s, p), right(zero)}});
    }
  }

  for (std::size_t k = 0; k < sh.interaction.size(); ++k) {
    const auto& term = sh.interaction[k];
    if (!is_normal_ordered(term)) throw std::invalid_argument("generate_eom: interaction term is not normal-ordered");
    for (const auto& sym : term.symbols)
      if (sym.index.is_label) throw std::invalid_argument("generate_eom: interaction term has a free label");
    out.push_back({{OperandSource::interaction, OperandView::full, Spin::alpha, static_cast<int>(k), {}},
                   term.symbols});
  }
  return out;
}

// Union-find over index slots.
class IndexClasses {
 public:
  int id(Index i) {
    auto [it, inserted] = ids_.try_emplace(i, static_cast<int>(parent_.size()));
    if (inserted) parent_.push_back(it->second);
    return it->second;
  }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(Index a, Index b) {
    const int ra = find(id(a));
    const int rb = find(id(b));
    if (ra != rb) parent_[std::max(ra, rb)] = std::min(ra, rb);
  }
  const std::map<Index, int>& ids() const { return ids_; }

 private:
  std::map<Index, int> ids_;
  std::vector<int> parent_;
};

// Resolves the Kronecker deltas of one pairing into an index pattern.
// Returns false when two different concrete orbitals are identified.
bool resolve(const std::vector<OperatorSymbol>& symbols, const Pairing& pairing, int rank,
             std::map<Index, Index>& rename) {
  IndexClasses classes;
  for (const auto& s : symbols) classes.id(s.index);
  for (const auto& [a, c] : pairing.pairs) classes.unite(symbols[a].index, symbols[c].index);

  std::map<int, std::vector<Index>> members;
  for (const auto& [idx, id] : classes.ids()) members[classes.find(id)].push_back(idx);

  int next_internal = kFirstInternal;
  for (const auto& [root, list] : members) {
    std::optional<Index> concrete;
    std::optional<Index> external;
    for (const Index& i : list) {
      if (!i.is_label) {
        if (concrete && *concrete != i) return false;
        concrete = i;
      } else if (i.value < rank && (!external || i.value < external->value)) {
        external = i;
      }
    }
    Index rep = concrete ? *concrete : external ? *external : Index::label(next_internal++);
    for (const Index& i : list) rename[i] = rep;
  }
  return true;
}

using Key = std::vector<int>;

int encode(const Index& i) { return i.is_label ? 2 * i.value + 1 : 2 * i.value; }

struct Canonical {
  Key key;
  ContractionInstruction instruction;
};

// Representative of an instruction under reordering of its factors,
// antisymmetry of same-spin t2 blocks and renaming of summation labels.
Canonical canonicalize(const ContractionInstruction& in) {
  const std::size_t m = in.operands.size();
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);

  std::vector<std::size_t> antisym;  // operand positions with t2 same-spin symmetry
  for (std::size_t k = 0; k < m; ++k) {
    const auto& o = in.operands[k];
    if (o.source == OperandSource::t2 && o.slot != block_index(DoublesBlock::ab)) antisym.push_back(k);
  }
  const std::size_t n_masks = std::size_t{1} << (2 * antisym.size());

  std::optional<Canonical> best;
  do {
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      ContractionInstruction c = in;
      int sign = 1;
      for (std::size_t a = 0; a < antisym.size(); ++a) {
        auto& idx = c.operands[antisym[a]].indices;
        if ((mask >> (2 * a)) & 1U) {
          std::swap(idx[0], idx[1]);
          sign = -sign;
        }
        if ((mask >> (2 * a + 1)) & 1U) {
          std::swap(idx[2], idx[3]);
          sign = -sign;
        }
      }
      std::vector<Operand> ordered;
      ordered.reserve(m);
      for (std::size_t k : perm) ordered.push_back(c.operands[k]);
      c.operands = std::move(ordered);

      std::map<int, int> relabel;
      int next = kFirstInternal;
      auto fix = [&](Index& i) {
        if (!i.is_label || i.value < kFirstInternal) return;
        auto [it, inserted] = relabel.try_emplace(i.value, next);
        if (inserted) ++next;
        i.value = it->second;
      };
      for (auto& o : c.operands)
        for (auto& i : o.indices) fix(i);

      Key key{static_cast<int>(c.output)};
      for (const auto& i : c.output_indices) key.push_back(encode(i));
      for (const auto& o : c.operands) {
        key.insert(key.end(), {-1, static_cast<int>(o.source), static_cast<int>(o.view), spin_index(o.spin), o.slot});
        for (const auto& i : o.indices) key.push_back(encode(i));
      }
      if (!best || key < best->key) {
        c.prefactor = in.prefactor * static_cast<double>(sign);
        c.summation_labels.clear();
        for (int l = kFirstInternal; l < next; ++l) c.summation_labels.push_back(l);
        best = Canonical{std::move(key), std::move(c)};
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return *best;
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

ContractionProgram generate_eom(const SuperHamiltonian& sh, Truncation truncation, OneBodyLayout layout) {
  if (layout == OneBodyLayout::arrowhead) {
    for (Spin s : kSpins) {
      if (!is_arrowhead(sh.h[spin_index(s)]) || !is_arrowhead(sh.pairing[spin_index(s)]))
        throw std::invalid_argument("generate_eom: arrowhead layout requested for a non-arrowhead one-body matrix");
    }
  }
  const auto templates = hamiltonian_template(sh, layout);

  std::vector<ResidualBlock> blocks{ResidualBlock::r1_alpha, ResidualBlock::r1_beta};
  if (truncation == Truncation::singles_doubles)
    blocks.insert(blocks.end(), {ResidualBlock::r2_aa, ResidualBlock::r2_bb, ResidualBlock::r2_ab});
  const int n_kinds = truncation == Truncation::singles_doubles ? 5 : 2;

  std::map<Key, ContractionInstruction> merged;

  for (ResidualBlock block : blocks) {
    const auto proj = projector(block);
    const int rank = residual_rank(block);
    for (const auto& term : templates) {
      const int h_annihilators = static_cast<int>(
          std::count_if(term.symbols.begin(), term.symbols.end(), [](const OperatorSymbol& s) { return !s.creation; }));

      // Vertex multiplicities m[kind]; sum(m) <= annihilators of the H' term.
      std::array<int, 5> mult{};
      auto visit_multiset = [&](auto&& self, int kind, int left) -> void {
        if (kind == n_kinds) {
          std::vector<OperatorSymbol> symbols = proj;
          symbols.insert(symbols.end(), term.symbols.begin(), term.symbols.end());
          const int h_begin = static_cast<int>(proj.size());
          const int h_end = h_begin + static_cast<int>(term.symbols.size());

          std::vector<Operand> factors{term.factor};
          std::vector<std::pair<int, int>> ranges;
          double weight = 1.0;
          int vertex_number = 0;
          for (int k = 0; k < n_kinds; ++k) {
            weight /= factorial(mult[k]);
            if (k == t2_aa || k == t2_bb) weight *= std::pow(0.25, mult[k]);
            for (int r = 0; r < mult[k]; ++r) {
              Vertex v = make_vertex(k, vertex_number++);
              const int begin = static_cast<int>(symbols.size());
              symbols.insert(symbols.end(), v.symbols.begin(), v.symbols.end());
              ranges.emplace_back(begin, static_cast<int>(symbols.size()));
              factors.push_back(std::move(v.factor));
            }
          }
          if (!balanced(symbols)) return;

          for (const auto& pairing : wick_pairings(symbols)) {
            bool connected = true;
            for (const auto& [begin, end] : ranges) {
              const bool touches = std::any_of(pairing.pairs.begin(), pairing.pairs.end(), [&](const auto& pr) {
                return pr.first >= h_begin && pr.first < h_end && pr.second >= begin && pr.second < end;
              });
              if (!touches) {
                connected = false;
                break;
              }
            }
            if (!connected) continue;

            std::map<Index, Index> rename;
            if (!resolve(symbols, pairing, rank, rename)) continue;

            ContractionInstruction ins;
            ins.output = block;
            for (int e = 0; e < rank; ++e) ins.output_indices.push_back(rename.at(Index::label(e)));
            ins.prefactor = weight * pairing.sign;
            ins.operands = factors;
            for (auto& o : ins.operands)
              for (auto& i : o.indices) i = rename.at(i);

            Canonical c = canonicalize(ins);
            auto [it, inserted] = merged.try_emplace(c.key, c.instruction);
            if (!inserted) it->second.prefactor += c.instruction.prefactor;
          }
          return;
        }
        for (int m = 0; m <= left; ++m) {
          mult[kind] = m;
          self(self, kind + 1, left - m);
        }
        mult[kind] = 0;
      };
      visit_multiset(visit_multiset, 0, h_annihilators);
    }
  }

  ContractionProgram program;
  program.truncation = truncation;
  program.layout = layout;
  program.n_orbitals = sh.n_orbitals;
  program.interaction_terms = static_cast<int>(sh.interaction.size());
  for (auto& [key, ins] : merged) {
    if (std::abs(ins.prefactor) < 1e-12) continue;
    program.bch_order = std::max(program.bch_order, ins.t_power());
    program.instructions.push_back(std::move(ins));
  }
  return program;
}

// ---------------------------------------------------------------------------
// Text dump

namespace {

const char* block_name(ResidualBlock b) {
  switch (b) {
    case ResidualBlock::r1_alpha: return "R1a";
    case ResidualBlock::r1_beta: return "R1b";
    case ResidualBlock::r2_aa: return "R2aa";
    case ResidualBlock::r2_bb: return "R2bb";
    case ResidualBlock::r2_ab: return "R2ab";
  }
  return "?";
}

std::string index_name(const Index& i, int rank) {
  if (!i.is_label) return std::to_string(i.value);
  static const char* r1[] = {"i", "j"};
  static const char* r2[] = {"i", "k", "j", "l"};
  if (i.value < kFirstInternal) return rank == 2 ? r1[i.value] : r2[i.value];
  static const char* internal = "pqrstuvwxyz";
  const int k = i.value - kFirstInternal;
  return k < 11 ? std::string(1, internal[k]) : "x" + std::to_string(k);
}

std::string operand_name(const Operand& o) {
  std::string base;
  switch (o.source) {
    case OperandSource::h: base = "h"; break;
    case OperandSource::h_tilde: base = "ht"; break;
    case OperandSource::pairing: base = "D"; break;
    case OperandSource::interaction: return "W" + std::to_string(o.slot);
    case OperandSource::t1: base = "t1"; break;
    case OperandSource::t2:
      return o.slot == 0 ? "t2aa" : o.slot == 1 ? "t2bb" : "t2ab";
  }
  base += spin_char(o.spin);
  switch (o.view) {
    case OperandView::diag: base += ".diag"; break;
    case OperandView::row0: base += ".row0"; break;
    case OperandView::col0: base += ".col0"; break;
    default: break;
  }
  return base;
}

}  // namespace

std::string to_string(const ContractionInstruction& ins) {
  const int rank = residual_rank(ins.output);
  std::ostringstream os;
  os << block_name(ins.output) << '[';
  for (std::size_t k = 0; k < ins.output_indices.size(); ++k) {
    if (k > 0) os << (rank == 4 && k == 2 ? "|" : ",");
    os << index_name(ins.output_indices[k], rank);
  }
  os << "] += (" << ins.prefactor.real();
  if (ins.prefactor.imag() != 0.0) os << (ins.prefactor.imag() < 0 ? "" : "+") << ins.prefactor.imag() << 'i';
  os << ')';
  for (const auto& o : ins.operands) {
    os << " * " << operand_name(o);
    if (o.source == OperandSource::interaction) continue;
    os << '[';
    for (std::size_t k = 0; k < o.indices.size(); ++k) os << (k ? "," : "") << index_name(o.indices[k], rank);
    os << ']';
  }
  if (!ins.summation_labels.empty()) {
    os << " sum over {";
    for (std::size_t k = 0; k < ins.summation_labels.size(); ++k)
      os << (k ? "," : "") << index_name(Index::label(ins.summation_labels[k]), rank);
    os << '}';
  }
  return os.str();
}

std::string dump_program(const ContractionProgram& program) {
  std::ostringstream os;
  os << "# " << program.instructions.size() << " instructions, "
     << (program.truncation == Truncation::singles ? "singles" : "singles+doubles")
     << ", max T power " << program.bch_order << '\n';
  for (const auto& ins : program.instructions) os << to_string(ins) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

constexpr int kMaxFactors = 4;

// Buffer numbering: one-body views first, then t1 and t2 blocks.
int one_body_buffer(OperandSource src, OperandView view, Spin s) {
  return (static_cast<int>(src) * 4 + static_cast<int>(view)) * 2 + spin_index(s);
}
constexpr int kT1Buffer = 24;
constexpr int kT2Buffer = 26;
constexpr int kBufferCount = 29;

struct Loop {
  int label = 0;
  long out_stride = 0;
  std::array<long, kMaxFactors> stride{};
};

struct Kernel {
  int output = 0;
  long out_offset = 0;
  int n_factors = 0;
  std::array<int, kMaxFactors> buffer{};
  std::array<long, kMaxFactors> offset{};
  std::vector<Loop> loops;
  Complex prefactor;
  std::vector<int> interaction;  // scalar W coefficients multiplying the prefactor
  int t2_factor = -1;            // factor carrying four distinct labels, if any
  bool collapse = false;         // the two innermost loops fuse into one of length n^2
};

// Kernels traversed together: every member shares the loop order, so each
// row of the driving tensor is touched once per evaluation.
// A one-body vector times the amplitude block mirrored by the output; all such
// terms of a block collapse into one elementwise scaling.
struct Scaling {
  Kernel kernel;
  int vec = 0;    // factor holding the one-body vector
  int amp = 0;    // factor holding the amplitudes
  int level = 0;  // loop level the vector runs over
};

struct FusedGroup {
  bool output_rows = false;  // planes of one residual block, written by assignment
  int key = 0;               // residual block or t2 buffer
  std::vector<Kernel> kernels;
  std::vector<Scaling> scaled;
  std::size_t depth = 0;
};

inline Complex cmul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

std::vector<long> strides_for(const Operand& o, long n) {
  if (o.source == OperandSource::t2) return {n * n * n, n * n, n, 1};
  if (o.view == OperandView::full) return {1, n};  // column-major matrices
  return {1};
}

std::vector<long> output_strides(ResidualBlock b, long n) {
  if (residual_rank(b) == 2) return {1, n};
  return {n * n * n, n * n, n, 1};
}

Kernel compile_kernel(const ContractionInstruction& ins, long n) {
  Kernel k;
  k.output = static_cast<int>(ins.output);
  k.prefactor = ins.prefactor;
  std::map<int, Loop> loops;
  const auto out_str = output_strides(ins.output, n);
  for (std::size_t d = 0; d < ins.output_indices.size(); ++d) {
    const Index& i = ins.output_indices[d];
    if (i.is_label) loops[i.value].out_stride += out_str[d];
    else k.out_offset += i.value * out_str[d];
  }
  for (const auto& o : ins.operands) {
    if (o.source == OperandSource::interaction) {
      k.interaction.push_back(o.slot);
      continue;
    }
    if (k.n_factors == kMaxFactors) throw std::logic_error("Evaluator: too many tensor factors");
    const int q = k.n_factors++;
    k.buffer[q] = o.source == OperandSource::t1   ? kT1Buffer + spin_index(o.spin)
                  : o.source == OperandSource::t2 ? kT2Buffer + o.slot
                                                  : one_body_buffer(o.source, o.view, o.spin);
    const auto str = strides_for(o, n);
    std::set<int> labels;
    for (std::size_t d = 0; d < o.indices.size(); ++d) {
      const Index& i = o.indices[d];
      if (i.is_label) {
        loops[i.value].stride[q] += str[d];
        labels.insert(i.value);
      } else {
        k.offset[q] += i.value * str[d];
      }
    }
    if (o.source == OperandSource::t2 && labels.size() == 4) k.t2_factor = q;
  }
  for (auto& [label, loop] : loops) {
    loop.label = label;
    k.loops.push_back(loop);
  }
  return k;
}

// Largest weight outermost; stable within ties.
template <class Weight>
void order_loops(Kernel& k, Weight weight) {
  std::stable_sort(k.loops.begin(), k.loops.end(),
                   [&](const Loop& a, const Loop& b) { return weight(a) > weight(b); });
}

long max_factor_stride(const Loop& l) { return *std::max_element(l.stride.begin(), l.stride.end()); }

// Contiguous kernels on interleaved (re, im) pairs so the compiler can vectorize.
inline void axpy_c(Complex* out, const Complex* a, Complex c, long n) {
  double* __restrict o = reinterpret_cast<double*>(out);
  const double* __restrict x = reinterpret_cast<const double*>(a);
  const double cr = c.real();
  const double ci = c.imag();
  for (long k = 0; k < n; ++k) {
    const double xr = x[2 * k];
    const double xi = x[2 * k + 1];
    o[2 * k] += cr * xr - ci * xi;
    o[2 * k + 1] += cr * xi + ci * xr;
  }
}

inline void axpy_cc(Complex* out, const Complex* a, const Complex* b, Complex c, long n) {
  double* __restrict o = reinterpret_cast<double*>(out);
  const double* __restrict x = reinterpret_cast<const double*>(a);
  const double* __restrict y = reinterpret_cast<const double*>(b);
  const double cr = c.real();
  const double ci = c.imag();
  for (long k = 0; k < n; ++k) {
    const double pr = x[2 * k] * y[2 * k] - x[2 * k + 1] * y[2 * k + 1];
    const double pi = x[2 * k] * y[2 * k + 1] + x[2 * k + 1] * y[2 * k];
    o[2 * k] += cr * pr - ci * pi;
    o[2 * k + 1] += cr * pi + ci * pr;
  }
}

inline Complex dot_cc(const Complex* a, const Complex* b, long n) {
  const double* __restrict x = reinterpret_cast<const double*>(a);
  const double* __restrict y = reinterpret_cast<const double*>(b);
  double sr = 0.0;
  double si = 0.0;
  for (long k = 0; k < n; ++k) {
    sr += x[2 * k] * y[2 * k] - x[2 * k + 1] * y[2 * k + 1];
    si += x[2 * k] * y[2 * k + 1] + x[2 * k + 1] * y[2 * k];
  }
  return {sr, si};
}

inline Complex sum_c(const Complex* a, long n) {
  Complex s{};
  for (long k = 0; k < n; ++k) s += a[k];
  return s;
}

// Pointers and strides live in locals: stores through `out` must not force reloads.
template <int NF>
void inner_loop(Complex* out, long out_stride, const std::array<const Complex*, kMaxFactors>& f, const Loop& L,
                Complex pref, long n) {
  std::array<const Complex*, kMaxFactors> p{};
  std::array<long, kMaxFactors> s{};
  for (int q = 0; q < NF; ++q) {
    p[q] = f[q];
    s[q] = L.stride[q];
  }
  if constexpr (NF == 1) {
    if (out_stride == 1 && s[0] == 1) return axpy_c(out, p[0], pref, n);
    if (out_stride == 0 && s[0] == 1) {
      *out += cmul(pref, sum_c(p[0], n));
      return;
    }
  } else if constexpr (NF == 2) {
    if (out_stride == 1) {
      if (s[0] == 1 && s[1] == 1) return axpy_cc(out, p[0], p[1], pref, n);
      if (s[0] == 1 && s[1] == 0) return axpy_c(out, p[0], cmul(pref, *p[1]), n);
      if (s[0] == 0 && s[1] == 1) return axpy_c(out, p[1], cmul(pref, *p[0]), n);
    } else if (out_stride == 0 && s[0] == 1 && s[1] == 1) {
      *out += cmul(pref, dot_cc(p[0], p[1], n));
      return;
    }
  }
  Complex* __restrict o = out;
  if (out_stride == 0) {
    Complex sum{};
    for (long x = 0; x < n; ++x) {
      Complex v{1.0, 0.0};
      for (int q = 0; q < NF; ++q) v = cmul(v, p[q][x * s[q]]);
      sum += v;
    }
    *o += cmul(pref, sum);
    return;
  }
  for (long x = 0; x < n; ++x) {
    Complex v = pref;
    for (int q = 0; q < NF; ++q) v = cmul(v, p[q][x * s[q]]);
    o[x * out_stride] += v;
  }
}

void dispatch_inner(int nf, Complex* out, long out_stride, const std::array<const Complex*, kMaxFactors>& f,
                    const Loop& L, Complex pref, long n) {
  switch (nf) {
    case 0: inner_loop<0>(out, out_stride, f, L, pref, n); break;
    case 1: inner_loop<1>(out, out_stride, f, L, pref, n); break;
    case 2: inner_loop<2>(out, out_stride, f, L, pref, n); break;
    case 3: inner_loop<3>(out, out_stride, f, L, pref, n); break;
    default: inner_loop<4>(out, out_stride, f, L, pref, n); break;
  }
}

template <int NF>
void run_loops(const Kernel& k, std::size_t level, Complex* out, std::array<const Complex*, kMaxFactors> f,
               Complex pref, long n) {
  const Loop& L = k.loops[level];
  if (level + 1 == k.loops.size()) {
    inner_loop<NF>(out, L.out_stride, f, L, pref, n);
    return;
  }
  for (long x = 0; x < n; ++x) {
    std::array<const Complex*, kMaxFactors> g = f;
    for (int q = 0; q < NF; ++q) g[q] += x * L.stride[q];
    run_loops<NF>(k, level + 1, out + x * L.out_stride, g, pref, n);
  }
}

template <int NF>
void run_kernel(const Kernel& k, Complex* out, std::array<const Complex*, kMaxFactors> f, Complex pref, long n) {
  if (k.loops.empty()) {
    Complex p = pref;
    for (int q = 0; q < NF; ++q) p = cmul(p, f[q][0]);
    out[0] += p;
    return;
  }
  run_loops<NF>(k, 0, out, f, pref, n);
}

struct Bound {
  Complex* out = nullptr;
  std::array<const Complex*, kMaxFactors> f{};
  Complex pref;
};

// The two innermost loops of a kernel, fused when every access is contiguous across them.
void run_plane(const Kernel& k, Complex* out, const std::array<const Complex*, kMaxFactors>& f, Complex pref, long n) {
  const Loop& a = k.loops[k.loops.size() - 2];
  const Loop& b = k.loops.back();
  if (k.collapse) {
    dispatch_inner(k.n_factors, out, b.out_stride, f, b, pref, n * n);
    return;
  }
  for (long x = 0; x < n; ++x) {
    std::array<const Complex*, kMaxFactors> g = f;
    for (int q = 0; q < k.n_factors; ++q) g[q] += x * a.stride[q];
    dispatch_inner(k.n_factors, out + x * a.out_stride, b.out_stride, g, b, pref, n);
  }
}

bool collapsible(const Kernel& k, long n) {
  if (k.loops.size() < 2) return false;
  const Loop& a = k.loops[k.loops.size() - 2];
  const Loop& b = k.loops.back();
  if (a.out_stride != n * b.out_stride) return false;
  for (int q = 0; q < k.n_factors; ++q)
    if (a.stride[q] != n * b.stride[q]) return false;
  return true;
}

// Odometer over every loop but the two innermost, shared by all group members.
void run_group(const FusedGroup& g, const std::vector<Bound>& bound, const std::vector<Bound>& scaled, long n,
               std::vector<Complex>& w) {
  const std::size_t depth = g.depth;
  const std::size_t outer = depth - 2;
  const Kernel& lead = g.kernels.empty() ? g.scaled.front().kernel : g.kernels.front();
  w.assign(static_cast<std::size_t>(n), Complex{});
  for (std::size_t m = 0; m < g.scaled.size(); ++m) {
    const Scaling& s = g.scaled[m];
    if (static_cast<std::size_t>(s.level) != depth - 1) continue;
    const long vs = s.kernel.loops[depth - 1].stride[s.vec];
    for (long x = 0; x < n; ++x) w[static_cast<std::size_t>(x)] += scaled[m].pref * scaled[m].f[s.vec][x * vs];
  }
  std::array<long, 2> idx{};
  while (true) {
    if (g.output_rows) {
      long out_off = 0;
      for (std::size_t lv = 0; lv < outer; ++lv) out_off += idx[lv] * lead.loops[lv].out_stride;
      Complex* plane = bound.empty() ? scaled.front().out : bound.front().out;
      plane += out_off;
      if (g.scaled.empty()) {
        std::fill(plane, plane + n * n, Complex{});
      } else {
        Complex c{};
        for (std::size_t m = 0; m < g.scaled.size(); ++m) {
          const Scaling& s = g.scaled[m];
          if (static_cast<std::size_t>(s.level) < outer)
            c += scaled[m].pref * scaled[m].f[s.vec][idx[s.level] * s.kernel.loops[s.level].stride[s.vec]];
        }
        const Complex* amp = scaled.front().f[g.scaled.front().amp] + out_off;
        for (long x = 0; x < n; ++x) {
          Complex cx = c;
          for (std::size_t m = 0; m < g.scaled.size(); ++m) {
            const Scaling& s = g.scaled[m];
            if (static_cast<std::size_t>(s.level) == outer)
              cx += scaled[m].pref * scaled[m].f[s.vec][x * s.kernel.loops[outer].stride[s.vec]];
          }
          Complex* o = plane + x * n;
          const Complex* t = amp + x * n;
          for (long y = 0; y < n; ++y) o[y] = cmul(cx + w[static_cast<std::size_t>(y)], t[y]);
        }
      }
    }
    for (std::size_t m = 0; m < g.kernels.size(); ++m) {
      const Kernel& k = g.kernels[m];
      const Bound& b = bound[m];
      std::array<const Complex*, kMaxFactors> f = b.f;
      long out_off = 0;
      for (std::size_t lv = 0; lv < outer; ++lv) {
        out_off += idx[lv] * k.loops[lv].out_stride;
        for (int q = 0; q < k.n_factors; ++q) f[q] += idx[lv] * k.loops[lv].stride[q];
      }
      run_plane(k, b.out + out_off, f, b.pref, n);
    }
    std::size_t lv = outer;
    while (lv > 0) {
      if (++idx[lv - 1] < n) break;
      idx[lv - 1] = 0;
      --lv;
    }
    if (lv == 0) return;
  }
}

}  // namespace

struct Evaluator::Compiled {
  std::vector<FusedGroup> groups;  // output-row groups first, then t2 streams
  std::vector<Kernel> kernels;     // everything else, in program order
  std::array<bool, 5> assigned{};  // residual blocks fully written by a group
};

Evaluator::Evaluator(ContractionProgram program) : program_(std::move(program)), compiled_(new Compiled) {
  const long n = program_.n_orbitals;
  std::map<int, FusedGroup> rows;
  std::map<int, FusedGroup> streams;
  for (const auto& ins : program_.instructions) {
    Kernel k = compile_kernel(ins, n);
    const std::size_t rank = static_cast<std::size_t>(residual_rank(ins.output));
    const bool full_output = ins.summation_labels.empty() && k.out_offset == 0 && k.loops.size() == rank &&
                             std::all_of(k.loops.begin(), k.loops.end(), [](const Loop& l) { return l.out_stride > 0; });
    if (full_output && n > 1) {
      order_loops(k, [](const Loop& l) { return l.out_stride; });
      FusedGroup& g = rows[k.output];
      g.output_rows = true;
      g.key = k.output;
      g.kernels.push_back(std::move(k));
    } else if (k.t2_factor >= 0 && k.loops.size() == 4 && !ins.summation_labels.empty()) {
      const int q = k.t2_factor;
      order_loops(k, [q](const Loop& l) { return l.stride[q]; });
      FusedGroup& g = streams[k.buffer[q]];
      g.key = k.buffer[q];
      g.kernels.push_back(std::move(k));
    } else {
      order_loops(k, [](const Loop& l) { return l.out_stride != 0 ? l.out_stride : max_factor_stride(l); });
      compiled_->kernels.push_back(std::move(k));
    }
  }
  for (auto& [block, g] : rows) {
    compiled_->assigned[static_cast<std::size_t>(block)] = true;
    // Pull out the elementwise scalings of the block's own amplitudes.
    std::vector<Kernel> rest;
    int amp_buffer = -1;
    for (auto& k : g.kernels) {
      int vec = -1;
      int amp = -1;
      for (int q = 0; q < k.n_factors; ++q) {
        if (k.buffer[q] < kT1Buffer) vec = q;
        else amp = q;
      }
      bool mirrors = k.n_factors == 2 && vec >= 0 && amp >= 0 && k.offset[amp] == 0 &&
                     (amp_buffer < 0 || k.buffer[amp] == amp_buffer);
      int level = -1;
      for (std::size_t lv = 0; mirrors && lv < k.loops.size(); ++lv) {
        const Loop& l = k.loops[lv];
        if (l.stride[amp] != l.out_stride) mirrors = false;
        if (l.stride[vec] != 0) {
          if (level >= 0) mirrors = false;
          level = static_cast<int>(lv);
        }
      }
      if (mirrors && level >= 0) {
        amp_buffer = k.buffer[amp];
        g.scaled.push_back({std::move(k), vec, amp, level});
      } else {
        rest.push_back(std::move(k));
      }
    }
    g.kernels = std::move(rest);
    compiled_->groups.push_back(std::move(g));
  }
  for (auto& [buffer, g] : streams) compiled_->groups.push_back(std::move(g));
  for (auto& g : compiled_->groups) {
    g.depth = g.kernels.empty() ? g.scaled.front().kernel.loops.size() : g.kernels.front().loops.size();
    for (auto& k : g.kernels) k.collapse = collapsible(k, n);
  }
}

Evaluator::~Evaluator() = default;
Evaluator::Evaluator(Evaluator&&) noexcept = default;
Evaluator& Evaluator::operator=(Evaluator&&) noexcept = default;

void Evaluator::evaluate(const SuperHamiltonian& sh, const ClusterAmplitudes& amplitudes, ClusterAmplitudes& residuals,
                         Complex scale) const {
  const int n = program_.n_orbitals;
  const bool doubles = program_.truncation == Truncation::singles_doubles;
  if (sh.n_orbitals != n || static_cast<int>(sh.interaction.size()) != program_.interaction_terms)
    throw std::invalid_argument("evaluate: super-Hamiltonian does not match the program");
  if (amplitudes.n_orbitals() != n || (doubles && !amplitudes.has_doubles()) ||
      (amplitudes.has_doubles() && amplitudes.t2[0].dimension(0) != n))
    throw std::invalid_argument("evaluate: amplitude dimensions do not match the program");

  if (residuals.n_orbitals() != n || residuals.has_doubles() != doubles)
    residuals = ClusterAmplitudes::zero(n, doubles);
  residuals.time = amplitudes.time;

  // One-body views.
  std::array<std::vector<Complex>, kBufferCount> store;
  std::array<const Complex*, kBufferCount> buffers{};
  for (Spin s : kSpins) {
    const int si = spin_index(s);
    const CMatrix ht = sh.h_tilde(s);
    const std::pair<OperandSource, const CMatrix*> mats[3] = {
        {OperandSource::h, &sh.h[si]}, {OperandSource::h_tilde, &ht}, {OperandSource::pairing, &sh.pairing[si]}};
    for (const auto& [src, m] : mats) {
      auto& full = store[one_body_buffer(src, OperandView::full, s)];
      full.assign(m->data(), m->data() + m->size());
      auto& diag = store[one_body_buffer(src, OperandView::diag, s)];
      auto& row = store[one_body_buffer(src, OperandView::row0, s)];
      auto& col = store[one_body_buffer(src, OperandView::col0, s)];
      diag.resize(n);
      row.assign(n, Complex{});
      col.assign(n, Complex{});
      for (int a = 0; a < n; ++a) diag[a] = (*m)(a, a);
      for (int a = 1; a < n; ++a) {
        row[a] = (*m)(0, a);
        col[a] = (*m)(a, 0);
      }
    }
  }
  for (int b = 0; b < kT1Buffer; ++b) buffers[b] = store[b].data();
  for (int s = 0; s < 2; ++s) buffers[kT1Buffer + s] = amplitudes.t1[s].data();
  for (int b = 0; b < 3; ++b) buffers[kT2Buffer + b] = amplitudes.has_doubles() ? amplitudes.t2[b].data() : nullptr;

  std::array<Complex*, 5> outputs{residuals.t1[0].data(), residuals.t1[1].data(), nullptr, nullptr, nullptr};
  if (doubles)
    for (int b = 0; b < 3; ++b) outputs[2 + b] = residuals.t2[b].data();
  for (int b = 0; b < 5; ++b) {
    if (compiled_->assigned[static_cast<std::size_t>(b)] || outputs[static_cast<std::size_t>(b)] == nullptr) continue;
    const long size = b < 2 ? static_cast<long>(n) * n : static_cast<long>(n) * n * n * n;
    std::fill(outputs[static_cast<std::size_t>(b)], outputs[static_cast<std::size_t>(b)] + size, Complex{});
  }

  auto bind = [&](const Kernel& k) {
    Bound b;
    b.pref = scale * k.prefactor;
    for (int term : k.interaction) b.pref *= sh.interaction[term].coeff;
    for (int q = 0; q < k.n_factors; ++q) {
      if (buffers[k.buffer[q]] == nullptr) throw std::invalid_argument("evaluate: missing doubles amplitudes");
      b.f[q] = buffers[k.buffer[q]] + k.offset[q];
    }
    b.out = outputs[static_cast<std::size_t>(k.output)] + k.out_offset;
    return b;
  };

  std::vector<Complex> w;
  std::vector<Bound> bound;
  std::vector<Bound> scaled;
  for (const auto& g : compiled_->groups) {
    bound.clear();
    scaled.clear();
    for (const auto& k : g.kernels) bound.push_back(bind(k));
    for (const auto& s : g.scaled) scaled.push_back(bind(s.kernel));
    run_group(g, bound, scaled, n, w);
  }
  for (const auto& k : compiled_->kernels) {
    const Bound b = bind(k);
    switch (k.n_factors) {
      case 0: run_kernel<0>(k, b.out, b.f, b.pref, n); break;
      case 1: run_kernel<1>(k, b.out, b.f, b.pref, n); break;
      case 2: run_kernel<2>(k, b.out, b.f, b.pref, n); break;
      case 3: run_kernel<3>(k, b.out, b.f, b.pref, n); break;
      default: run_kernel<4>(k, b.out, b.f, b.pref, n); break;
    }
  }

}

ClusterAmplitudes evaluate(const ContractionProgram& program, const SuperHamiltonian& sh,
                           const ClusterAmplitudes& amplitudes) {
  ClusterAmplitudes r;
  Evaluator(program).evaluate(sh, amplitudes, r);
  return r;
}

}  // namespace thermocc
