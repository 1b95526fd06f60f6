#include "thermocc/operators.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace thermocc {

int OperatorTerm::creation_count() const {
  return static_cast<int>(std::count_if(symbols.begin(), symbols.end(),
                                        [](const OperatorSymbol& s) { return s.creation; }));
}

int OperatorTerm::annihilation_count() const {
  return static_cast<int>(symbols.size()) - creation_count();
}

OperatorTerm tilde_conjugate(const OperatorTerm& term) {
  OperatorTerm out{std::conj(term.coeff), term.symbols};
  for (auto& s : out.symbols) {
    if (s.tilde) out.coeff = -out.coeff;
    s.tilde = !s.tilde;
  }
  return out;
}

bool is_normal_ordered(const OperatorTerm& term) {
  bool seen_annihilator = false;
  for (const auto& s : term.symbols) {
    if (!s.creation) seen_annihilator = true;
    else if (seen_annihilator) return false;
  }
  return true;
}

std::string to_string(const OperatorSymbol& s) {
  std::ostringstream os;
  os << (s.tilde ? "bt" : "b") << (s.creation ? "+" : "") << '_';
  if (s.index.is_label) os << 'x' << s.index.value;
  else os << s.index.value;
  os << spin_char(s.spin);
  return os.str();
}

std::string to_string(const OperatorTerm& t) {
  std::ostringstream os;
  os << '(' << t.coeff.real() << (t.coeff.imag() < 0 ? "" : "+") << t.coeff.imag() << "i)";
  for (const auto& s : t.symbols) os << ' ' << to_string(s);
  return os.str();
}

namespace {

auto mode_key(const OperatorSymbol& s) { return std::tuple(s.tilde, s.spin, s.index); }

// Insertion sort of [first, last) by mode key; returns the permutation sign
// or 0 when a mode repeats (Pauli exclusion).
int sort_segment(std::vector<OperatorSymbol>& v, std::size_t first, std::size_t last) {
  int sign = 1;
  for (std::size_t i = first + 1; i < last; ++i) {
    std::size_t j = i;
    while (j > first && mode_key(v[j]) < mode_key(v[j - 1])) {
      std::swap(v[j], v[j - 1]);
      sign = -sign;
      --j;
    }
  }
  for (std::size_t i = first + 1; i < last; ++i)
    if (mode_key(v[i]) == mode_key(v[i - 1])) return 0;
  return sign;
}

void require_concrete(const OperatorTerm& t) {
  for (const auto& s : t.symbols)
    if (s.index.is_label) throw std::invalid_argument("normal ordering requires concrete indices");
}

}  // namespace

OperatorTerm canonicalize(const OperatorTerm& term) {
  OperatorTerm out = term;
  const auto n_create = static_cast<std::size_t>(out.creation_count());
  const int s1 = sort_segment(out.symbols, 0, n_create);
  const int s2 = sort_segment(out.symbols, n_create, out.symbols.size());
  out.coeff *= static_cast<double>(s1 * s2);
  return out;
}

std::vector<OperatorTerm> normal_order(const OperatorTerm& term) {
  require_concrete(term);
  std::vector<OperatorTerm> done;
  std::vector<OperatorTerm> stack{term};
  while (!stack.empty()) {
    OperatorTerm cur = std::move(stack.back());
    stack.pop_back();
    if (cur.coeff == Complex{}) continue;
    std::size_t k = 0;
    bool found = false;
    for (; k + 1 < cur.symbols.size(); ++k) {
      if (!cur.symbols[k].creation && cur.symbols[k + 1].creation) {
        found = true;
        break;
      }
    }
    if (!found) {
      OperatorTerm c = canonicalize(cur);
      if (c.coeff != Complex{}) done.push_back(std::move(c));
      continue;
    }
    if (cur.symbols[k].same_mode(cur.symbols[k + 1])) {
      OperatorTerm contracted{cur.coeff, {}};
      contracted.symbols.reserve(cur.symbols.size() - 2);
      for (std::size_t m = 0; m < cur.symbols.size(); ++m)
        if (m != k && m != k + 1) contracted.symbols.push_back(cur.symbols[m]);
      stack.push_back(std::move(contracted));
    }
    std::swap(cur.symbols[k], cur.symbols[k + 1]);
    cur.coeff = -cur.coeff;
    stack.push_back(std::move(cur));
  }
  return done;
}

void OperatorSum::add(const OperatorTerm& term) {
  for (auto& t : normal_order(term)) terms_[t.symbols] += t.coeff;
}

void OperatorSum::add(const OperatorSum& other, Complex scale) {
  for (const auto& [k, c] : other.terms_) terms_[k] += scale * c;
}

std::vector<OperatorTerm> OperatorSum::terms(double tol) const {
  std::vector<OperatorTerm> out;
  for (const auto& [k, c] : terms_)
    if (std::abs(c) > tol) out.push_back({c, k});
  return out;
}

Complex OperatorSum::coefficient(const std::vector<OperatorSymbol>& canonical_symbols) const {
  auto it = terms_.find(canonical_symbols);
  return it == terms_.end() ? Complex{} : it->second;
}

BareTerm tilde_conjugate(const BareTerm& term) {
  BareTerm out{std::conj(term.coeff), term.ops};
  for (auto& op : out.ops) {
    if (op.tilde) out.coeff = -out.coeff;
    op.tilde = !op.tilde;
  }
  return out;
}

OperatorSum to_quasiparticles(const std::vector<BareTerm>& terms, const Occupations& occ) {
  OperatorSum sum;
  for (const auto& bare : terms) {
    // Each bare operator is a two-term combination of quasi-particle symbols.
    std::vector<std::array<std::pair<Complex, OperatorSymbol>, 2>> expansion;
    expansion.reserve(bare.ops.size());
    for (const auto& op : bare.ops) {
      const double v = occ.v_of(op.spin, op.orbital);
      const double u = 1.0 - v;
      const Index idx = Index::orbital(op.orbital);
      if (op.creation && !op.tilde)
        expansion.push_back({{{u, create(false, op.spin, idx)}, {1.0, annihilate(true, op.spin, idx)}}});
      else if (!op.creation && !op.tilde)
        expansion.push_back({{{1.0, annihilate(false, op.spin, idx)}, {v, create(true, op.spin, idx)}}});
      else if (op.creation && op.tilde)
        expansion.push_back({{{u, create(true, op.spin, idx)}, {-1.0, annihilate(false, op.spin, idx)}}});
      else
        expansion.push_back({{{1.0, annihilate(true, op.spin, idx)}, {-v, create(false, op.spin, idx)}}});
    }
    const std::size_t n = expansion.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      OperatorTerm t{bare.coeff, {}};
      t.symbols.reserve(n);
      for (std::size_t m = 0; m < n; ++m) {
        const auto& [c, sym] = expansion[m][(mask >> m) & 1U];
        t.coeff *= c;
        t.symbols.push_back(sym);
      }
      if (t.coeff != Complex{}) sum.add(t);
    }
  }
  return sum;
}

}  // namespace thermocc
