#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "thermocc/model.hpp"
#include "thermocc/types.hpp"

namespace thermocc {

/// Orbital slot of an operator: either a concrete orbital (0 = impurity,
/// 1..N_b = bath) or a free summation label.
struct Index {
  int value = 0;
  bool is_label = false;

  static constexpr Index orbital(int i) { return {i, false}; }
  static constexpr Index label(int id) { return {id, true}; }

  auto operator<=>(const Index&) const = default;
};

/// Thermal quasi-particle symbol: b^dag, b, b~^dag or b~ with spin and slot.
struct OperatorSymbol {
  bool creation = false;
  bool tilde = false;
  Spin spin = Spin::alpha;
  Index index;

  auto operator<=>(const OperatorSymbol&) const = default;

  bool same_mode(const OperatorSymbol& o) const {
    return tilde == o.tilde && spin == o.spin && index == o.index;
  }
};

inline OperatorSymbol create(bool tilde, Spin s, Index i) { return {true, tilde, s, i}; }
inline OperatorSymbol annihilate(bool tilde, Spin s, Index i) { return {false, tilde, s, i}; }

struct OperatorTerm {
  Complex coeff{1.0, 0.0};
  std::vector<OperatorSymbol> symbols;

  int creation_count() const;
  int annihilation_count() const;
};

/// Anti-linear tilde conjugation in the quasi-particle alphabet. Follows the
/// fermionic double-tilde rule (b~~ = -b), so each symbol that is already a
/// tilde symbol contributes a factor -1.
OperatorTerm tilde_conjugate(const OperatorTerm& term);

/// All creation symbols to the left of all annihilation symbols.
bool is_normal_ordered(const OperatorTerm& term);

std::string to_string(const OperatorSymbol& s);
std::string to_string(const OperatorTerm& t);

/// Linear combination of normal-ordered, canonically sorted monomials with
/// concrete indices. Adding a term normal-orders it using the canonical
/// anticommutators {b_i, b^dag_j} = {b~_i, b~^dag_j} = delta_ij.
class OperatorSum {
 public:
  void add(const OperatorTerm& term);
  void add(const OperatorSum& other, Complex scale = 1.0);

  /// Terms with |coeff| > tol, in canonical order.
  std::vector<OperatorTerm> terms(double tol = 0.0) const;
  Complex coefficient(const std::vector<OperatorSymbol>& canonical_symbols) const;
  std::size_t size() const { return terms_.size(); }

 private:
  std::map<std::vector<OperatorSymbol>, Complex> terms_;
};

/// Normal ordering of a single monomial (concrete indices only).
std::vector<OperatorTerm> normal_order(const OperatorTerm& term);

/// Canonical form of an already normal-ordered monomial: creators and
/// annihilators each sorted by (tilde, spin, index). Returns sign in coeff, or
/// an empty optional-like zero coefficient when a symbol repeats.
OperatorTerm canonicalize(const OperatorTerm& term);

// Untransformed (physical a, a~) alphabet, used as the input side of the
// thermal Bogoliubov transformation.
struct BareOperator {
  bool creation = false;
  bool tilde = false;
  Spin spin = Spin::alpha;
  int orbital = 0;
};

struct BareTerm {
  Complex coeff{1.0, 0.0};
  std::vector<BareOperator> ops;
};

/// Tilde conjugate of a bare monomial (a -> a~, a~ -> -a for fermions).
BareTerm tilde_conjugate(const BareTerm& term);

/// Substitutes a^dag = u b^dag + b~, a = b + v b~^dag, a~^dag = u b~^dag - b,
/// a~ = b~ - v b^dag and normal-orders the result.
OperatorSum to_quasiparticles(const std::vector<BareTerm>& terms, const Occupations& occ);

}  // namespace thermocc
