#include <doctest.h>

#include "thermocc/operators.hpp"

using namespace thermocc;

namespace {

const Index i0 = Index::orbital(0);
const Index i1 = Index::orbital(1);
const Index i2 = Index::orbital(2);

bool same_term(const OperatorTerm& a, const OperatorTerm& b) {
  return a.symbols == b.symbols && std::abs(a.coeff - b.coeff) < 1e-15;
}

Occupations flat_occupations(int n, double va, double vb) {
  Occupations occ;
  occ.v[0] = RVector::Constant(n, va);
  occ.v[1] = RVector::Constant(n, vb);
  return occ;
}

}  // namespace

TEST_CASE("tilde conjugation flips tilde flags and conjugates") {
  const Complex c{0.3, -0.7};
  const OperatorTerm t{c, {create(false, Spin::alpha, i0), create(true, Spin::alpha, i1)}};
  const OperatorTerm tc = tilde_conjugate(t);
  REQUIRE(tc.symbols.size() == 2);
  CHECK(tc.symbols[0] == create(true, Spin::alpha, i0));
  CHECK(tc.symbols[1] == create(false, Spin::alpha, i1));
  // The second symbol was already a tilde symbol: b~~ = -b.
  CHECK(tc.coeff == -std::conj(c));
}

TEST_CASE("tilde conjugation of a number-like term") {
  const OperatorTerm t{2.5, {create(false, Spin::beta, i1), annihilate(false, Spin::beta, i1)}};
  const OperatorTerm tc = tilde_conjugate(t);
  CHECK(tc.coeff == Complex{2.5, 0.0});
  CHECK(tc.symbols[0] == create(true, Spin::beta, i1));
  CHECK(tc.symbols[1] == annihilate(true, Spin::beta, i1));
}

TEST_CASE("tilde conjugation is an involution on even monomials") {
  const std::vector<OperatorTerm> terms{
      {Complex{0.1, 0.2}, {create(false, Spin::alpha, i0), create(true, Spin::alpha, i1)}},
      {Complex{-1.0, 0.5}, {create(true, Spin::beta, i2), annihilate(true, Spin::beta, i0)}},
      {Complex{0.0, 3.0},
       {create(false, Spin::alpha, i0), create(true, Spin::beta, i0), annihilate(false, Spin::beta, i0),
        annihilate(true, Spin::alpha, i0)}},
  };
  for (const auto& t : terms) CHECK(same_term(tilde_conjugate(tilde_conjugate(t)), t));
}

TEST_CASE("a real tilde-symmetric combination is a fixed point") {
  OperatorSum sum;
  const OperatorTerm t{1.0, {create(false, Spin::alpha, i0), annihilate(false, Spin::alpha, i0)}};
  sum.add(t);
  sum.add(tilde_conjugate(t));
  OperatorSum conj;
  for (const auto& term : sum.terms()) conj.add(tilde_conjugate(term));
  const auto a = sum.terms();
  const auto b = conj.terms();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(same_term(a[k], b[k]));
}

TEST_CASE("normal ordering applies the canonical anticommutator") {
  const OperatorTerm t{1.0, {annihilate(false, Spin::alpha, i1), create(false, Spin::alpha, i1)}};
  OperatorSum sum;
  sum.add(t);
  const auto terms = sum.terms();
  REQUIRE(terms.size() == 2);
  CHECK(sum.coefficient({}) == Complex{1.0, 0.0});
  CHECK(sum.coefficient({create(false, Spin::alpha, i1), annihilate(false, Spin::alpha, i1)}) ==
        Complex{-1.0, 0.0});
}

TEST_CASE("different modes anticommute without contraction") {
  OperatorSum sum;
  sum.add({1.0, {annihilate(false, Spin::alpha, i1), create(true, Spin::alpha, i1)}});
  const auto terms = sum.terms();
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].coeff == Complex{-1.0, 0.0});
  CHECK(is_normal_ordered(terms[0]));
}

TEST_CASE("canonical order carries permutation signs and Pauli zeros") {
  const OperatorTerm t{1.0, {create(true, Spin::alpha, i0), create(false, Spin::alpha, i1)}};
  const OperatorTerm c = canonicalize(t);
  CHECK(c.coeff == Complex{-1.0, 0.0});
  CHECK(c.symbols[0] == create(false, Spin::alpha, i1));

  const OperatorTerm pauli{1.0, {create(false, Spin::beta, i2), create(false, Spin::beta, i2)}};
  CHECK(canonicalize(pauli).coeff == Complex{});
  OperatorSum sum;
  sum.add(pauli);
  CHECK(sum.size() == 0);
}

TEST_CASE("normal ordering rejects free labels") {
  const OperatorTerm t{1.0, {annihilate(false, Spin::alpha, Index::label(4)), create(false, Spin::alpha, i0)}};
  CHECK_THROWS_AS(normal_order(t), std::invalid_argument);
}

TEST_CASE("number operator in quasi-particle form") {
  // a+a = v + u b+b + uv b+b~+ - b b~ - v b~+b~
  const double v = 0.3;
  const double u = 0.7;
  const Occupations occ = flat_occupations(1, v, v);
  const BareTerm num{1.0, {{true, false, Spin::alpha, 0}, {false, false, Spin::alpha, 0}}};
  const OperatorSum sum = to_quasiparticles({num}, occ);
  const Spin a = Spin::alpha;
  CHECK(sum.coefficient({}).real() == doctest::Approx(v));
  CHECK(sum.coefficient({create(false, a, i0), annihilate(false, a, i0)}).real() == doctest::Approx(u));
  CHECK(sum.coefficient({create(false, a, i0), create(true, a, i0)}).real() == doctest::Approx(u * v));
  CHECK(sum.coefficient({annihilate(false, a, i0), annihilate(true, a, i0)}).real() == doctest::Approx(-1.0));
  CHECK(sum.coefficient({create(true, a, i0), annihilate(true, a, i0)}).real() == doctest::Approx(-v));
  CHECK(sum.size() == 5);
}

TEST_CASE("transformation preserves canonical anticommutators") {
  // {a, a+} = 1 must survive the substitution for any v.
  for (double v : {0.0, 0.25, 0.5, 1.0}) {
    const Occupations occ = flat_occupations(2, v, v);
    for (bool tilde : {false, true}) {
      const BareOperator ann{false, tilde, Spin::beta, 1};
      const BareOperator cre{true, tilde, Spin::beta, 1};
      const OperatorSum s = to_quasiparticles({{1.0, {ann, cre}}, {1.0, {cre, ann}}}, occ);
      const auto terms = s.terms(1e-15);
      REQUIRE(terms.size() == 1);
      CHECK(terms[0].symbols.empty());
      CHECK(terms[0].coeff.real() == doctest::Approx(1.0));
    }
    const BareOperator a{false, false, Spin::alpha, 0};
    const BareOperator at{true, true, Spin::alpha, 0};
    const OperatorSum mixed = to_quasiparticles({{1.0, {a, at}}, {1.0, {at, a}}}, occ);
    CHECK(mixed.terms(1e-15).empty());
  }
}

TEST_CASE("bare tilde conjugation") {
  const BareTerm t{Complex{0.0, 1.0}, {{true, false, Spin::alpha, 0}, {false, true, Spin::alpha, 1}}};
  const BareTerm tc = tilde_conjugate(t);
  CHECK(tc.coeff == Complex{0.0, 1.0});  // conj(i) * (-1)
  CHECK(tc.ops[0].tilde);
  CHECK_FALSE(tc.ops[1].tilde);
}

TEST_CASE("symbol printing") {
  CHECK(to_string(create(true, Spin::beta, Index::orbital(3))) == "bt+_3b");
  CHECK(to_string(annihilate(false, Spin::alpha, Index::label(5))) == "b_x5a");
}
