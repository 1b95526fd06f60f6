#pragma once

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "thermocc/amplitudes.hpp"
#include "thermocc/operators.hpp"
#include "thermocc/super_hamiltonian.hpp"

namespace thermocc {

// ---------------------------------------------------------------------------
// Vacuum expectation values

/// One complete pairing of an operator string. Each pair holds the positions
/// of an annihilator and of the creator it is contracted with.
struct Pairing {
  int sign = 1;
  std::vector<std::pair<int, int>> pairs;
};

/// All complete pairings contributing to <0| symbols |0>. Contractions exist
/// only between an annihilator and a later creator of the same mode type;
/// two concrete indices must agree, labels stay free (each pair then implies
/// a Kronecker delta between the two slots).
std::vector<Pairing> wick_pairings(const std::vector<OperatorSymbol>& symbols);

/// <0| symbols |0> for a string of concrete indices.
double wick_vacuum_expectation(const std::vector<OperatorSymbol>& symbols);

// ---------------------------------------------------------------------------
// Contraction program

enum class Truncation { singles, singles_doubles };

/// Storage view used for the one-body operands. `arrowhead` splits h into its
/// diagonal, impurity row and impurity column, which keeps h t2 at O(n^4).
enum class OneBodyLayout { dense, arrowhead };

enum class ResidualBlock : int { r1_alpha = 0, r1_beta = 1, r2_aa = 2, r2_bb = 3, r2_ab = 4 };

inline constexpr ResidualBlock kResidualBlocks[5] = {ResidualBlock::r1_alpha, ResidualBlock::r1_beta,
                                                     ResidualBlock::r2_aa, ResidualBlock::r2_bb,
                                                     ResidualBlock::r2_ab};

constexpr int residual_rank(ResidualBlock b) { return b == ResidualBlock::r1_alpha || b == ResidualBlock::r1_beta ? 2 : 4; }

enum class OperandSource : int { h, h_tilde, pairing, interaction, t1, t2 };
enum class OperandView : int { full, diag, row0, col0 };

/// Tensor factor of an instruction. For one-body sources `spin` selects the
/// block; `row0`/`col0` hold h(0,a)/h(a,0) with the a = 0 entry zeroed.
/// `slot` is the t2 block or the interaction term number.
struct Operand {
  OperandSource source = OperandSource::h;
  OperandView view = OperandView::full;
  Spin spin = Spin::alpha;
  int slot = 0;
  std::vector<Index> indices;

  auto operator<=>(const Operand&) const = default;
};

/// output[output_indices] += prefactor * prod(operands), summed over the
/// summation labels. Output labels 0..rank-1 are the free residual indices
/// (i,j) or (i,k,j,l); labels >= 4 are summed.
struct ContractionInstruction {
  ResidualBlock output = ResidualBlock::r1_alpha;
  std::vector<Index> output_indices;
  Complex prefactor{1.0, 0.0};
  std::vector<Operand> operands;
  std::vector<int> summation_labels;

  /// Largest number of T vertices in the product.
  int t_power() const;
};

struct ContractionProgram {
  std::vector<ContractionInstruction> instructions;
  Truncation truncation = Truncation::singles;
  OneBodyLayout layout = OneBodyLayout::dense;
  int n_orbitals = 0;
  int interaction_terms = 0;
  /// Highest power of T retained anywhere in the expansion.
  int bch_order = 0;

  std::vector<const ContractionInstruction*> block(ResidualBlock b) const;
};

/// True when h(p,q) = 0 for all p, q > 0 with p != q (site-basis SIAM).
bool is_arrowhead(const CMatrix& m, double tol = 0.0);

/// Projects <0| P (H' e^T)_c |0> onto every residual block. Only connected
/// pairings are kept: each T vertex contracts at least once with H'.
ContractionProgram generate_eom(const SuperHamiltonian& sh, Truncation truncation,
                                OneBodyLayout layout = OneBodyLayout::dense);

/// Plain-text equation listing, one instruction per line.
std::string dump_program(const ContractionProgram& program);
std::string to_string(const ContractionInstruction& instruction);

/// Residual evaluation. Precompiles loop nests for one program; reuse it
/// across time steps. Instructions run in program order, each a plain nested
/// loop, so the floating-point reduction order is fixed.
class Evaluator {
 public:
  explicit Evaluator(ContractionProgram program);
  ~Evaluator();
  Evaluator(Evaluator&&) noexcept;
  Evaluator& operator=(Evaluator&&) noexcept;

  const ContractionProgram& program() const { return program_; }

  /// Writes scale * R (R1 and R2, with dt/dt = -i R) into `residuals`.
  void evaluate(const SuperHamiltonian& sh, const ClusterAmplitudes& amplitudes, ClusterAmplitudes& residuals,
                Complex scale = 1.0) const;

 private:
  struct Compiled;
  ContractionProgram program_;
  std::unique_ptr<Compiled> compiled_;
};

ClusterAmplitudes evaluate(const ContractionProgram& program, const SuperHamiltonian& sh,
                           const ClusterAmplitudes& amplitudes);

}  // namespace thermocc
