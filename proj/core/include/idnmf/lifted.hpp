#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "idnmf/divergence.hpp"
#include "idnmf/factorizer.hpp"
#include "idnmf/matrix.hpp"

/// Three-index lifted formulation of I-divergence NMF.
///
/// A tensor T(i, l, j) over data rows i, latent components l and data columns
/// j. The set of tensors whose l-marginal equals the data matrix P and the set
/// of product tensors Q_-(i, l) Q_+(l, j) with Q_+ row stochastic are connected
/// by two closed-form I-divergence projections; alternating them reproduces the
/// multiplicative update exactly. Everything here materializes dense tensors
/// and exists to verify the matrix-level solver, not to replace it.
namespace idnmf::lifted {

/// Nonnegative dense m x k x n tensor, stored with j fastest.
class Tensor3 {
 public:
  static constexpr std::size_t kDefaultMaxElements = 1'000'000;

  /// Zero tensor. @throws UsageError if any extent is 0 or m*k*n > max_elements.
  Tensor3(std::size_t m, std::size_t k, std::size_t n,
          std::size_t max_elements = kDefaultMaxElements);

  /// @throws UsageError on size problems, DomainError on negative/non-finite entries.
  Tensor3(std::size_t m, std::size_t k, std::size_t n, std::vector<double> values,
          std::size_t max_elements = kDefaultMaxElements);

  std::size_t rows() const noexcept { return m_; }
  std::size_t latent() const noexcept { return k_; }
  std::size_t cols() const noexcept { return n_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator()(std::size_t i, std::size_t l, std::size_t j) const noexcept {
    return values_[(i * k_ + l) * n_ + j];
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t m_;
  std::size_t k_;
  std::size_t n_;
  std::vector<double> values_;
};

/// Element of the product set: Q(i, l, j) = Q_-(i, l) Q_+(l, j), Q_+ row stochastic.
///
/// Unlike FactorPair there is no k <= min(m, n) restriction.
class LiftedQ {
 public:
  /// @throws UsageError on shape mismatch, DomainError on negative entries or
  /// a Q_+ row that does not sum to 1 within 1e-12.
  LiftedQ(Matrix q_minus, Matrix q_plus);

  static LiftedQ from_factors(const FactorPair& f) { return LiftedQ(f.w(), f.h()); }
  FactorPair to_factors() const { return FactorPair(q_minus_, q_plus_); }

  const Matrix& q_minus() const noexcept { return q_minus_; }
  const Matrix& q_plus() const noexcept { return q_plus_; }

  /// The induced tensor Q_-(i, l) Q_+(l, j).
  Tensor3 tensor(std::size_t max_elements = Tensor3::kDefaultMaxElements) const;
  /// sum_l Q_-(i, l) Q_+(l, j), same accumulation order as wh_product.
  Matrix marginal() const;

 private:
  Matrix q_minus_;
  Matrix q_plus_;
};

DivergenceValue tensor_divergence(const Tensor3& a, const Tensor3& b);

/// M(i, j) = sum_l A(i, l, j). May be all zero.
Matrix marginal_matrix(const Tensor3& a);

/// As marginal_matrix, validated as a DataMatrix.
/// @throws DomainError if the marginal is identically zero.
DataMatrix marginal(const Tensor3& a);

/**
 * Projection onto tensors with marginal P:
 *   P*(i, l, j) = Q(i, l, j) P(i, j) / Q(i, j),  Q(i, j) = sum_l Q(i, l, j).
 * Cells with P(i, j) = 0 are zero.
 *
 * @throws SingularityError if P(i, j) > 0 and Q(i, j) = 0.
 */
Tensor3 project_to_P(const DataMatrix& p, const LiftedQ& q);

/**
 * Projection onto product tensors:
 *   Q_-(i, l) = sum_j T(i, l, j),  Q_+(l, j) = sum_i T(i, l, j) / sum_ij T(i, l, j).
 *
 * @throws DegenerateError if some latent index carries zero mass.
 */
LiftedQ project_to_Q(const Tensor3& t);

/// D(T || Q) - D(T || Q*) - D(Q* || Q) with Q* = project_to_Q(T);
/// std::nullopt when a divergence involved is infinite.
std::optional<double> pythagorean_q_residual(const Tensor3& t, const LiftedQ& q);

/// D(T || Q) - D(T || P*) - D(P || marginal(Q)) with P* = project_to_P(P, Q);
/// std::nullopt when a divergence involved is infinite.
/// @throws PreconditionError unless marginal(T) = P within 1e-10 (scaled by max(1, P_ij)).
std::optional<double> pythagorean_p_residual(const Tensor3& t, const DataMatrix& p,
                                             const LiftedQ& q);

struct Lemma1Report {
  /// Present iff the product tensor of the factors has marginal V; it then lies
  /// in both lifted sets.
  std::optional<Tensor3> witness;
  /// max_ij |(WH)_ij - V_ij|.
  double marginal_gap = 0.0;

  bool certified() const noexcept { return witness.has_value(); }
};

/// Certifies V = W H through the lifted intersection. The gap tolerance is
/// 1e-10 * max(1, max_ij V_ij).
/// @throws UsageError on shape mismatch.
Lemma1Report lemma1_witness(const DataMatrix& v, const FactorPair& f);

struct ConditionalDecomposition {
  double lhs = 0.0;        ///< D(P^{U,V} || Q^{U,V})
  double term_cond = 0.0;  ///< E_P D(P^{U|V} || Q^{U|V})
  double term_marg = 0.0;  ///< D(P^V || Q^V)

  double residual() const noexcept { return lhs - term_cond - term_marg; }
};

/**
 * Chain rule for the divergence between two joint laws of (U, V); rows index
 * U, columns index V.
 *
 * @throws PreconditionError unless both joints are nonnegative, sum to 1
 * within 1e-12, and qj > 0 wherever pj > 0.
 */
ConditionalDecomposition conditional_divergence_decomposition(const Matrix& pj, const Matrix& qj);

/// One cycle of alternating projections: project_to_Q(project_to_P(P, Q)).
LiftedQ lifted_iteration(const DataMatrix& p, const LiftedQ& q);

struct DoubleMinimizationOptions {
  std::size_t rank = 1;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 2000;
  double rel_tol = 1e-13;
};

struct DoubleMinimizationTrial {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double lifted_divergence = 0.0;  ///< D(P_n || Q_n) at the last iterate
  double matrix_divergence = 0.0;  ///< D(P || Q_n) at the last iterate
  double max_identity_gap = 0.0;   ///< max over iterations of the two's difference
};

struct DoubleMinimizationReport {
  std::vector<DoubleMinimizationTrial> trials;
  double min_lifted = 0.0;
  double min_matrix = 0.0;
  double max_identity_gap = 0.0;
  /// Every trial's final lifted and matrix divergences agree within 1e-8.
  bool agree = false;
};

/// Runs the lifted alternating scheme from independently seeded starts and
/// compares the lifted and matrix objectives along the way.
/// @throws UsageError when m * rank * n > 512 or the options are invalid.
DoubleMinimizationReport double_minimization_check(const DataMatrix& p,
                                                   const DoubleMinimizationOptions& options);

/// Observer for idnmf::run that recomputes each step in the lifted space and
/// records the gain terms, the lifted/matrix gap and both Pythagorean
/// residuals. Stateless, so safe to share across restart threads.
StepObserver oracle_observer();

}  // namespace idnmf::lifted
