#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "idnmf/divergence.hpp"
#include "idnmf/matrix.hpp"

namespace idnmf {

enum class InitStrategy { uniform_random, provided };

enum class StopReason { tol_reached, max_iters, stationary };

std::string_view to_string(InitStrategy s) noexcept;
std::string_view to_string(StopReason s) noexcept;

/// Residual below which an iterate is treated as a fixed point of the update.
inline constexpr double kStationaryThreshold = 1e-12;

struct SolverConfig {
  std::size_t rank = 1;
  std::size_t max_iters = 1000;
  /// Stop once |D_n - D_{n+1}| <= rel_tol * max(D_n, 1).
  double rel_tol = 1e-9;
  std::uint64_t seed = 0;
  InitStrategy init_strategy = InitStrategy::uniform_random;
  /// Lower bound of the uniform draw for initial entries, in (0, 1].
  double min_init = 0.1;
  std::size_t restarts = 1;
  /// Worker threads used to dispatch restarts. Results do not depend on it.
  std::size_t threads = 1;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

/// @throws UsageError when the configuration is invalid for an m x n problem.
void validate(const SolverConfig& cfg, std::size_t m, std::size_t n);

/// Lifted-space diagnostics attached to a trace entry by an oracle observer.
struct OracleRecord {
  double gain_p = 0.0;               ///< D(P_n || P_{n+1})
  double gain_q = 0.0;               ///< D(Q_{n+1} || Q_n)
  double gain_residual = 0.0;        ///< D_n - D_{n+1} - gain_p - gain_q
  double lifted_gap = 0.0;           ///< max |lifted iterate - matrix iterate|
  double pythagorean_q_residual = 0.0;
  double pythagorean_p_residual = 0.0;
};

struct TraceEntry {
  std::size_t iter = 0;  ///< 1-based; describes the iterate after this step
  double divergence = 0.0;
  double objective = 0.0;
  /// Stationarity residual of the iterate the step started from, i.e. the
  /// max-norm displacement produced by the step.
  double residual = 0.0;
  double seconds = 0.0;
  std::optional<OracleRecord> oracle;
};

using ConvergenceTrace = std::vector<TraceEntry>;

struct FactorizationResult {
  FactorPair factors;
  ConvergenceTrace trace;
  std::size_t iterations_run = 0;
  StopReason stop_reason = StopReason::max_iters;
  DivergenceValue final_divergence;
  /// Seed that produced the returned factors (relevant with restarts).
  std::uint64_t seed = 0;
};

/// Everything an observer may look at for one update step.
struct StepView {
  const DataMatrix& data;
  const FactorPair& before;
  const FactorPair& after;
  DivergenceValue divergence_before;
  DivergenceValue divergence_after;
};

/// Called after every step. Observers may only fill `entry.oracle`; they
/// never influence the iterates.
using StepObserver = std::function<void(const StepView&, TraceEntry& entry)>;

/**
 * Random strictly positive starting point.
 *
 * W and H entries are uniform on [min_init, 1]; each row of H is normalized to
 * sum to 1. Deterministic for a given seed.
 */
FactorPair init_factors(std::size_t m, std::size_t n, const SolverConfig& cfg);

/// As above, with every column of W rescaled to sum to total_mass(V) / k.
FactorPair init_factors(const DataMatrix& v, const SolverConfig& cfg);

/**
 * One multiplicative update of (W, H), both halves computed from the same
 * input pair:
 *
 *   W'_il = sum_j V_ij W_il H_lj / (WH)_ij
 *   H'_lj = sum_i V_ij W_il H_lj / (WH)_ij  /  sum_ij V_ij W_il H_lj / (WH)_ij
 *
 * Cells with V_ij = 0 contribute nothing.
 *
 * @throws SingularityError if V_ij > 0 and (WH)_ij = 0.
 * @throws DegenerateError if a latent component receives zero mass.
 */
FactorPair update_step(const DataMatrix& v, const FactorPair& f);

/// Rescales (W, H) to (W h, h^{-1} H) with h_l the row sums of H.
/// @throws DegenerateError if H has a zero row.
FactorPair normalize_row_stochastic(const Matrix& w, const Matrix& h);

/// Orders the latent components by descending W column sum, ties broken by
/// descending lexicographic order of the W column.
FactorPair canonicalize(const FactorPair& f);

/// max-norm of (W, H) - update_step(V, (W, H)); zero exactly at fixed points.
double stationarity_residual(const DataMatrix& v, const FactorPair& f);

/**
 * Alternating-minimization solve.
 *
 * Iterates update_step until the divergence change falls below rel_tol, the
 * step displacement falls below kStationaryThreshold, or max_iters is hit.
 * With restarts > 1 the restarts are independently seeded and the one with the
 * smallest final divergence wins (ties go to the lower restart index).
 *
 * @throws UsageError for invalid configuration, SingularityError and
 * DegenerateError as update_step.
 */
FactorizationResult run(const DataMatrix& v, const SolverConfig& cfg,
                        const std::optional<FactorPair>& initial = std::nullopt,
                        const StepObserver& observer = {});

/// Seed used by restart `index` of a run configured with `seed`.
std::uint64_t restart_seed(std::uint64_t seed, std::size_t index) noexcept;

}  // namespace idnmf
