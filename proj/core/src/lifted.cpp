#include "idnmf/lifted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "idnmf/errors.hpp"

namespace idnmf::lifted {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMarginalTolerance = 1e-10;
constexpr double kNormalizationTolerance = 1e-12;
constexpr std::size_t kDoubleMinimizationCap = 512;

std::size_t checked_size(std::size_t m, std::size_t k, std::size_t n, std::size_t cap) {
  if (m == 0 || k == 0 || n == 0) throw UsageError("tensor extents must be positive");
  if (m > cap / k || m * k > cap / n) {
    throw UsageError("tensor of " + std::to_string(m) + "x" + std::to_string(k) + "x" +
                     std::to_string(n) + " exceeds the element cap " + std::to_string(cap));
  }
  return m * k * n;
}

std::size_t idx(Eigen::Index i) { return static_cast<std::size_t>(i); }

}  // namespace

Tensor3::Tensor3(std::size_t m, std::size_t k, std::size_t n, std::size_t max_elements)
    : m_(m), k_(k), n_(n), values_(checked_size(m, k, n, max_elements), 0.0) {}

Tensor3::Tensor3(std::size_t m, std::size_t k, std::size_t n, std::vector<double> values,
                 std::size_t max_elements)
    : m_(m), k_(k), n_(n), values_(std::move(values)) {
  if (values_.size() != checked_size(m, k, n, max_elements)) {
    throw UsageError("tensor value count does not match its extents");
  }
  for (double x : values_) {
    if (!std::isfinite(x) || x < 0.0) throw DomainError("tensor entries must be finite and >= 0");
  }
}

LiftedQ::LiftedQ(Matrix q_minus, Matrix q_plus)
    : q_minus_(std::move(q_minus)), q_plus_(std::move(q_plus)) {
  if (q_minus_.cols() != q_plus_.rows() || q_minus_.cols() < 1 || q_minus_.rows() < 1 ||
      q_plus_.cols() < 1) {
    throw UsageError("Q_- and Q_+ shapes disagree");
  }
  require_nonnegative(q_minus_, "Q_-");
  require_nonnegative(q_plus_, "Q_+");
  for (Eigen::Index l = 0; l < q_plus_.rows(); ++l) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < q_plus_.cols(); ++j) s += q_plus_(l, j);
    if (std::abs(s - 1.0) > kStochasticTolerance) {
      throw DomainError("row " + std::to_string(l) + " of Q_+ is not stochastic");
    }
  }
}

Tensor3 LiftedQ::tensor(std::size_t max_elements) const {
  const auto m = idx(q_minus_.rows());
  const auto k = idx(q_minus_.cols());
  const auto n = idx(q_plus_.cols());
  std::vector<double> values(checked_size(m, k, n, max_elements));
  std::size_t pos = 0;
  for (Eigen::Index i = 0; i < q_minus_.rows(); ++i) {
    for (Eigen::Index l = 0; l < q_minus_.cols(); ++l) {
      for (Eigen::Index j = 0; j < q_plus_.cols(); ++j) values[pos++] = q_minus_(i, l) * q_plus_(l, j);
    }
  }
  return Tensor3(m, k, n, std::move(values), max_elements);
}

Matrix LiftedQ::marginal() const {
  Matrix out(q_minus_.rows(), q_plus_.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index l = 0; l < q_minus_.cols(); ++l) s += q_minus_(i, l) * q_plus_(l, j);
      out(i, j) = s;
    }
  }
  return out;
}

DivergenceValue tensor_divergence(const Tensor3& a, const Tensor3& b) {
  if (a.rows() != b.rows() || a.latent() != b.latent() || a.cols() != b.cols()) {
    throw UsageError("tensor_divergence: dimension mismatch");
  }
  const auto av = a.values();
  const auto bv = b.values();
  CompensatedSum sum;
  for (std::size_t t = 0; t < av.size(); ++t) {
    const double term = divergence_term(av[t], bv[t]);
    if (term == kInf) return DivergenceValue::infinity();
    sum.add(term);
  }
  return DivergenceValue(sum.value());
}

Matrix marginal_matrix(const Tensor3& a) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < a.latent(); ++l) s += a(i, l, j);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
    }
  }
  return out;
}

DataMatrix marginal(const Tensor3& a) { return DataMatrix(marginal_matrix(a)); }

Tensor3 project_to_P(const DataMatrix& p, const LiftedQ& q) {
  const Matrix& qm = q.q_minus();
  const Matrix& qp = q.q_plus();
  if (p.rows() != idx(qm.rows()) || p.cols() != idx(qp.cols())) {
    throw UsageError("project_to_P: data and lifted model shapes disagree");
  }
  const Matrix q_marg = q.marginal();
  const auto m = idx(qm.rows());
  const auto k = idx(qm.cols());
  const auto n = idx(qp.cols());
  std::vector<double> values(checked_size(m, k, n, Tensor3::kDefaultMaxElements), 0.0);
  for (Eigen::Index i = 0; i < qm.rows(); ++i) {
    for (Eigen::Index j = 0; j < qp.cols(); ++j) {
      const double target = p.values()(i, j);
      if (target == 0.0) continue;
      const double model = q_marg(i, j);
      if (model == 0.0) throw SingularityError(idx(i), idx(j));
      for (Eigen::Index l = 0; l < qm.cols(); ++l) {
        values[(idx(i) * k + idx(l)) * n + idx(j)] = target * (qm(i, l) * qp(l, j) / model);
      }
    }
  }
  return Tensor3(m, k, n, std::move(values));
}

LiftedQ project_to_Q(const Tensor3& t) {
  const auto m = static_cast<Eigen::Index>(t.rows());
  const auto k = static_cast<Eigen::Index>(t.latent());
  const auto n = static_cast<Eigen::Index>(t.cols());
  Matrix q_minus = Matrix::Zero(m, k);
  Matrix col_mass = Matrix::Zero(k, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index l = 0; l < k; ++l) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double x = t(idx(i), idx(l), idx(j));
        q_minus(i, l) += x;
        col_mass(l, j) += x;
      }
    }
  }
  Matrix q_plus(k, n);
  for (Eigen::Index l = 0; l < k; ++l) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) total += col_mass(l, j);
    if (!(total > 0.0)) throw DegenerateError("latent index has zero total mass", idx(l));
    for (Eigen::Index j = 0; j < n; ++j) q_plus(l, j) = col_mass(l, j) / total;
  }
  return LiftedQ(std::move(q_minus), std::move(q_plus));
}

std::optional<double> pythagorean_q_residual(const Tensor3& t, const LiftedQ& q) {
  const Tensor3 q_tensor = q.tensor();
  const DivergenceValue full = tensor_divergence(t, q_tensor);
  if (!full.is_finite()) return std::nullopt;
  LiftedQ q_star = project_to_Q(t);
  const Tensor3 star_tensor = q_star.tensor();
  const DivergenceValue to_star = tensor_divergence(t, star_tensor);
  const DivergenceValue star_to_q = tensor_divergence(star_tensor, q_tensor);
  if (!to_star.is_finite() || !star_to_q.is_finite()) return std::nullopt;
  return full.value() - to_star.value() - star_to_q.value();
}

std::optional<double> pythagorean_p_residual(const Tensor3& t, const DataMatrix& p,
                                             const LiftedQ& q) {
  const Matrix t_marg = marginal_matrix(t);
  if (idx(t_marg.rows()) != p.rows() || idx(t_marg.cols()) != p.cols()) {
    throw UsageError("pythagorean_p_residual: tensor and data shapes disagree");
  }
  for (Eigen::Index i = 0; i < t_marg.rows(); ++i) {
    for (Eigen::Index j = 0; j < t_marg.cols(); ++j) {
      const double target = p.values()(i, j);
      if (std::abs(t_marg(i, j) - target) > kMarginalTolerance * std::max(1.0, target)) {
        throw PreconditionError("tensor marginal differs from P at (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
      }
    }
  }
  const DivergenceValue data_term = i_divergence(p.values(), q.marginal());
  const DivergenceValue full = tensor_divergence(t, q.tensor());
  if (!data_term.is_finite() || !full.is_finite()) return std::nullopt;
  const DivergenceValue to_star = tensor_divergence(t, project_to_P(p, q));
  if (!to_star.is_finite()) return std::nullopt;
  return full.value() - to_star.value() - data_term.value();
}

Lemma1Report lemma1_witness(const DataMatrix& v, const FactorPair& f) {
  if (v.rows() != f.rows() || v.cols() != f.cols()) {
    throw UsageError("lemma1_witness: data and factor shapes disagree");
  }
  const LiftedQ q = LiftedQ::from_factors(f);
  const double gap = max_abs_diff(q.marginal(), v.values());
  const double scale = std::max(1.0, v.values().maxCoeff());
  Lemma1Report report;
  report.marginal_gap = gap;
  if (gap <= kMarginalTolerance * scale) report.witness = q.tensor();
  return report;
}

ConditionalDecomposition conditional_divergence_decomposition(const Matrix& pj, const Matrix& qj) {
  if (pj.rows() != qj.rows() || pj.cols() != qj.cols() || pj.size() == 0) {
    throw PreconditionError("joint laws must share a nonempty shape");
  }
  double p_total = 0.0;
  double q_total = 0.0;
  for (Eigen::Index i = 0; i < pj.rows(); ++i) {
    for (Eigen::Index j = 0; j < pj.cols(); ++j) {
      const double a = pj(i, j);
      const double b = qj(i, j);
      if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw PreconditionError("joint laws must be finite and nonnegative");
      }
      if (a > 0.0 && b == 0.0) {
        throw PreconditionError("Q joint vanishes where P joint is positive");
      }
      p_total += a;
      q_total += b;
    }
  }
  if (std::abs(p_total - 1.0) > kNormalizationTolerance ||
      std::abs(q_total - 1.0) > kNormalizationTolerance) {
    throw PreconditionError("joint laws must each sum to 1");
  }

  ConditionalDecomposition out;
  CompensatedSum lhs;
  CompensatedSum cond;
  CompensatedSum marg;
  for (Eigen::Index i = 0; i < pj.rows(); ++i) {
    for (Eigen::Index j = 0; j < pj.cols(); ++j) lhs.add(divergence_term(pj(i, j), qj(i, j)));
  }
  for (Eigen::Index j = 0; j < pj.cols(); ++j) {
    double pv = 0.0;
    double qv = 0.0;
    for (Eigen::Index i = 0; i < pj.rows(); ++i) {
      pv += pj(i, j);
      qv += qj(i, j);
    }
    marg.add(divergence_term(pv, qv));
    if (pv == 0.0) continue;
    CompensatedSum column;
    for (Eigen::Index i = 0; i < pj.rows(); ++i) {
      column.add(divergence_term(pj(i, j) / pv, qj(i, j) / qv));
    }
    cond.add(pv * column.value());
  }
  out.lhs = lhs.value();
  out.term_cond = cond.value();
  out.term_marg = marg.value();
  return out;
}

LiftedQ lifted_iteration(const DataMatrix& p, const LiftedQ& q) {
  return project_to_Q(project_to_P(p, q));
}

DoubleMinimizationReport double_minimization_check(const DataMatrix& p,
                                                   const DoubleMinimizationOptions& options) {
  if (options.rank < 1 || p.rows() * options.rank * p.cols() > kDoubleMinimizationCap) {
    throw UsageError("double_minimization_check needs 1 <= rank and m*rank*n <= 512");
  }
  if (options.trials < 1 || options.max_iters < 1) {
    throw UsageError("double_minimization_check needs positive trials and max_iters");
  }
  SolverConfig cfg;
  cfg.rank = options.rank;

  DoubleMinimizationReport report;
  report.agree = true;
  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    cfg.seed = restart_seed(options.seed, trial);
    LiftedQ q = LiftedQ::from_factors(init_factors(p, cfg));
    DoubleMinimizationTrial record;
    record.seed = cfg.seed;
    double previous = kInf;
    for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
      const Tensor3 p_star = project_to_P(p, q);
      const double lifted_value = tensor_divergence(p_star, q.tensor()).value();
      const double matrix_value = i_divergence(p.values(), q.marginal()).value();
      record.max_identity_gap =
          std::max(record.max_identity_gap, std::abs(lifted_value - matrix_value));
      record.lifted_divergence = lifted_value;
      record.matrix_divergence = matrix_value;
      record.iterations = iter;
      if (previous < kInf &&
          std::abs(previous - matrix_value) <= options.rel_tol * std::max(previous, 1.0)) {
        break;
      }
      previous = matrix_value;
      q = project_to_Q(p_star);
    }
    if (std::abs(record.lifted_divergence - record.matrix_divergence) > 1e-8) report.agree = false;
    report.trials.push_back(record);
  }

  report.min_lifted = kInf;
  report.min_matrix = kInf;
  for (const auto& t : report.trials) {
    report.min_lifted = std::min(report.min_lifted, t.lifted_divergence);
    report.min_matrix = std::min(report.min_matrix, t.matrix_divergence);
    report.max_identity_gap = std::max(report.max_identity_gap, t.max_identity_gap);
  }
  return report;
}

StepObserver oracle_observer() {
  return [](const StepView& step, TraceEntry& entry) {
    const LiftedQ q_n = LiftedQ::from_factors(step.before);
    const Tensor3 p_n = project_to_P(step.data, q_n);
    const LiftedQ q_next = project_to_Q(p_n);
    const Tensor3 p_next = project_to_P(step.data, q_next);

    OracleRecord rec;
    rec.gain_p = tensor_divergence(p_n, p_next).value();
    rec.gain_q = tensor_divergence(q_next.tensor(), q_n.tensor()).value();
    rec.gain_residual = step.divergence_before.value() - step.divergence_after.value() -
                        rec.gain_p - rec.gain_q;
    rec.lifted_gap = std::max(max_abs_diff(q_next.q_minus(), step.after.w()),
                              max_abs_diff(q_next.q_plus(), step.after.h()));
    rec.pythagorean_q_residual =
        pythagorean_q_residual(p_n, q_n).value_or(std::numeric_limits<double>::quiet_NaN());
    rec.pythagorean_p_residual = pythagorean_p_residual(p_n, step.data, q_next)
                                     .value_or(std::numeric_limits<double>::quiet_NaN());
    entry.oracle = rec;
  };
}

}  // namespace idnmf::lifted
