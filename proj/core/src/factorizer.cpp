#include "idnmf/factorizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "idnmf/errors.hpp"

namespace idnmf {
namespace {

// Uniform on [lo, 1] built from the top 53 bits, so the stream does not depend
// on the standard library's distribution implementation.
class UnitDraw {
 public:
  explicit UnitDraw(std::uint64_t seed) : engine_(seed) {}
  double operator()(double lo) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (1.0 - lo) * u;
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double step_displacement(const FactorPair& a, const FactorPair& b) {
  return std::max(max_abs_diff(a.w(), b.w()), max_abs_diff(a.h(), b.h()));
}

FactorizationResult solve_one(const DataMatrix& v, const SolverConfig& cfg, FactorPair start,
                              std::uint64_t seed, const StepObserver& observer) {
  using clock = std::chrono::steady_clock;
  ConvergenceTrace trace;
  trace.reserve(std::min<std::size_t>(cfg.max_iters, 4096));

  FactorPair current = std::move(start);
  DivergenceValue d_current = divergence(v, current);
  StopReason reason = StopReason::max_iters;

  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    const auto t0 = clock::now();
    FactorPair next = update_step(v, current);
    TraceEntry entry;
    entry.iter = iter;
    entry.residual = step_displacement(current, next);
    const DivergenceValue d_next = divergence(v, next);
    entry.divergence = d_next.value();
    entry.objective = objective(v, next);
    entry.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (observer) observer(StepView{v, current, next, d_current, d_next}, entry);
    trace.push_back(entry);

    const double change = std::abs(d_current.value() - d_next.value());
    const double scale = std::max(d_current.value(), 1.0);
    current = std::move(next);
    d_current = d_next;

    if (entry.residual < kStationaryThreshold) {
      reason = StopReason::stationary;
      break;
    }
    if (change <= cfg.rel_tol * scale) {
      reason = StopReason::tol_reached;
      break;
    }
  }

  const std::size_t iterations = trace.size();
  return FactorizationResult{std::move(current), std::move(trace), iterations, reason, d_current,
                             seed};
}

bool strictly_positive(const Matrix& m) { return (m.array() > 0.0).all(); }

}  // namespace

std::string_view to_string(InitStrategy s) noexcept {
  switch (s) {
    case InitStrategy::uniform_random:
      return "uniform_random";
    case InitStrategy::provided:
      return "provided";
  }
  return "unknown";
}

std::string_view to_string(StopReason s) noexcept {
  switch (s) {
    case StopReason::tol_reached:
      return "tol_reached";
    case StopReason::max_iters:
      return "max_iters";
    case StopReason::stationary:
      return "stationary";
  }
  return "unknown";
}

void validate(const SolverConfig& cfg, std::size_t m, std::size_t n) {
  if (cfg.rank < 1 || cfg.rank > std::min(m, n)) {
    throw UsageError("rank " + std::to_string(cfg.rank) + " outside [1, " +
                     std::to_string(std::min(m, n)) + "]");
  }
  if (cfg.max_iters < 1) throw UsageError("max_iters must be positive");
  if (!(cfg.rel_tol >= 0.0)) throw UsageError("rel_tol must be >= 0");
  if (!(cfg.min_init > 0.0 && cfg.min_init <= 1.0)) throw UsageError("min_init must lie in (0, 1]");
  if (cfg.restarts < 1) throw UsageError("restarts must be positive");
  if (cfg.threads < 1) throw UsageError("threads must be positive");
}

std::uint64_t restart_seed(std::uint64_t seed, std::size_t index) noexcept {
  if (index == 0) return seed;
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)));
}

FactorPair init_factors(std::size_t m, std::size_t n, const SolverConfig& cfg) {
  validate(cfg, m, n);
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(n);
  const auto k = static_cast<Eigen::Index>(cfg.rank);
  UnitDraw draw(cfg.seed);

  Matrix w(rows, k);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index l = 0; l < k; ++l) w(i, l) = draw(cfg.min_init);
  }
  Matrix h(k, cols);
  for (Eigen::Index l = 0; l < k; ++l) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      h(l, j) = draw(cfg.min_init);
      s += h(l, j);
    }
    for (Eigen::Index j = 0; j < cols; ++j) h(l, j) /= s;
  }
  return FactorPair(std::move(w), std::move(h));
}

FactorPair init_factors(const DataMatrix& v, const SolverConfig& cfg) {
  const FactorPair raw = init_factors(v.rows(), v.cols(), cfg);
  Matrix w = raw.w();
  const double target = v.total_mass() / static_cast<double>(cfg.rank);
  for (Eigen::Index l = 0; l < w.cols(); ++l) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += w(i, l);
    const double scale = target / s;
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, l) *= scale;
  }
  return FactorPair(std::move(w), raw.h());
}

FactorPair update_step(const DataMatrix& v, const FactorPair& f) {
  if (v.rows() != f.rows() || v.cols() != f.cols()) {
    throw UsageError("update_step: data and factor shapes disagree");
  }
  const Matrix& data = v.values();
  const Matrix& w = f.w();
  const Matrix& h = f.h();
  const Eigen::Index m = w.rows();
  const Eigen::Index k = w.cols();
  const Eigen::Index n = h.cols();

  Matrix w_next = Matrix::Zero(m, k);
  Matrix col_mass = Matrix::Zero(k, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = data(i, j);
      if (p == 0.0) continue;
      double model = 0.0;
      for (Eigen::Index l = 0; l < k; ++l) model += w(i, l) * h(l, j);
      if (model == 0.0) {
        throw SingularityError(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      }
      for (Eigen::Index l = 0; l < k; ++l) {
        const double share = p * (w(i, l) * h(l, j) / model);
        w_next(i, l) += share;
        col_mass(l, j) += share;
      }
    }
  }

  Matrix h_next(k, n);
  for (Eigen::Index l = 0; l < k; ++l) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) total += col_mass(l, j);
    if (!(total > 0.0)) {
      throw DegenerateError("latent component lost all mass", static_cast<std::size_t>(l));
    }
    for (Eigen::Index j = 0; j < n; ++j) h_next(l, j) = col_mass(l, j) / total;
  }
  return FactorPair(std::move(w_next), std::move(h_next));
}

FactorPair normalize_row_stochastic(const Matrix& w, const Matrix& h) {
  if (w.cols() != h.rows()) throw UsageError("normalize_row_stochastic: W and H shapes disagree");
  require_nonnegative(h, "H");
  Matrix w_out = w;
  Matrix h_out = h;
  for (Eigen::Index l = 0; l < h.rows(); ++l) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < h.cols(); ++j) s += h(l, j);
    if (!(s > 0.0)) throw DegenerateError("H has a zero row", static_cast<std::size_t>(l));
    for (Eigen::Index j = 0; j < h.cols(); ++j) h_out(l, j) = h(l, j) / s;
    for (Eigen::Index i = 0; i < w.rows(); ++i) w_out(i, l) = w(i, l) * s;
  }
  return FactorPair(std::move(w_out), std::move(h_out));
}

FactorPair canonicalize(const FactorPair& f) {
  const Matrix& w = f.w();
  const Matrix& h = f.h();
  const Eigen::Index k = w.cols();
  std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index l = 0; l < k; ++l) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) mass[static_cast<std::size_t>(l)] += w(i, l);
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = mass[static_cast<std::size_t>(a)];
    const double mb = mass[static_cast<std::size_t>(b)];
    if (ma != mb) return ma > mb;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      if (w(i, a) != w(i, b)) return w(i, a) > w(i, b);
    }
    return false;
  });

  Matrix w_out(w.rows(), k);
  Matrix h_out(k, h.cols());
  for (Eigen::Index pos = 0; pos < k; ++pos) {
    const Eigen::Index src = order[static_cast<std::size_t>(pos)];
    w_out.col(pos) = w.col(src);
    h_out.row(pos) = h.row(src);
  }
  return FactorPair(std::move(w_out), std::move(h_out));
}

double stationarity_residual(const DataMatrix& v, const FactorPair& f) {
  return step_displacement(f, update_step(v, f));
}

FactorizationResult run(const DataMatrix& v, const SolverConfig& cfg,
                        const std::optional<FactorPair>& initial, const StepObserver& observer) {
  validate(cfg, v.rows(), v.cols());

  if (initial || cfg.init_strategy == InitStrategy::provided) {
    if (!initial) throw UsageError("init strategy 'provided' requires initial factors");
    if (cfg.restarts != 1) throw UsageError("restarts must be 1 when initial factors are provided");
    if (initial->rows() != v.rows() || initial->cols() != v.cols() ||
        initial->rank() != cfg.rank) {
      throw UsageError("initial factors do not match the data shape and rank");
    }
    if (!strictly_positive(initial->w()) || !strictly_positive(initial->h())) {
      throw PreconditionError("initial factors must be strictly positive");
    }
    return solve_one(v, cfg, *initial, cfg.seed, observer);
  }

  const auto solve_restart = [&](std::size_t index) {
    SolverConfig local = cfg;
    local.seed = restart_seed(cfg.seed, index);
    return solve_one(v, local, init_factors(v, local), local.seed, observer);
  };

  std::vector<std::optional<FactorizationResult>> results(cfg.restarts);
  const std::size_t workers = std::min(cfg.threads, cfg.restarts);
  if (workers <= 1) {
    for (std::size_t r = 0; r < cfg.restarts; ++r) results[r] = solve_restart(r);
  } else {
    std::vector<std::exception_ptr> errors(cfg.restarts);
    {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t r = t; r < cfg.restarts; r += workers) {
            try {
              results[r] = solve_restart(r);
            } catch (...) {
              errors[r] = std::current_exception();
            }
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (results[r]->final_divergence < results[best]->final_divergence) best = r;
  }
  return std::move(*results[best]);
}

}  // namespace idnmf
