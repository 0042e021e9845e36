#include <gtest/gtest.h>

#include <cmath>

#include "idnmf/errors.hpp"
#include "idnmf/factorizer.hpp"
#include "oracles.hpp"

using namespace idnmf;
using idnmf::oracles::Rng;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

const Matrix kRank1W = mat({{3}, {7}});
const Matrix kRank1H = mat({{0.4, 0.6}});
// D([[1,2],[3,4]] || [[1.2,1.8],[2.8,4.2]]), 30-digit evaluation.
constexpr double kRank1Divergence = 0.0402174323048243272133;

DataMatrix small_v() { return DataMatrix(mat({{1, 2}, {3, 4}})); }

SolverConfig config(std::size_t rank, std::uint64_t seed = 0) {
  SolverConfig cfg;
  cfg.rank = rank;
  cfg.seed = seed;
  return cfg;
}

FactorPair planted(Rng& rng, Eigen::Index m, Eigen::Index n, Eigen::Index k, Matrix* product) {
  const auto raw = oracles::random_factors(rng, m, n, k);
  FactorPair f(raw.w, raw.h);
  *product = wh_product(f);
  return f;
}

}  // namespace

TEST(InitFactorsTest, DeterministicForSeed) {
  const FactorPair a = init_factors(2, 2, config(1, 42));
  const FactorPair b = init_factors(2, 2, config(1, 42));
  EXPECT_EQ(a.w(), b.w());
  EXPECT_EQ(a.h(), b.h());
  const FactorPair c = init_factors(2, 2, config(1, 43));
  EXPECT_NE(a.w(), c.w());
}

TEST(InitFactorsTest, StrictlyPositiveAndRowStochastic) {
  SolverConfig cfg = config(3, 5);
  cfg.min_init = 0.25;
  const FactorPair f = init_factors(6, 7, cfg);
  EXPECT_GE(f.w().minCoeff(), 0.25);
  EXPECT_GT(f.h().minCoeff(), 0.0);
  for (Eigen::Index l = 0; l < 3; ++l) EXPECT_NEAR(f.h().row(l).sum(), 1.0, 1e-12);
}

TEST(InitFactorsTest, ScaleMatchesDataMass) {
  Rng rng(1);
  const DataMatrix v(oracles::random_matrix(rng, 5, 4, 0.0, 3.0));
  const FactorPair f = init_factors(v, config(2, 9));
  for (Eigen::Index l = 0; l < 2; ++l) {
    EXPECT_NEAR(f.w().col(l).sum(), v.total_mass() / 2.0, 1e-12 * v.total_mass());
  }
  EXPECT_GT(f.w().minCoeff(), 0.0);
}

TEST(InitFactorsTest, RejectsBadConfig) {
  EXPECT_THROW(init_factors(2, 3, config(0)), UsageError);
  EXPECT_THROW(init_factors(2, 3, config(3)), UsageError);
  SolverConfig cfg = config(1);
  cfg.min_init = 0.0;
  EXPECT_THROW(init_factors(2, 3, cfg), UsageError);
}

TEST(UpdateStepTest, ExactFactorizationIsFixedPoint) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix product;
    const FactorPair f = planted(rng, 5, 4, 2, &product);
    const FactorPair next = update_step(DataMatrix(product), f);
    EXPECT_LT(max_abs_diff(next.w(), f.w()), 1e-12);
    EXPECT_LT(max_abs_diff(next.h(), f.h()), 1e-12);
  }
}

TEST(UpdateStepTest, RankOneLandsOnClosedFormInOneStep) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto raw = oracles::random_factors(rng, 2, 2, 1, 0.01, 5.0);
    const FactorPair next = update_step(small_v(), FactorPair(raw.w, raw.h));
    EXPECT_LT(max_abs_diff(next.w(), kRank1W), 1e-12);
    EXPECT_LT(max_abs_diff(next.h(), kRank1H), 1e-12);
  }
}

TEST(UpdateStepTest, MatchesIndexFormulaOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const DataMatrix v(oracles::random_matrix(rng, 6, 5, 0.0, 2.0));
    const auto raw = oracles::random_factors(rng, 6, 5, 3);
    const FactorPair next = update_step(v, FactorPair(raw.w, raw.h));
    const auto expected = oracles::naive_update(v.values(), raw.w, raw.h);
    EXPECT_LT(max_abs_diff(next.w(), expected.w), 1e-13);
    EXPECT_LT(max_abs_diff(next.h(), expected.h), 1e-13);
  }
}

TEST(UpdateStepTest, DecreasesDivergenceOnRandomInstance) {
  Rng rng(5);
  const DataMatrix v(oracles::random_matrix(rng, 5, 4, 0.1, 1.0));
  FactorPair f = init_factors(v, config(2, 17));
  for (int it = 0; it < 30; ++it) {
    const FactorPair next = update_step(v, f);
    EXPECT_LE(divergence(v, next).value(), divergence(v, f).value());
    f = next;
  }
}

TEST(UpdateStepTest, SingularCellIsReported) {
  const DataMatrix v(mat({{1, 1}, {1, 1}}));
  const FactorPair f(mat({{1}, {0}}), mat({{0.5, 0.5}}));
  try {
    update_step(v, f);
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.col(), 0u);
  }
}

TEST(UpdateStepTest, ZeroDataRowZeroesWRow) {
  const DataMatrix v(mat({{1, 2, 3}, {0, 0, 0}, {4, 5, 6}}));
  const FactorPair f = init_factors(v, config(2, 1));
  const FactorPair next = update_step(v, f);
  EXPECT_EQ(next.w().row(1).squaredNorm(), 0.0);
  // Zero rows are fine as input to the following step.
  EXPECT_NO_THROW(update_step(v, next));
}

TEST(UpdateStepTest, BoundsAndPositivity) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const DataMatrix v(oracles::random_matrix(rng, 7, 6, 0.05, 3.0));
    FactorPair f = init_factors(v, config(3, static_cast<std::uint64_t>(trial)));
    for (int it = 0; it < 25; ++it) {
      f = update_step(v, f);
      for (Eigen::Index i = 0; i < 7; ++i) {
        const double row_mass = v.values().row(i).sum();
        for (Eigen::Index l = 0; l < 3; ++l) EXPECT_LE(f.w()(i, l), row_mass + 1e-12);
      }
      for (Eigen::Index l = 0; l < 3; ++l) EXPECT_NEAR(f.h().row(l).sum(), 1.0, 1e-12);
      EXPECT_GT(f.w().minCoeff(), 0.0);
      EXPECT_GT(f.h().minCoeff(), 0.0);
    }
  }
}

TEST(UpdateStepTest, ShapeMismatch) {
  EXPECT_THROW(update_step(small_v(), FactorPair(mat({{1}}), mat({{1}}))), UsageError);
}

TEST(NormalizeTest, Examples) {
  const FactorPair already = normalize_row_stochastic(kRank1W, kRank1H);
  EXPECT_EQ(already.w(), kRank1W);
  EXPECT_EQ(already.h(), kRank1H);

  const FactorPair scaled = normalize_row_stochastic(mat({{1}, {1}}), mat({{2, 2}}));
  EXPECT_EQ(scaled.w(), mat({{4}, {4}}));
  EXPECT_EQ(scaled.h(), mat({{0.5, 0.5}}));
}

TEST(NormalizeTest, ZeroRowIsDegenerate) {
  EXPECT_THROW(normalize_row_stochastic(mat({{1, 1}, {1, 1}}), mat({{1, 1}, {0, 0}})), DegenerateError);
}

TEST(NormalizeTest, PreservesProduct) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix w = oracles::random_matrix(rng, 5, 3, 0.0, 4.0);
    const Matrix h = oracles::random_matrix(rng, 3, 6, 0.01, 4.0);
    const FactorPair f = normalize_row_stochastic(w, h);
    const Matrix before = oracles::naive_product(w, h);
    const Matrix after = wh_product(f);
    for (Eigen::Index i = 0; i < before.rows(); ++i) {
      for (Eigen::Index j = 0; j < before.cols(); ++j) {
        EXPECT_NEAR(after(i, j), before(i, j), 1e-12 * before(i, j));
      }
    }
  }
}

TEST(CanonicalizeTest, SortedPairUnchangedAndSwapRestored) {
  const FactorPair sorted(mat({{5, 1}, {4, 1}, {3, 1}}), mat({{0.2, 0.3, 0.5}, {0.6, 0.3, 0.1}}));
  const FactorPair c = canonicalize(sorted);
  EXPECT_EQ(c.w(), sorted.w());
  EXPECT_EQ(c.h(), sorted.h());

  const FactorPair swapped(mat({{1, 5}, {1, 4}, {1, 3}}), mat({{0.6, 0.3, 0.1}, {0.2, 0.3, 0.5}}));
  const FactorPair restored = canonicalize(swapped);
  EXPECT_EQ(restored.w(), sorted.w());
  EXPECT_EQ(restored.h(), sorted.h());
}

TEST(CanonicalizeTest, TiesBrokenLexicographically) {
  const FactorPair tied(mat({{1, 2}, {2, 1}}), mat({{1, 0}, {0, 1}}));
  const FactorPair c = canonicalize(tied);
  EXPECT_EQ(c.w(), mat({{2, 1}, {1, 2}}));
  EXPECT_EQ(c.h(), mat({{0, 1}, {1, 0}}));
}

TEST(CanonicalizeTest, ProductUnchanged) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto raw = oracles::random_factors(rng, 6, 5, 4);
    const FactorPair f(raw.w, raw.h);
    EXPECT_LE(max_abs_diff(wh_product(canonicalize(f)), wh_product(f)), 1e-15);
  }
}

TEST(StationarityTest, ZeroAtFixedPoints) {
  Rng rng(10);
  Matrix product;
  const FactorPair f = planted(rng, 4, 5, 2, &product);
  EXPECT_LT(stationarity_residual(DataMatrix(product), f), 1e-12);
  EXPECT_LT(stationarity_residual(small_v(), FactorPair(kRank1W, kRank1H)), 1e-12);
}

TEST(StationarityTest, PositiveAwayFromFixedPoints) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const DataMatrix v(oracles::random_matrix(rng, 5, 5, 0.1, 1.0));
    const FactorPair f = init_factors(v, config(2, static_cast<std::uint64_t>(trial)));
    const double r = stationarity_residual(v, f);
    EXPECT_GT(r, 0.0);
    // Strict progress away from stationarity.
    if (r > 1e-8) EXPECT_LT(divergence(v, update_step(v, f)).value(), divergence(v, f).value());
  }
}

TEST(StationarityTest, FiniteDifferenceGradientVanishesAtRankOneOptimum) {
  // Directional derivatives of F at the converged rank-1 point: along each W
  // entry, and along the H simplex tangent (+d, -d).
  const DataMatrix v = small_v();
  const auto f_at = [&](const Matrix& w, const Matrix& h) {
    return static_cast<double>(oracles::naive_objective(v.values(), w, h));
  };
  const double step = 1e-6;
  for (Eigen::Index i = 0; i < 2; ++i) {
    Matrix up = kRank1W, down = kRank1W;
    up(i, 0) += step;
    down(i, 0) -= step;
    EXPECT_NEAR((f_at(up, kRank1H) - f_at(down, kRank1H)) / (2 * step), 0.0, 1e-6);
  }
  Matrix up = kRank1H, down = kRank1H;
  up(0, 0) += step;
  up(0, 1) -= step;
  down(0, 0) -= step;
  down(0, 1) += step;
  EXPECT_NEAR((f_at(kRank1W, up) - f_at(kRank1W, down)) / (2 * step), 0.0, 1e-6);
}

TEST(RunTest, RankOneConvergesByIterationTwo) {
  const FactorizationResult r = run(small_v(), config(1, 123));
  EXPECT_LE(r.iterations_run, 2u);
  EXPECT_LT(max_abs_diff(r.factors.w(), kRank1W), 1e-12);
  EXPECT_LT(max_abs_diff(r.factors.h(), kRank1H), 1e-12);
  EXPECT_NEAR(r.final_divergence.value(), kRank1Divergence, 1e-15);
  EXPECT_EQ(r.trace.size(), r.iterations_run);
  EXPECT_EQ(r.trace.back().divergence, r.final_divergence.value());
}

TEST(RunTest, PlantedRecoveryWithRestarts) {
  Rng rng(13);
  Matrix product;
  planted(rng, 4, 4, 2, &product);
  SolverConfig cfg = config(2, 77);
  cfg.restarts = 10;
  cfg.max_iters = 5000;
  cfg.rel_tol = 0.0;
  const FactorizationResult r = run(DataMatrix(product), cfg);
  EXPECT_LT(r.final_divergence.value(), 1e-6);
}

TEST(RunTest, TraceContract) {
  Rng rng(14);
  const DataMatrix v(oracles::random_matrix(rng, 6, 5, 0.1, 1.0));
  SolverConfig cfg = config(2, 5);
  cfg.max_iters = 40;
  cfg.rel_tol = 0.0;
  const FactorizationResult r = run(v, cfg);
  EXPECT_EQ(r.stop_reason, StopReason::max_iters);
  EXPECT_EQ(r.iterations_run, 40u);
  ASSERT_EQ(r.trace.size(), 40u);
  for (std::size_t n = 1; n < r.trace.size(); ++n) {
    EXPECT_EQ(r.trace[n].iter, n + 1);
    EXPECT_LE(r.trace[n].divergence, r.trace[n - 1].divergence + 1e-12);
    EXPECT_GE(r.trace[n].objective, r.trace[n - 1].objective - 1e-12);
  }
  EXPECT_EQ(r.final_divergence.value(), r.trace.back().divergence);

  cfg.max_iters = 100000;
  cfg.rel_tol = 1e-6;
  EXPECT_EQ(run(v, cfg).stop_reason, StopReason::tol_reached);
}

TEST(RunTest, RestartsIndependentOfThreadCount) {
  Rng rng(15);
  const DataMatrix v(oracles::random_matrix(rng, 8, 7, 0.1, 1.0));
  SolverConfig cfg = config(3, 99);
  cfg.restarts = 6;
  cfg.max_iters = 200;
  const FactorizationResult serial = run(v, cfg);
  cfg.threads = 4;
  const FactorizationResult parallel = run(v, cfg);
  EXPECT_EQ(serial.seed, parallel.seed);
  EXPECT_EQ(serial.factors.w(), parallel.factors.w());
  EXPECT_EQ(serial.factors.h(), parallel.factors.h());

  // Best of the restarts is no worse than the first one alone.
  cfg.restarts = 1;
  EXPECT_LE(serial.final_divergence, run(v, cfg).final_divergence);
}

TEST(RunTest, ProvidedInitialFactors) {
  const DataMatrix v = small_v();
  const FactorPair start(mat({{1}, {1}}), mat({{0.5, 0.5}}));
  SolverConfig cfg = config(1);
  cfg.init_strategy = InitStrategy::provided;
  const FactorizationResult r = run(v, cfg, start);
  EXPECT_LT(max_abs_diff(r.factors.w(), kRank1W), 1e-12);

  EXPECT_THROW(run(v, cfg), UsageError);
  cfg.restarts = 2;
  EXPECT_THROW(run(v, cfg, start), UsageError);
  cfg.restarts = 1;
  EXPECT_THROW(run(v, cfg, FactorPair(mat({{1}, {0}}), mat({{0.5, 0.5}}))), PreconditionError);
}

TEST(RunTest, ObserverDoesNotAlterTrajectory) {
  Rng rng(16);
  const DataMatrix v(oracles::random_matrix(rng, 5, 6, 0.1, 1.0));
  SolverConfig cfg = config(2, 3);
  cfg.max_iters = 30;
  const FactorizationResult plain = run(v, cfg);
  std::size_t calls = 0;
  const FactorizationResult observed = run(v, cfg, std::nullopt, [&](const StepView&, TraceEntry& e) {
    ++calls;
    e.oracle = OracleRecord{};
  });
  EXPECT_EQ(calls, observed.iterations_run);
  EXPECT_EQ(plain.factors.w(), observed.factors.w());
  EXPECT_EQ(plain.factors.h(), observed.factors.h());
  ASSERT_EQ(plain.trace.size(), observed.trace.size());
  for (std::size_t n = 0; n < plain.trace.size(); ++n) {
    EXPECT_EQ(plain.trace[n].divergence, observed.trace[n].divergence);
  }
}

TEST(RunTest, InvalidConfig) {
  SolverConfig cfg = config(1);
  cfg.rel_tol = -1.0;
  EXPECT_THROW(run(small_v(), cfg), UsageError);
  cfg = config(1);
  cfg.max_iters = 0;
  EXPECT_THROW(run(small_v(), cfg), UsageError);
  EXPECT_THROW(run(small_v(), config(3)), UsageError);
}
