#include "idnmf/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>

#include "idnmf/divergence.hpp"
#include "idnmf/errors.hpp"
#include "idnmf/factorizer.hpp"
#include "idnmf/io.hpp"
#include "idnmf/lifted.hpp"

namespace idnmf::cli {
namespace {

struct FactorizeArgs {
  std::string input;
  std::string out_dir;
  SolverConfig cfg;
  bool oracle = false;
};

struct VerifyArgs {
  std::string input;
  std::string w;
  std::string h;
};

struct DivergenceArgs {
  std::string a;
  std::string b;
};

std::size_t threads_from_env() {
  const char* raw = std::getenv(kThreadsEnv);
  if (raw == nullptr || *raw == '\0') return 1;
  std::size_t value = 0;
  const char* end = raw + std::strlen(raw);
  const auto [ptr, ec] = std::from_chars(raw, end, value);
  if (ec != std::errc() || ptr != end || value == 0) {
    throw UsageError(std::string(kThreadsEnv) + " must be a positive integer");
  }
  return value;
}

int run_factorize(FactorizeArgs args, std::ostream& out) {
  const DataMatrix v = io::read_matrix(args.input);
  args.cfg.threads = threads_from_env();

  const auto t0 = std::chrono::steady_clock::now();
  const FactorizationResult result =
      run(v, args.cfg, std::nullopt, args.oracle ? lifted::oracle_observer() : StepObserver{});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  io::RunContext context{io::file_checksum(args.input), args.cfg, args.oracle, wall};
  io::write_result(result, args.out_dir, context);
  out << "iterations " << result.iterations_run << " stop_reason " << to_string(result.stop_reason)
      << " divergence " << io::format_double(result.final_divergence.value()) << '\n';
  return kSuccess;
}

int run_verify(const VerifyArgs& args, std::ostream& out) {
  const DataMatrix v = io::read_matrix(args.input);
  const FactorPair f = normalize_row_stochastic(io::read_csv(args.w), io::read_csv(args.h));
  if (f.rows() != v.rows() || f.cols() != v.cols()) {
    throw UsageError("factors give a " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                     " product but the input is " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()));
  }
  const lifted::Lemma1Report exact = lifted::lemma1_witness(v, f);
  nlohmann::ordered_json report;
  report["divergence"] = divergence(v, f).value();
  report["objective"] = objective(v, f);
  report["stationarity_residual"] = stationarity_residual(v, f);
  report["exactness_gap"] = exact.marginal_gap;
  report["exact"] = exact.certified();
  out << report.dump() << '\n';
  return kSuccess;
}

int run_divergence(const DivergenceArgs& args, std::ostream& out) {
  const DivergenceValue d = i_divergence(io::read_csv(args.a), io::read_csv(args.b));
  out << (d.is_finite() ? io::format_double(d.value()) : std::string("inf")) << '\n';
  return kSuccess;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"I-divergence nonnegative matrix factorization"};
  app.name("idnmf");
  app.require_subcommand(1);

  FactorizeArgs fact;
  auto* factorize = app.add_subcommand("factorize", "Factorize V ~ WH by alternating minimization");
  factorize->add_option("--input", fact.input, "Input matrix CSV")->required();
  factorize->add_option("--rank", fact.cfg.rank, "Inner dimension k")
      ->required()
      ->check(CLI::PositiveNumber);
  factorize->add_option("--max-iters", fact.cfg.max_iters, "Iteration cap")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  factorize->add_option("--tol", fact.cfg.rel_tol, "Relative divergence-change tolerance")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  factorize->add_option("--seed", fact.cfg.seed, "Random seed")->capture_default_str();
  factorize->add_option("--restarts", fact.cfg.restarts, "Independently seeded restarts")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  factorize->add_option("--min-init", fact.cfg.min_init, "Lower bound of initial entries")
      ->capture_default_str();
  factorize->add_flag("--oracle", fact.oracle, "Record lifted-space checks in the trace");
  factorize->add_option("--out", fact.out_dir, "Output directory")->required();

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Evaluate given factors against V");
  verify->set_help_flag("--help", "Print this help message and exit");
  verify->add_option("--input", ver.input, "Input matrix CSV")->required();
  verify->add_option("--w", ver.w, "W factor CSV")->required();
  verify->add_option("--h", ver.h, "H factor CSV")->required();

  DivergenceArgs div;
  auto* divergence_cmd = app.add_subcommand("divergence", "Print D(A || B)");
  divergence_cmd->add_option("--a", div.a, "First matrix CSV")->required();
  divergence_cmd->add_option("--b", div.b, "Second matrix CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    if (*factorize) return run_factorize(fact, out);
    if (*verify) return run_verify(ver, out);
    return run_divergence(div, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const SingularityError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kSingular;
  } catch (const DegenerateError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kSingular;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace idnmf::cli
