#include "idnmf/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <vector>

namespace idnmf::io {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Splits one record into cells, honoring double quotes with "" escapes.
std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t p = 0; p < line.size(); ++p) {
    const char c = line[p];
    if (quoted) {
      if (c == '"') {
        if (p + 1 < line.size() && line[p + 1] == '"') {
          cell.push_back('"');
          ++p;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"' && trim(cell).empty() && !was_quoted) {
      cell.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) throw ParseError(ParseErrc::non_numeric, "unterminated quoted cell", line_no);
  cells.push_back(std::move(cell));
  return cells;
}

enum class CellKind { number, non_numeric, non_finite };

CellKind parse_cell(std::string_view text, double& out) {
  std::string_view s = trim(text);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return CellKind::non_numeric;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc::result_out_of_range) return CellKind::non_finite;
  if (ec != std::errc() || ptr != s.data() + s.size()) return CellKind::non_numeric;
  if (!std::isfinite(out)) return CellKind::non_finite;
  return CellKind::number;
}

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ParseError(ParseErrc::missing_file, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrc::io_failure, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(ParseErrc::io_failure, "cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw ParseError(ParseErrc::io_failure, "write failed for " + path.string());
}

ordered_json config_json(const SolverConfig& cfg) {
  ordered_json j;
  j["rank"] = cfg.rank;
  j["max_iters"] = cfg.max_iters;
  j["rel_tol"] = cfg.rel_tol;
  j["seed"] = cfg.seed;
  j["init_strategy"] = std::string(to_string(cfg.init_strategy));
  j["min_init"] = cfg.min_init;
  j["restarts"] = cfg.restarts;
  j["threads"] = cfg.threads;
  return j;
}

SolverConfig config_from_json(const nlohmann::json& j) {
  SolverConfig cfg;
  cfg.rank = j.at("rank").get<std::size_t>();
  cfg.max_iters = j.at("max_iters").get<std::size_t>();
  cfg.rel_tol = j.at("rel_tol").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  const auto strategy = j.at("init_strategy").get<std::string>();
  if (strategy == to_string(InitStrategy::uniform_random)) {
    cfg.init_strategy = InitStrategy::uniform_random;
  } else if (strategy == to_string(InitStrategy::provided)) {
    cfg.init_strategy = InitStrategy::provided;
  } else {
    throw ParseError(ParseErrc::non_numeric, "unknown init_strategy '" + strategy + "'");
  }
  cfg.min_init = j.at("min_init").get<double>();
  cfg.restarts = j.at("restarts").get<std::size_t>();
  cfg.threads = j.at("threads").get<std::size_t>();
  return cfg;
}

}  // namespace

std::string_view to_string(ParseErrc code) noexcept {
  switch (code) {
    case ParseErrc::missing_file:
      return "missing_file";
    case ParseErrc::io_failure:
      return "io_failure";
    case ParseErrc::empty:
      return "empty";
    case ParseErrc::ragged_row:
      return "ragged_row";
    case ParseErrc::non_numeric:
      return "non_numeric";
    case ParseErrc::non_finite:
      return "non_finite";
    case ParseErrc::negative_entry:
      return "negative_entry";
  }
  return "unknown";
}

ParseError::ParseError(ParseErrc code, const std::string& what, std::size_t line)
    : Error(std::string(to_string(code)) + ": " + what +
            (line ? " (line " + std::to_string(line) + ")" : std::string())),
      code_(code),
      line_(line) {}

Matrix parse_csv(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(ParseErrc::empty, "no rows");

  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const std::size_t line_no = r + 1;
    const auto cells = split_record(lines[r], line_no);
    std::vector<double> row;
    row.reserve(cells.size());
    CellKind worst = CellKind::number;
    std::size_t numeric = 0;
    for (const auto& c : cells) {
      double x = 0.0;
      const CellKind kind = parse_cell(c, x);
      if (kind != CellKind::number) {
        if (worst == CellKind::number || kind == CellKind::non_numeric) worst = kind;
        continue;
      }
      row.push_back(x);
      ++numeric;
    }
    if (r == 0) {
      width = cells.size();
      if (numeric == 0 && worst == CellKind::non_numeric) continue;  // header
    } else if (cells.size() != width) {
      throw ParseError(ParseErrc::ragged_row,
                       "expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    if (worst == CellKind::non_numeric) {
      throw ParseError(ParseErrc::non_numeric, "non-numeric cell", line_no);
    }
    if (worst == CellKind::non_finite) {
      throw ParseError(ParseErrc::non_finite, "non-finite value", line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(ParseErrc::empty, "header but no data rows");

  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return out;
}

Matrix read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

DataMatrix read_matrix(const std::filesystem::path& path) {
  Matrix m = read_csv(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) < -kClampTolerance) {
        throw ParseError(ParseErrc::negative_entry,
                         "negative entry in column " + std::to_string(j + 1),
                         static_cast<std::size_t>(i) + 1);
      }
    }
  }
  return DataMatrix(std::move(m));
}

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

std::string format_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& m) { write_file(path, format_csv(m)); }

std::string trace_line(const TraceEntry& entry) {
  ordered_json j;
  j["iter"] = entry.iter;
  j["divergence"] = entry.divergence;
  j["objective"] = entry.objective;
  j["residual"] = entry.residual;
  if (entry.oracle) {
    const OracleRecord& o = *entry.oracle;
    j["gain_p"] = o.gain_p;
    j["gain_q"] = o.gain_q;
    j["gain_residual"] = o.gain_residual;
    j["lifted_gap"] = o.lifted_gap;
    j["pythagorean_q_residual"] = o.pythagorean_q_residual;
    j["pythagorean_p_residual"] = o.pythagorean_p_residual;
  }
  return j.dump();
}

std::string manifest_json(const RunManifest& manifest) {
  ordered_json j;
  j["input_checksum"] = manifest.input_checksum;
  j["config"] = config_json(manifest.config);
  j["oracle"] = manifest.oracle;
  j["library_version"] = manifest.library_version;
  j["stop_reason"] = manifest.stop_reason;
  j["final_divergence"] = manifest.final_divergence;
  j["iterations"] = manifest.iterations;
  j["best_seed"] = manifest.best_seed;
  j["wall_seconds"] = manifest.wall_seconds;
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    RunManifest m;
    m.input_checksum = j.at("input_checksum").get<std::string>();
    m.config = config_from_json(j.at("config"));
    m.oracle = j.at("oracle").get<bool>();
    m.library_version = j.at("library_version").get<std::string>();
    m.stop_reason = j.at("stop_reason").get<std::string>();
    m.final_divergence = j.at("final_divergence").get<double>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.best_seed = j.at("best_seed").get<std::uint64_t>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrc::non_numeric, std::string("malformed manifest: ") + e.what());
  }
}

RunManifest read_manifest(const std::filesystem::path& path) { return parse_manifest(read_file(path)); }

std::string file_checksum(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw ParseError(ParseErrc::io_failure, "sha256 failed for " + path.string());
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int b = 0; b < len; ++b) {
    out.push_back(kHex[digest[b] >> 4]);
    out.push_back(kHex[digest[b] & 0xF]);
  }
  return out;
}

ResultPaths write_result(const FactorizationResult& result, const std::filesystem::path& out_dir,
                         const RunContext& context) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ParseError(ParseErrc::io_failure, "cannot create " + out_dir.string() + ": " + ec.message());

  ResultPaths paths{out_dir / "W.csv", out_dir / "H.csv", out_dir / "trace.jsonl",
                    out_dir / "manifest.json"};
  const FactorPair canonical = canonicalize(result.factors);
  write_csv(paths.w, canonical.w());
  write_csv(paths.h, canonical.h());

  std::string trace;
  for (const auto& entry : result.trace) {
    trace += trace_line(entry);
    trace.push_back('\n');
  }
  write_file(paths.trace, trace);

  RunManifest manifest;
  manifest.input_checksum = context.input_checksum;
  manifest.config = context.config;
  manifest.oracle = context.oracle;
  manifest.stop_reason = std::string(to_string(result.stop_reason));
  manifest.final_divergence = result.final_divergence.value();
  manifest.iterations = result.iterations_run;
  manifest.best_seed = result.seed;
  manifest.wall_seconds = context.wall_seconds;
  write_file(paths.manifest, manifest_json(manifest));
  return paths;
}

}  // namespace idnmf::io
