#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "idnmf/errors.hpp"
#include "idnmf/factorizer.hpp"
#include "idnmf/matrix.hpp"

namespace idnmf::io {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

enum class ParseErrc {
  missing_file,
  io_failure,
  empty,
  ragged_row,
  non_numeric,
  non_finite,
  negative_entry,
};

std::string_view to_string(ParseErrc code) noexcept;

/// Failure to read or write a matrix file. `line` is 1-based, 0 when not
/// tied to a line.
class ParseError : public Error {
 public:
  ParseError(ParseErrc code, const std::string& what, std::size_t line = 0);

  ParseErrc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ParseErrc code_;
  std::size_t line_;
};

/**
 * Parses a numeric CSV document (comma separated, LF or CRLF, optional double
 * quotes). A first row with no numeric cell is taken as a header and
 * skipped. Trailing blank lines are ignored.
 *
 * Values must be finite; the sign is not checked here.
 */
Matrix parse_csv(std::string_view text);

/// parse_csv on the contents of `path`.
Matrix read_csv(const std::filesystem::path& path);

/// read_csv validated as a DataMatrix: entries in [-1e-14, 0) are clamped,
/// anything more negative is ParseErrc::negative_entry.
/// @throws DomainError when the matrix is identically zero.
DataMatrix read_matrix(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

/// One row per line, cells joined by ',', no header.
std::string format_csv(const Matrix& m);
void write_csv(const std::filesystem::path& path, const Matrix& m);

/// One trace.jsonl record (no trailing newline). Wall-clock time is omitted
/// so that traces are reproducible byte for byte.
std::string trace_line(const TraceEntry& entry);

struct RunManifest {
  std::string input_checksum;  ///< sha256 of the input file bytes, hex
  SolverConfig config;
  bool oracle = false;
  std::string library_version{kLibraryVersion};
  std::string stop_reason;
  double final_divergence = 0.0;
  std::size_t iterations = 0;
  std::uint64_t best_seed = 0;
  double wall_seconds = 0.0;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string manifest_json(const RunManifest& manifest);
RunManifest parse_manifest(std::string_view json);
RunManifest read_manifest(const std::filesystem::path& path);

/// Hex sha256 of a file's bytes.
std::string file_checksum(const std::filesystem::path& path);

struct RunContext {
  std::string input_checksum;
  SolverConfig config;
  bool oracle = false;
  double wall_seconds = 0.0;
};

struct ResultPaths {
  std::filesystem::path w;
  std::filesystem::path h;
  std::filesystem::path trace;
  std::filesystem::path manifest;
};

/**
 * Writes W.csv and H.csv (canonicalized factors), trace.jsonl and
 * manifest.json into `out_dir`, creating it if needed.
 *
 * @throws ParseError with ParseErrc::io_failure when a file cannot be written.
 */
ResultPaths write_result(const FactorizationResult& result, const std::filesystem::path& out_dir,
                         const RunContext& context);

}  // namespace idnmf::io
