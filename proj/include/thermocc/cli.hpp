#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "thermocc/model.hpp"
#include "thermocc/observables.hpp"
#include "thermocc/tebd_oracle.hpp"

namespace thermocc {

enum class RunMethod { dmcc_s, dmcc_sd, tebd, dense, quadratic };

RunMethod parse_method(const std::string& name);
std::string to_string(RunMethod m);

/// Parsed config file. n_bath_set records whether the file fixed the bath
/// size; otherwise the method picks its own default.
struct ConfigFile {
  SiamConfig config;
  bool n_bath_set = false;
};

/// key = value lines, '#' starts a comment. Unknown or repeated keys and
/// malformed values throw ConfigError with the line number.
ConfigFile parse_config(std::istream& in);
ConfigFile parse_config_file(const std::string& path);

/// Method-specific defaults (30 bath levels for dmcc-sd), then validation.
SiamConfig resolve_config(const ConfigFile& file, RunMethod method);

/// Largest bath the dense method accepts from the command line.
inline constexpr int kDenseCliMaxBath = 3;

/// state_out receives the final MPS of a tebd run and is ignored otherwise.
TrajectoryRecord run_method(RunMethod method, const SiamConfig& config, MpsState* state_out = nullptr);

inline constexpr const char* kCsvVersion = "# thermocc-csv v1";
inline constexpr const char* kCsvHeader =
    "time,n_imp_alpha,n_imp_beta,n_total,polarization,n_electrons,trace_dev,herm_dev,discarded_weight";

void write_csv(std::ostream& os, const TrajectoryRecord& record);
void write_csv_file(const std::string& path, const TrajectoryRecord& record);
TrajectoryRecord read_csv(std::istream& in);
TrajectoryRecord read_csv_file(const std::string& path);

struct ColumnDeviation {
  std::string column;
  bool compared = false;  // false when either file leaves the column empty
  double max_abs = 0.0;
  double mean_abs = 0.0;
  double mean_signed = 0.0;  // mean of (a - b)
};

struct ComparisonReport {
  std::size_t points = 0;
  std::vector<ColumnDeviation> columns;

  const ColumnDeviation& column(const std::string& name) const;
  /// Largest max_abs over the two impurity population columns.
  double max_population() const;
};

/// Refuses differing time grids (no interpolation).
ComparisonReport compare(const TrajectoryRecord& a, const TrajectoryRecord& b);

/// One CSV line per column, then "SUMMARY points=<n> max_abs=<x>
/// max_population=<x> mean_signed_n_total=<x>" (signed values are a - b).
void print_report(std::ostream& os, const ComparisonReport& report);

}  // namespace thermocc
