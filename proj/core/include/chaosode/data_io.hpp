#pragma once

/// \file data_io.hpp
/// Files exchanged by the command-line tool: observation CSVs with a JSON
/// sidecar, and JSON-lines result files.

#include <string>
#include <vector>

#include "chaosode/bench.hpp"
#include "chaosode/observations.hpp"

namespace chaosode {

/// Shortest round-trip decimal, always with a decimal point ("0.0", "1.5").
std::string format_decimal(double v);

/// `path` with its extension replaced by ".json".
std::string sidecar_path(const std::string& csv_path);

/// Header `t,x1,...,xn`, one row per observation; the sidecar holds
/// {sigma, seed, t0, x0}.
void write_observations(const ObservationSet& data, const std::string& csv_path);

/// Inverse of write_observations. Without a sidecar, (t0, x0) is the first row.
/// Throws InputError.
ObservationSet read_observations(const std::string& csv_path);

/// One record per line. A missing file reads as empty; a truncated last
/// line (interrupted write) is dropped. Throws InputError on other bad lines.
std::vector<ScenarioRecord> read_records(const std::string& jsonl_path);

}  // namespace chaosode
