#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hqrwaci/series.hpp"

namespace hqrwaci {

/// Parses "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS" into
/// epoch seconds (UTC). Throws DataError on malformed input.
[[nodiscard]] std::int64_t parse_timestamp(const std::string& text);

/// Formats epoch seconds as "YYYY-MM-DDTHH:MM:SS" (UTC).
[[nodiscard]] std::string format_timestamp(std::int64_t epoch_seconds);

/// Hour of day (0-23) of an epoch-seconds timestamp.
[[nodiscard]] int hour_of_day(std::int64_t epoch_seconds);

/// Reads a forecast panel from CSV with header `timestamp,y,<one column per
/// forecaster>`. Timestamps must be strictly increasing; duplicates and
/// non-numeric fields raise DataError naming the offending row. With
/// derive_hour_groups the hour of day becomes each row's group key.
[[nodiscard]] ForecastPanel ingest_panel(const std::string& path,
                                         bool derive_hour_groups = false);

/// Writes a panel in the same schema ingest_panel reads (forecast columns
/// named f1..fM). Round-trips through ingest_panel exactly for values that
/// print losslessly at 17 significant digits.
void emit_panel(const ForecastPanel& panel, const std::string& path);

/// One output table: column names plus string cells, written as CSV and
/// optionally mirrored as a JSON array of row objects.
struct OutputTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const OutputTable& table, const std::string& path);
void write_json(const OutputTable& table, const std::string& path);

/// Fixed-format float for CSV cells: shortest of %.10g, stable across runs.
[[nodiscard]] std::string format_number(double value);
/// Two-decimal rendering used by the publication-style table mode.
[[nodiscard]] std::string format_fixed2(double value);

/// Flat `key = value` config file ('#' comments, blank lines ignored).
/// Throws DataError when the file cannot be read or a line is malformed.
[[nodiscard]] std::map<std::string, std::string> parse_config_file(
    const std::string& path);

}  // namespace hqrwaci
