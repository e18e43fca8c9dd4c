#include "hqrwaci/csv_io.hpp"

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hqrwaci/errors.hpp"

namespace hqrwaci {

namespace {

// Days since 1970-01-01 from a civil date (Hinnant's algorithm), valid for
// the proleptic Gregorian calendar.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<std::int64_t>(y - era * 400);
  const auto doy = static_cast<std::int64_t>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<std::int64_t>(z - era * 146097);
  const auto yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const auto yr = static_cast<std::int64_t>(yoe) + era * 400;
  const auto doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const auto mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yr + (m <= 2 ? 1 : 0));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& text, std::size_t row,
                    const std::string& what) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end == t.c_str() || *end != '\0' || errno == ERANGE) {
    throw DataError("csv: non-numeric " + what + " at row " +
                    std::to_string(row) + ": '" + text + "'");
  }
  return v;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text) {
  const std::string t = trim(text);
  int y = 0;
  int mo = 0;
  int d = 0;
  int h = 0;
  int mi = 0;
  int s = 0;
  char sep = 0;
  int n = 0;
  if (std::sscanf(t.c_str(), "%d-%d-%d%c%d:%d:%d%n", &y, &mo, &d, &sep, &h,
                  &mi, &s, &n) == 7 &&
      (sep == 'T' || sep == ' ') && n == static_cast<int>(t.size())) {
    // full datetime
  } else if (std::sscanf(t.c_str(), "%d-%d-%d%n", &y, &mo, &d, &n) == 3 &&
             n == static_cast<int>(t.size())) {
    h = mi = s = 0;
  } else {
    throw DataError("csv: malformed timestamp '" + text + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || s < 0 || s > 60) {
    throw DataError("csv: timestamp out of range '" + text + "'");
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
  std::int64_t days = epoch_seconds / 86400;
  std::int64_t rem = epoch_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y = 0;
  int m = 0;
  int d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02" PRId64 ":%02" PRId64
                                  ":%02" PRId64,
                y, m, d, rem / 3600, (rem % 3600) / 60, rem % 60);
  return buf;
}

int hour_of_day(std::int64_t epoch_seconds) {
  std::int64_t rem = epoch_seconds % 86400;
  if (rem < 0) rem += 86400;
  return static_cast<int>(rem / 3600);
}

ForecastPanel ingest_panel(const std::string& path, bool derive_hour_groups) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("csv: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("csv: '" + path + "' is empty");
  }
  const auto header = split_csv_line(line);
  if (header.size() < 3 || trim(header[0]) != "timestamp" ||
      trim(header[1]) != "y") {
    throw DataError(
        "csv: header must be 'timestamp,y,<forecast columns>' with at least "
        "one forecast column");
  }
  const std::size_t m = header.size() - 2;

  ForecastPanel panel;
  std::vector<double> flat;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("csv: row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    std::int64_t ts = 0;
    try {
      ts = parse_timestamp(fields[0]);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " (row " + std::to_string(row) +
                      ")");
    }
    if (!panel.timestamps.empty() && ts <= panel.timestamps.back()) {
      throw DataError(
          "csv: timestamps must be strictly increasing; violation at row " +
          std::to_string(row));
    }
    panel.timestamps.push_back(ts);
    panel.y.push_back(parse_double(fields[1], row, "y"));
    for (std::size_t j = 0; j < m; ++j) {
      flat.push_back(parse_double(fields[2 + j], row, "forecast"));
    }
  }
  const std::size_t n = panel.y.size();
  if (n == 0) {
    throw DataError("csv: '" + path + "' has no data rows");
  }
  panel.forecasts.resize(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      panel.forecasts(static_cast<Eigen::Index>(i),
                      static_cast<Eigen::Index>(j)) = flat[i * m + j];
    }
  }
  if (derive_hour_groups) {
    panel.group_keys.reserve(n);
    for (const std::int64_t ts : panel.timestamps) {
      panel.group_keys.push_back(hour_of_day(ts));
    }
  }
  panel.validate();
  return panel;
}

void emit_panel(const ForecastPanel& panel, const std::string& path) {
  panel.validate();
  std::ofstream out(path);
  if (!out) {
    throw DataError("csv: cannot write '" + path + "'");
  }
  out << "timestamp,y";
  for (std::size_t j = 0; j < panel.n_forecasters(); ++j) {
    out << ",f" << (j + 1);
  }
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < panel.size(); ++i) {
    out << format_timestamp(panel.timestamps[i]);
    std::snprintf(buf, sizeof(buf), "%.17g", panel.y[i]);
    out << ',' << buf;
    for (Eigen::Index j = 0; j < panel.forecasts.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    panel.forecasts(static_cast<Eigen::Index>(i), j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

void write_csv(const OutputTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("csv: cannot write '" + path + "'");
  }
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j > 0) out << ',';
    out << table.header[j];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out << ',';
      out << row[j];
    }
    out << "\n";
  }
}

void write_json(const OutputTable& table, const std::string& path) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t j = 0; j < table.header.size() && j < row.size(); ++j) {
      // Numeric-looking cells stay numbers in the mirror.
      char* end = nullptr;
      const double v = std::strtod(row[j].c_str(), &end);
      if (!row[j].empty() && end != row[j].c_str() && *end == '\0') {
        obj[table.header[j]] = v;
      } else {
        obj[table.header[j]] = row[j];
      }
    }
    arr.push_back(obj);
  }
  std::ofstream out(path);
  if (!out) {
    throw DataError("json: cannot write '" + path + "'");
  }
  out << arr.dump(2) << "\n";
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  return buf;
}

std::string format_fixed2(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("config: cannot open '" + path + "'");
  }
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError("config: line " + std::to_string(row) +
                      " is not 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw DataError("config: empty key at line " + std::to_string(row));
    }
    out[key] = value;
  }
  return out;
}

}  // namespace hqrwaci
