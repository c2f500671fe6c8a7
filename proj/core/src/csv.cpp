#include "survkit/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace survkit {

namespace {

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::vector<std::string>> read_csv_table(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(trim(field));
        field.clear();
      } else {
        field += c;
      }
    }
    if (quoted) throw input_error("csv: unterminated quoted field");
    fields.push_back(trim(field));
    const bool blank =
        fields.size() == 1 && fields[0].empty();
    if (!blank) rows.push_back(std::move(fields));
  }
  return rows;
}

SurvDataset read_dataset_csv(const std::string& csv_path, const std::string& schema_path) {
  std::ifstream in(csv_path);
  if (!in) throw input_error("cannot open CSV file '" + csv_path + "'");
  const auto table = read_csv_table(in);
  if (table.size() < 2) throw input_error("csv: need a header row and at least one data row");

  const auto& header = table.front();
  for (std::size_t a = 0; a < header.size(); ++a)
    for (std::size_t b = a + 1; b < header.size(); ++b)
      if (header[a] == header[b])
        throw input_error("csv: duplicate column '" + header[a] + "'");

  int time_col = -1, event_col = -1;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "time")
      time_col = static_cast<int>(c);
    else if (header[c] == "event")
      event_col = static_cast<int>(c);
    else
      cov_cols.push_back(c);
  }
  if (time_col < 0) throw input_error("csv: missing required column 'time'");
  if (event_col < 0) throw input_error("csv: missing required column 'event'");

  for (std::size_t r = 1; r < table.size(); ++r)
    if (table[r].size() != header.size())
      throw input_error("csv: row " + std::to_string(r + 1) + " has " +
                        std::to_string(table[r].size()) + " fields, expected " +
                        std::to_string(header.size()));

  // Sidecar declarations: name -> (categorical?, optional levels).
  std::map<std::string, std::pair<bool, std::vector<std::string>>> declared;
  if (!schema_path.empty()) {
    std::ifstream sin(schema_path);
    if (!sin) throw input_error("cannot open schema file '" + schema_path + "'");
    nlohmann::json j;
    try {
      sin >> j;
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("schema file: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw input_error("schema file: top level must be an object");
    for (const auto& [name, v] : j.items()) {
      if (v.is_string()) {
        const std::string kind = v.get<std::string>();
        if (kind == "categorical")
          declared[name] = {true, {}};
        else if (kind == "numeric")
          declared[name] = {false, {}};
        else
          throw input_error("schema file: unknown kind '" + kind + "' for '" + name + "'");
      } else if (v.is_object() && v.contains("categorical") && v["categorical"].is_array()) {
        std::vector<std::string> levels;
        for (const auto& l : v["categorical"]) levels.push_back(l.get<std::string>());
        declared[name] = {true, std::move(levels)};
      } else {
        throw input_error("schema file: bad declaration for '" + name + "'");
      }
      if (name == "time" || name == "event")
        throw input_error("schema file: 'time'/'event' cannot be declared as covariates");
    }
    for (const auto& [name, d] : declared)
      if (std::find(header.begin(), header.end(), name) == header.end())
        throw input_error("schema file: column '" + name + "' not present in CSV");
  }

  Schema schema;
  std::vector<std::map<std::string, std::size_t>> level_code(cov_cols.size());
  for (std::size_t k = 0; k < cov_cols.size(); ++k) {
    const std::size_t c = cov_cols[k];
    CovariateSpec spec;
    spec.name = header[c];

    auto it = declared.find(spec.name);
    bool categorical;
    std::vector<std::string> levels;
    if (it != declared.end()) {
      categorical = it->second.first;
      levels = it->second.second;
    } else {
      categorical = false;
      for (std::size_t r = 1; r < table.size() && !categorical; ++r)
        if (!parse_double(table[r][c])) categorical = true;
    }
    if (categorical && levels.empty()) {
      std::set<std::string> seen;
      for (std::size_t r = 1; r < table.size(); ++r) seen.insert(table[r][c]);
      levels.assign(seen.begin(), seen.end());
    }
    spec.categorical = categorical;
    spec.levels = std::move(levels);
    if (categorical)
      for (std::size_t l = 0; l < spec.levels.size(); ++l)
        level_code[k][spec.levels[l]] = l;
    schema.covariates.push_back(std::move(spec));
  }

  const std::size_t n = table.size() - 1;
  std::vector<double> times(n), x(n * cov_cols.size());
  std::vector<int> events(n);
  for (std::size_t r = 1; r < table.size(); ++r) {
    const std::size_t i = r - 1;
    auto t = parse_double(table[r][static_cast<std::size_t>(time_col)]);
    if (!t || !(*t > 0.0))
      throw input_error("csv: row " + std::to_string(r + 1) + ": 'time' must be a positive number");
    times[i] = *t;
    auto e = parse_double(table[r][static_cast<std::size_t>(event_col)]);
    if (!e || (*e != 0.0 && *e != 1.0))
      throw input_error("csv: row " + std::to_string(r + 1) + ": 'event' must be 0 or 1");
    events[i] = static_cast<int>(*e);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      const std::string& cell = table[r][cov_cols[k]];
      if (schema.covariates[k].categorical) {
        auto lit = level_code[k].find(cell);
        if (lit == level_code[k].end())
          throw input_error("csv: row " + std::to_string(r + 1) + ": value '" + cell +
                            "' is not a declared level of '" + schema.covariates[k].name + "'");
        x[i * cov_cols.size() + k] = static_cast<double>(lit->second);
      } else {
        auto v = parse_double(cell);
        if (!v)
          throw input_error("csv: row " + std::to_string(r + 1) + ": non-numeric value '" +
                            cell + "' in numeric column '" + schema.covariates[k].name + "'");
        x[i * cov_cols.size() + k] = *v;
      }
    }
  }
  return SurvDataset(std::move(schema), std::move(times), std::move(events), std::move(x));
}

SurvDataset read_dataset_csv(const std::string& csv_path, const Schema& schema) {
  std::ifstream in(csv_path);
  if (!in) throw input_error("cannot open CSV file '" + csv_path + "'");
  const auto table = read_csv_table(in);
  if (table.size() < 2) throw input_error("csv: need a header row and at least one data row");
  const auto& header = table.front();

  int time_col = -1, event_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "time") time_col = static_cast<int>(c);
    if (header[c] == "event") event_col = static_cast<int>(c);
  }
  if (time_col < 0) throw input_error("csv: missing required column 'time'");
  if (event_col < 0) throw input_error("csv: missing required column 'event'");

  std::vector<std::size_t> col_of(schema.n_covariates());
  for (std::size_t j = 0; j < schema.n_covariates(); ++j) {
    auto it = std::find(header.begin(), header.end(), schema.covariates[j].name);
    if (it == header.end())
      throw input_error("csv: missing covariate column '" + schema.covariates[j].name + "'");
    col_of[j] = static_cast<std::size_t>(it - header.begin());
  }

  const std::size_t n = table.size() - 1;
  const std::size_t p = schema.n_covariates();
  std::vector<double> times(n), x(n * p);
  std::vector<int> events(n);
  for (std::size_t r = 1; r < table.size(); ++r) {
    if (table[r].size() != header.size())
      throw input_error("csv: row " + std::to_string(r + 1) + " has " +
                        std::to_string(table[r].size()) + " fields, expected " +
                        std::to_string(header.size()));
    const std::size_t i = r - 1;
    auto t = parse_double(table[r][static_cast<std::size_t>(time_col)]);
    if (!t || !(*t > 0.0))
      throw input_error("csv: row " + std::to_string(r + 1) + ": 'time' must be a positive number");
    times[i] = *t;
    auto e = parse_double(table[r][static_cast<std::size_t>(event_col)]);
    if (!e || (*e != 0.0 && *e != 1.0))
      throw input_error("csv: row " + std::to_string(r + 1) + ": 'event' must be 0 or 1");
    events[i] = static_cast<int>(*e);
    for (std::size_t j = 0; j < p; ++j) {
      const std::string& cell = table[r][col_of[j]];
      const auto& spec = schema.covariates[j];
      if (spec.categorical) {
        auto lit = std::find(spec.levels.begin(), spec.levels.end(), cell);
        if (lit == spec.levels.end())
          throw input_error("csv: row " + std::to_string(r + 1) + ": value '" + cell +
                            "' is not a level of '" + spec.name + "'");
        x[i * p + j] = static_cast<double>(lit - spec.levels.begin());
      } else {
        auto v = parse_double(cell);
        if (!v)
          throw input_error("csv: row " + std::to_string(r + 1) + ": non-numeric value '" +
                            cell + "' in numeric column '" + spec.name + "'");
        x[i * p + j] = *v;
      }
    }
  }
  return SurvDataset(schema, std::move(times), std::move(events), std::move(x));
}

std::vector<std::vector<double>> read_covariate_rows_csv(const std::string& csv_path,
                                                         const Schema& schema) {
  std::ifstream in(csv_path);
  if (!in) throw input_error("cannot open CSV file '" + csv_path + "'");
  const auto table = read_csv_table(in);
  if (table.empty()) throw input_error("csv: missing header row");
  const auto& header = table.front();

  std::vector<std::size_t> col_of(schema.n_covariates());
  for (std::size_t j = 0; j < schema.n_covariates(); ++j) {
    auto it = std::find(header.begin(), header.end(), schema.covariates[j].name);
    if (it == header.end())
      throw input_error("csv: missing covariate column '" + schema.covariates[j].name + "'");
    col_of[j] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::vector<double>> rows;
  rows.reserve(table.size() - 1);
  for (std::size_t r = 1; r < table.size(); ++r) {
    if (table[r].size() != header.size())
      throw input_error("csv: row " + std::to_string(r + 1) + " has " +
                        std::to_string(table[r].size()) + " fields, expected " +
                        std::to_string(header.size()));
    std::vector<double> row(schema.n_covariates());
    for (std::size_t j = 0; j < schema.n_covariates(); ++j) {
      const std::string& cell = table[r][col_of[j]];
      const auto& spec = schema.covariates[j];
      if (spec.categorical) {
        auto it = std::find(spec.levels.begin(), spec.levels.end(), cell);
        if (it == spec.levels.end())
          throw input_error("csv: row " + std::to_string(r + 1) + ": value '" + cell +
                            "' is not a level of '" + spec.name + "'");
        row[j] = static_cast<double>(it - spec.levels.begin());
      } else {
        auto v = parse_double(cell);
        if (!v)
          throw input_error("csv: row " + std::to_string(r + 1) + ": non-numeric value '" +
                            cell + "' in numeric column '" + spec.name + "'");
        row[j] = *v;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

namespace {
template <typename Curve>
void write_curve_impl(std::ostream& out, const Curve& curve) {
  out << "time,value\n";
  for (std::size_t j = 0; j < curve.grid.size(); ++j)
    out << format_double(curve.grid[j]) << ',' << format_double(curve.values[j]) << '\n';
}
}  // namespace

void write_curve_csv(std::ostream& out, const SurvivalCurve& curve) {
  write_curve_impl(out, curve);
}
void write_curve_csv(std::ostream& out, const CumHazardCurve& curve) {
  write_curve_impl(out, curve);
}

}  // namespace survkit
