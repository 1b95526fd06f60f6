#include "thermocc/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "thermocc/dense_oracle.hpp"
#include "thermocc/dmcc.hpp"
#include "thermocc/tebd_oracle.hpp"

namespace thermocc {

namespace {

const std::map<std::string, RunMethod>& method_names() {
  static const std::map<std::string, RunMethod> names{{"dmcc-s", RunMethod::dmcc_s},
                                                      {"dmcc-sd", RunMethod::dmcc_sd},
                                                      {"tebd", RunMethod::tebd},
                                                      {"dense", RunMethod::dense},
                                                      {"quadratic", RunMethod::quadratic}};
  return names;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, bool& ok) {
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, x);
  ok = ec == std::errc{} && ptr == end && std::isfinite(x);
  return x;
}

int parse_int(const std::string& text, bool& ok) {
  int x = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, x);
  ok = ec == std::errc{} && ptr == end;
  return x;
}

bool parse_bool(const std::string& text, bool& ok) {
  ok = true;
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  ok = false;
  return false;
}

using Setter = std::function<bool(SiamConfig&, const std::string&)>;

Setter real(double SiamConfig::*field) {
  return [field](SiamConfig& c, const std::string& v) {
    bool ok = false;
    c.*field = parse_double(v, ok);
    return ok;
  };
}

Setter integer(int SiamConfig::*field) {
  return [field](SiamConfig& c, const std::string& v) {
    bool ok = false;
    c.*field = parse_int(v, ok);
    return ok;
  };
}

const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys{
      {"epsilon0", real(&SiamConfig::epsilon0)},
      {"V", real(&SiamConfig::V)},
      {"U", real(&SiamConfig::U)},
      {"temperature", real(&SiamConfig::temperature)},
      {"gamma", real(&SiamConfig::gamma)},
      {"delta_eps", real(&SiamConfig::delta_eps)},
      {"omega", real(&SiamConfig::omega)},
      {"lambda_disc", real(&SiamConfig::lambda_disc)},
      {"n_bath", integer(&SiamConfig::n_bath)},
      {"band_halfwidth", real(&SiamConfig::band_halfwidth)},
      {"dt", real(&SiamConfig::dt)},
      {"t_final", real(&SiamConfig::t_final)},
      {"init_imp_occ_alpha", real(&SiamConfig::init_imp_occ_alpha)},
      {"init_imp_occ_beta", real(&SiamConfig::init_imp_occ_beta)},
      {"svd_threshold", real(&SiamConfig::svd_threshold)},
      {"max_bond", integer(&SiamConfig::max_bond)},
      {"output_interval", real(&SiamConfig::output_interval)},
      {"allow_large_doubles",
       [](SiamConfig& c, const std::string& v) {
         bool ok = false;
         c.allow_large_doubles = parse_bool(v, ok);
         return ok;
       }},
  };
  return keys;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

}  // namespace

RunMethod parse_method(const std::string& name) {
  const auto it = method_names().find(name);
  if (it == method_names().end()) throw ConfigError("unknown method '" + name + "'");
  return it->second;
}

std::string to_string(RunMethod m) {
  for (const auto& [name, value] : method_names())
    if (value == m) return name;
  return "?";
}

ConfigFile parse_config(std::istream& in) {
  ConfigFile file;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = config_keys().find(key);
    if (it == config_keys().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    if (value.empty() || !it->second(file.config, value))
      throw ConfigError(where + "malformed value for '" + key + "': '" + value + "'");
    if (key == "n_bath") file.n_bath_set = true;
  }
  return file;
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

SiamConfig resolve_config(const ConfigFile& file, RunMethod method) {
  SiamConfig c = file.config;
  if (!file.n_bath_set && method == RunMethod::dmcc_sd) c.n_bath = kDoublesDefaultMaxBath;
  validate(c);
  record_stride(c.output_interval, c.dt);
  return c;
}

TrajectoryRecord run_method(RunMethod method, const SiamConfig& config, MpsState* state_out) {
  switch (method) {
    case RunMethod::dmcc_s: return run_quench(config, DmccMethod::singles);
    case RunMethod::dmcc_sd: return run_quench(config, DmccMethod::singles_doubles);
    case RunMethod::tebd: return propagate_tebd(config, state_out);
    case RunMethod::dense:
      if (config.n_bath > kDenseCliMaxBath)
        throw CapacityError("dense method refused: n_bath = " + std::to_string(config.n_bath) + " exceeds " +
                            std::to_string(kDenseCliMaxBath));
      return propagate_dense(config);
    case RunMethod::quadratic: return quadratic_oracle(config);
  }
  throw std::logic_error("run_method: unhandled method");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_optional(const std::optional<double>& x) { return x ? format_number(*x) : std::string{}; }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_csv(std::ostream& os, const TrajectoryRecord& record) {
  os << kCsvVersion << '\n';
  if (!record.method().empty()) os << "# method " << record.method() << '\n';
  os << kCsvHeader << '\n';
  for (const auto& p : record.points()) {
    os << format_number(p.time) << ',' << format_number(p.n_imp_alpha) << ',' << format_number(p.n_imp_beta) << ','
       << format_number(p.n_total) << ',' << format_number(p.polarization) << ',' << format_number(p.n_electrons)
       << ',' << format_optional(p.trace_dev) << ',' << format_optional(p.herm_dev) << ','
       << format_optional(p.discarded_weight) << '\n';
  }
}

void write_csv_file(const std::string& path, const TrajectoryRecord& record) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  write_csv(os, record);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

TrajectoryRecord read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvVersion) throw ConfigError("missing '# thermocc-csv v1' header");
  std::string method;
  int line_no = 1;
  bool have_header = false;
  TrajectoryRecord rec;
  std::vector<TrajectoryPoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# method ", 0) == 0) method = trim(line.substr(9));
      continue;
    }
    if (!have_header) {
      if (line != kCsvHeader) throw ConfigError("line " + std::to_string(line_no) + ": unexpected column header");
      have_header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != 9) throw ConfigError("line " + std::to_string(line_no) + ": expected 9 columns");
    auto required = [&](std::size_t k) {
      bool ok = false;
      const double x = parse_double(cells[k], ok);
      if (!ok) throw ConfigError("line " + std::to_string(line_no) + ": bad number '" + cells[k] + "'");
      return x;
    };
    auto optional = [&](std::size_t k) -> std::optional<double> {
      if (cells[k].empty()) return std::nullopt;
      return required(k);
    };
    TrajectoryPoint p;
    p.time = required(0);
    p.n_imp_alpha = required(1);
    p.n_imp_beta = required(2);
    p.n_electrons = required(5);
    p.trace_dev = optional(6);
    p.herm_dev = optional(7);
    p.discarded_weight = optional(8);
    points.push_back(p);
  }
  if (!have_header) throw ConfigError("missing column header");
  rec = TrajectoryRecord(method);
  for (const auto& p : points) rec.push(p);
  return rec;
}

TrajectoryRecord read_csv_file(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return read_csv(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Comparison

const ColumnDeviation& ComparisonReport::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.column == name) return c;
  throw std::out_of_range("no column '" + name + "'");
}

double ComparisonReport::max_population() const {
  return std::max(column("n_imp_alpha").max_abs, column("n_imp_beta").max_abs);
}

ComparisonReport compare(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  if (a.size() != b.size())
    throw ConfigError("time grids differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                      " points");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a[k].time - b[k].time) > 1e-9 * std::max(1.0, std::abs(a[k].time)))
      throw ConfigError("time grids differ at point " + std::to_string(k) + ": t = " + format_number(a[k].time) +
                        " vs " + format_number(b[k].time));

  using Get = std::function<std::optional<double>(const TrajectoryPoint&)>;
  const std::vector<std::pair<std::string, Get>> columns{
      {"n_imp_alpha", [](const TrajectoryPoint& p) { return std::optional<double>(p.n_imp_alpha); }},
      {"n_imp_beta", [](const TrajectoryPoint& p) { return std::optional<double>(p.n_imp_beta); }},
      {"n_total", [](const TrajectoryPoint& p) { return std::optional<double>(p.n_total); }},
      {"polarization", [](const TrajectoryPoint& p) { return std::optional<double>(p.polarization); }},
      {"n_electrons", [](const TrajectoryPoint& p) { return std::optional<double>(p.n_electrons); }},
      {"trace_dev", [](const TrajectoryPoint& p) { return p.trace_dev; }},
      {"herm_dev", [](const TrajectoryPoint& p) { return p.herm_dev; }},
      {"discarded_weight", [](const TrajectoryPoint& p) { return p.discarded_weight; }},
  };

  ComparisonReport report;
  report.points = a.size();
  for (const auto& [name, get] : columns) {
    ColumnDeviation d;
    d.column = name;
    d.compared = a.size() > 0;
    double sum_abs = 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size() && d.compared; ++k) {
      const auto x = get(a[k]);
      const auto y = get(b[k]);
      if (!x || !y) {
        d.compared = false;
        break;
      }
      const double diff = *x - *y;
      d.max_abs = std::max(d.max_abs, std::abs(diff));
      sum_abs += std::abs(diff);
      sum += diff;
    }
    if (d.compared) {
      d.mean_abs = sum_abs / static_cast<double>(a.size());
      d.mean_signed = sum / static_cast<double>(a.size());
    } else {
      d.max_abs = 0.0;
    }
    report.columns.push_back(d);
  }
  return report;
}

void print_report(std::ostream& os, const ComparisonReport& report) {
  os << "column,max_abs,mean_abs,mean_signed\n";
  double max_abs = 0.0;
  for (const auto& c : report.columns) {
    if (!c.compared) {
      os << c.column << ",,,\n";
      continue;
    }
    os << c.column << ',' << format_number(c.max_abs) << ',' << format_number(c.mean_abs) << ','
       << format_number(c.mean_signed) << '\n';
    max_abs = std::max(max_abs, c.max_abs);
  }
  const double pop = report.points ? report.max_population() : 0.0;
  const double signed_total = report.points ? report.column("n_total").mean_signed : 0.0;
  os << "SUMMARY points=" << report.points << " max_abs=" << format_number(max_abs)
     << " max_population=" << format_number(pop) << " mean_signed_n_total=" << format_number(signed_total) << '\n';
}

}  // namespace thermocc
