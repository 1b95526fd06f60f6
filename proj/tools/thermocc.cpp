// thermocc: run a quench, compare two runs, or print the generated equations.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "thermocc/cli.hpp"
#include "thermocc/dmcc.hpp"
#include "thermocc/wick.hpp"

using namespace thermocc;

namespace {

constexpr int kConfigExit = 2;
constexpr int kCapacityExit = 3;
constexpr int kNumericalExit = 4;

int run(const std::string& method_name, const std::string& config_path, const std::string& out_path,
        const std::string& state_path) {
  const RunMethod method = parse_method(method_name);
  const SiamConfig config = resolve_config(parse_config_file(config_path), method);
  if (!state_path.empty() && method != RunMethod::tebd) throw ConfigError("--state-out needs --method tebd");
  MpsState final_state;
  const TrajectoryRecord rec = run_method(method, config, state_path.empty() ? nullptr : &final_state);
  write_csv_file(out_path, rec);
  if (!state_path.empty()) {
    std::ofstream os(state_path, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + state_path + "'");
    final_state.save(os);
  }
  std::cerr << method_name << ": " << rec.size() << " records written to " << out_path << '\n';
  return 0;
}

int compare_files(const std::string& a, const std::string& b) {
  print_report(std::cout, compare(read_csv_file(a), read_csv_file(b)));
  return 0;
}

int dump_equations(const std::string& config_path, const std::string& method_name) {
  const RunMethod method = parse_method(method_name);
  if (method != RunMethod::dmcc_s && method != RunMethod::dmcc_sd)
    throw ConfigError("dump-equations needs --method dmcc-s or dmcc-sd");
  const SiamConfig config = resolve_config(parse_config_file(config_path), method);
  const DmccPropagator prop(config, method == RunMethod::dmcc_s ? DmccMethod::singles : DmccMethod::singles_doubles);
  std::cout << dump_program(prop.program());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermo-field coupled-cluster dynamics of the Anderson impurity model"};
  app.require_subcommand(1);

  std::string method;
  std::string config;
  std::string out;
  std::string state_out;
  auto* run_cmd = app.add_subcommand("run", "propagate one quench and write a CSV trajectory");
  run_cmd->add_option("--method", method, "dmcc-s, dmcc-sd, tebd, dense or quadratic")->required();
  run_cmd->add_option("--config", config, "key = value config file")->required();
  run_cmd->add_option("--out", out, "output CSV path")->required();
  run_cmd->add_option("--state-out", state_out, "binary dump of the final MPS (tebd only)");

  std::string csv_a;
  std::string csv_b;
  auto* cmp_cmd = app.add_subcommand("compare", "per-column deviations between two runs on the same time grid");
  cmp_cmd->add_option("a", csv_a, "first CSV")->required();
  cmp_cmd->add_option("b", csv_b, "second CSV")->required();

  std::string dump_config;
  std::string dump_method = "dmcc-sd";
  auto* dump_cmd = app.add_subcommand("dump-equations", "print the generated amplitude equations");
  dump_cmd->add_option("--config", dump_config, "key = value config file")->required();
  dump_cmd->add_option("--method", dump_method, "dmcc-s or dmcc-sd")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*run_cmd) return run(method, config, out, state_out);
    if (*cmp_cmd) return compare_files(csv_a, csv_b);
    if (*dump_cmd) return dump_equations(dump_config, dump_method);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kCapacityExit;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
