// Command-line driver: gradient-check suite, attention benchmark, toy
// synthetic training, KITTI-format evaluation, and file inspection.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mono3d/commands.hpp"
#include "mono3d/config.hpp"

using namespace mono3d;

int main(int argc, char** argv) {
  CLI::App app{"desk-scale monocular 3D detection toolkit"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path, dump_path, seed_str;
  std::vector<std::string> overrides;
  bool parallel = false;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed_str, "override the base RNG seed");
  app.add_option("--set", overrides, "config overrides, key=value")->take_all();
  app.add_option("--dump-config", dump_path, "write the effective config and continue");
  app.add_flag("--parallel", parallel, "parallelize across independent files (eval only)");
  app.add_flag_callback("--defaults", [] {
    std::cout << RunConfig::documented_defaults();
    std::exit(0);
  });

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  auto* bench_cmd = app.add_subcommand("bench", "attention kernel benchmark (CSV)");
  auto* train_cmd = app.add_subcommand("train-toy", "overfit synthetic scenes; curve + AP40");
  auto* eval_cmd = app.add_subcommand("eval", "AP40 over KITTI-format result/label dirs");
  std::string det_dir, gt_dir;
  eval_cmd->add_option("det_dir", det_dir, "directory of result files")->required();
  eval_cmd->add_option("gt_dir", gt_dir, "directory of label files")->required();
  auto* inspect_cmd = app.add_subcommand("inspect", "pretty-print a fixture or data file");
  std::string inspect_path;
  inspect_cmd->add_option("path", inspect_path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // malformed invocation is an input error
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const std::string& kv : overrides) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos) throw InputError("--set expects key=value, got: " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!seed_str.empty()) cfg.set("seed", seed_str);
    if (!dump_path.empty()) {
      std::ofstream f(dump_path);
      if (!f) throw InputError("cannot write " + dump_path);
      f << cfg.dump();
    }

    if (gradcheck_cmd->parsed()) return cmd_gradcheck(cfg, std::cout);
    if (bench_cmd->parsed()) return cmd_bench(cfg, std::cout, parallel);
    if (train_cmd->parsed()) return cmd_train_toy(cfg, std::cout);
    if (eval_cmd->parsed()) return cmd_eval(det_dir, gt_dir, cfg, std::cout, parallel);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_path, std::cout);
    if (!dump_path.empty()) return 0;
    std::cout << app.help();
    return 0;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
