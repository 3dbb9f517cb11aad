// mnflow command-line driver.
//
//   mnflow <subcommand> --config <file> [--out DIR] [--workers N] [--seed S]
//          [--dump-trajectories]
//
// Exit codes: 0 success, 2 config error, 3 numeric failure.

#include <CLI11.hpp>
#include <iostream>

#include "mnflow/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"minimum-norm shallow denoiser flow laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  mnflow::RunOptions opt;
  long long seed_flag = -1;

  const std::vector<std::string> names = {"gen-dataset", "train",        "sample",
                                          "fixed-point", "sweep-n",      "field",
                                          "compare-traj", "stability"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--workers", opt.workers, "worker pool size");
    sub->add_option("--seed", seed_flag, "master seed override");
    sub->add_flag("--dump-trajectories", opt.dump_trajectories, "write trajectory CSV");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    mnflow::Config cfg = mnflow::Config::parse_file(config_path);
    if (seed_flag >= 0) opt.seed = static_cast<std::uint64_t>(seed_flag);
    std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen-dataset")
      mnflow::cmd_gen_dataset(cfg, opt);
    else if (cmd == "train")
      mnflow::cmd_train(cfg, opt);
    else if (cmd == "sample")
      mnflow::cmd_sample(cfg, opt);
    else if (cmd == "fixed-point")
      mnflow::cmd_fixed_point(cfg, opt);
    else if (cmd == "sweep-n")
      mnflow::cmd_sweep_n(cfg, opt);
    else if (cmd == "field")
      mnflow::cmd_field(cfg, opt);
    else if (cmd == "compare-traj")
      mnflow::cmd_compare_traj(cfg, opt);
    else if (cmd == "stability")
      mnflow::cmd_stability(cfg, opt);
  } catch (const mnflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mnflow::IoError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mnflow::InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mnflow::BadSplit& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mnflow::Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
