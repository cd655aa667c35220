// releaser: generate traces, train margin agents, evaluate strategies.
//
//   releaser generate <scenario.ini> [--output-dir DIR]
//   releaser train    <scenario.ini> [--output-dir DIR]
//   releaser evaluate <scenario.ini> [--output-dir DIR] [--checkpoint-dir DIR]

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "releaser/commands.hpp"

namespace {

struct Args {
  std::string config;
  std::string output_dir;
  std::string checkpoint_dir;
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("config", args.config, "scenario file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", args.output_dir, "overrides [scenario] output_dir");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-margin selection for reclaimed datacenter capacity"};
  app.require_subcommand(1);
  Args args;
  auto* generate = app.add_subcommand("generate", "write a synthetic trace and capacity file");
  auto* train = app.add_subcommand("train", "train one agent per metric on the training split");
  auto* evaluate = app.add_subcommand("evaluate", "compare strategies on the test split");
  for (auto* cmd : {generate, train, evaluate}) add_common(cmd, args);
  evaluate->add_option("--checkpoint-dir", args.checkpoint_dir, "where agent_<metric>.ckpt live (default: output dir)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = releaser::load_scenario(args.config);
    const std::filesystem::path out = args.output_dir.empty() ? cfg.output_dir : std::filesystem::path(args.output_dir);
    if (generate->parsed()) {
      releaser::cmd_generate(cfg, out, std::cout);
    } else if (train->parsed()) {
      releaser::cmd_train(cfg, out, std::cout);
    } else {
      releaser::cmd_evaluate(cfg, out, args.checkpoint_dir.empty() ? out : std::filesystem::path(args.checkpoint_dir),
                             std::cout);
    }
  } catch (const releaser::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
