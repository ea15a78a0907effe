#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "phihilfer/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = phihilfer::cli;
  CLI::App app{"Solver and stability checks for impulsive phi-Hilfer problems"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string mode;
  int levels = 4;

  auto* solve = app.add_subcommand("solve", "Solve the problem and write the per-node CSV");
  solve->add_option("--config", config, "JSON problem file")->required();
  solve->add_option("--out", out, "CSV path (stdout when omitted)");

  auto* bounds = app.add_subcommand("bounds", "Print the stability constants");
  bounds->add_option("--config", config, "JSON problem file")->required();

  auto* verify = app.add_subcommand("verify", "Check a stability bound against a perturbed solve");
  verify->add_option("--config", config, "JSON problem file")->required();
  verify->add_option("--mode", mode, "Perturbation block")
      ->required()
      ->check(CLI::IsMember({"uh", "uhr", "ic", "data", "order"}));
  verify->add_option("--out", out, "CSV path (stdout when omitted)");

  auto* conv = app.add_subcommand("convergence", "Refinement study over doubling node counts");
  conv->add_option("--config", config, "JSON problem file")->required();
  conv->add_option("--levels", levels, "Number of refinement levels (>= 3)");
  conv->add_option("--out", out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kSuccess : cli::kConfigError;
  }

  return cli::run_command(
      [&] {
        if (*solve) return cli::cmd_solve(config, out, std::cout);
        if (*bounds) return cli::cmd_bounds(config, std::cout);
        if (*verify) return cli::cmd_verify(config, mode, out, std::cout);
        return cli::cmd_convergence(config, levels, out, std::cout);
      },
      std::cerr);
}
