#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "supcal/errors.hpp"

int main(int argc, char** argv) {
  using namespace supcal;
  CLI::App app{"Noise covariance calibration with supervisory loop closures"};
  app.require_subcommand(1);

  std::string config_path;
  cli::Overrides ov;
  std::string loss, loop, out;
  int max_iter = 0;
  std::uint64_t seed = 0;

  struct Sub {
    Mode mode;
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {Mode::Simulate, "simulate", "generate a synthetic scenario"},
      {Mode::Calibrate, "calibrate", "estimate noise parameters"},
      {Mode::Gradcheck, "gradcheck", "compare analytic and finite-difference gradients"},
      {Mode::Evaluate, "evaluate", "score a parameter vector on the test stage"},
      {Mode::MonteCarlo, "montecarlo", "odometry-only vs full loss over random noise draws"},
  };
  std::vector<std::pair<CLI::App*, Mode>> commands;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--loss", loss, "loss to minimize")->check(CLI::IsMember({"full", "odom", "ape", "mse", "innov"}));
    sub->add_option("--max-iter", max_iter, "iteration cap")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out, "report path (default stdout)");
    sub->add_option("--loop", loop, "loop split")->check(CLI::IsMember({"minus", "plus"}));
    commands.emplace_back(sub, s.mode);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  Mode mode = Mode::Calibrate;
  for (const auto& [sub, m] : commands) {
    if (!sub->parsed()) continue;
    mode = m;
    if (sub->count("--loss")) ov.loss = loss;
    if (sub->count("--max-iter")) ov.max_iter = max_iter;
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--out")) ov.out = out;
    if (sub->count("--loop")) ov.loop = loop;
  }

  try {
    RunConfig cfg = load_config(config_path);
    cli::apply(cfg, ov);
    return cli::run(mode, cfg, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
