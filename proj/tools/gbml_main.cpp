#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <map>

#include "gbml/expcli.hpp"

int main(int argc, char** argv) {
  using namespace gbml::expcli;

  CLI::App app{"Gradient-based meta-learning experiments and construction certificates"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  app.add_option("--config", config_path, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one setting, key=value (repeatable)");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--trials", trials, "evaluation trials (test tasks)");

  const std::map<std::string, std::pair<std::string, std::function<int(const Config&, std::ostream&)>>>
      commands{
          {"certify", {"run every construction certificate", cmd_certify}},
          {"train-sinusoid", {"meta-train on sinusoids and save a checkpoint", cmd_train_sinusoid}},
          {"finetune", {"fine-tuning curves from the checkpoint and from scratch", cmd_finetune}},
          {"ood-sweep", {"post-adaptation error along an extrapolation grid", cmd_ood_sweep}},
          {"depth-sweep", {"MAML versus task-conditioned regression across depths", cmd_depth_sweep}},
          {"dump-tasks", {"write the seeded task stream", cmd_dump_tasks}},
      };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg;
    if (!config_path.empty()) cfg.load(config_path);
    for (const auto& o : overrides) cfg.set_assignment(o);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (out) cfg.set("out", *out);
    if (trials) cfg.set("trials", std::to_string(*trials));
    const auto* sub = app.get_subcommands().front();
    return commands.at(sub->get_name()).second(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
