#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "cpl/commands.hpp"
#include "cpl/config.hpp"
#include "cpl/errors.hpp"

namespace {

// Registers `--<key>` for every config key and remembers what was given.
struct KeyFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "sectioned key=value config file");
    for (const auto& key : cpl::config_keys()) {
      std::string names = "--" + key.name;
      if (key.name == "t_end") names += ",--T";
      app.add_option(names, values[key.name], "[" + key.section + "] " + key.help);
    }
  }

  [[nodiscard]] std::vector<std::pair<std::string, std::string>> overrides(const CLI::App& app) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& key : cpl::config_keys()) {
      if (app.count("--" + key.name) > 0) out.emplace_back(key.name, values.at(key.name));
    }
    return out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conservation-projected PINN training, verification and reference solves"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train one model and write metrics, checkpoint and (alpha, beta) table");
  auto* verify = app.add_subcommand("verify", "run every module's invariant checks");
  auto* sweep = app.add_subcommand("sweep", "train across one axis and write a scaling CSV");
  auto* reference = app.add_subcommand("reference", "solve (or load) a finite-difference reference and write c(t)");

  KeyFlags train_flags;
  KeyFlags sweep_flags;
  KeyFlags reference_flags;
  train_flags.attach(*train);
  sweep_flags.attach(*sweep);
  reference_flags.attach(*reference);
  cpl::VerifyOptions verify_options;
  verify->add_option("--inject-fault", verify_options.inject_fault, "plant a known bug: jacobian_sign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cpl::kExitConfig;
  }

  return cpl::run_guarded(
      [&]() -> int {
        if (verify->parsed()) return cpl::cmd_verify(verify_options, std::cout);
        CLI::App* sub = train->parsed() ? train : sweep->parsed() ? sweep : reference;
        const KeyFlags& flags = sub == train ? train_flags : sub == sweep ? sweep_flags : reference_flags;
        const cpl::RunConfig config = cpl::resolve_config(flags.config_file, flags.overrides(*sub));
        if (sub == train) return cpl::cmd_train(config, std::clog);
        if (sub == sweep) return cpl::cmd_sweep(config, std::clog);
        return cpl::cmd_reference(config, std::clog);
      },
      std::cerr);
}
