// passk: command-line front end. See README.md for the config schemas.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "passk/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pass@K policy-gradient toolkit"};
  app.require_subcommand(1);

  std::string config, out, format;
  for (const char* name : {"curves", "surrogates", "train", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out, "output file (default: stdout)");
    sub->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? passk::cli::kExitOk : passk::cli::kExitConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return passk::cli::run_command(command, config, out, format, std::cout, std::cerr, std::cerr);
}
