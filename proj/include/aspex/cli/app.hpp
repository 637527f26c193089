// Copyright 2026 The Aspex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <deque>
#include <functional>
#include <iostream>
#include <ostream>
#include <string>

#include "aspex/cli/commands.hpp"

namespace aspex::cli {

/// Command line front end. Options may also come from a TOML/INI file given
/// with --config; global keys sit at the top level and each command reads its
/// own [section]. Flags on the command line win over file values.
///
/// Exit status: 0 success, 1 runtime failure, 2 invalid configuration,
/// 3 unknown or missing command, 4 checkpoint not found.
class Application {
 public:
  Application() : app_("aspex: aspect-aware explanation generation") {
    app_.set_config("--config", "", "TOML or INI configuration file");
    app_.add_option("--seed", seed_, "root seed for every random stream")->capture_default_str();
    app_.add_flag("--dry-run", dry_run_, "validate the configuration and stop");
    app_.require_subcommand(1);
    app_.fallthrough();

    add("prepare-data", "segment raw reviews and write k warm-start folds", prepare_,
        [this](std::ostream& o) { return run_prepare(prepare_, seed_, o); });
    add("train", "two-stage training of one fold", train_,
        [this](std::ostream& o) { return run_train(train_, seed_, o); });
    add("generate", "write explanations for a split", generate_,
        [this](std::ostream& o) { return run_generate(generate_, seed_, o); });
    add("evaluate", "compute the metrics report for a generations file", evaluate_,
        [this](std::ostream& o) { return run_evaluate(evaluate_, seed_, o); });
    add("rag-explain", "retrieve reviews and rewrite explanations with a reader", rag_,
        [this](std::ostream& o) { return run_rag(rag_, seed_, o); });
    add("analyze-aspects", "nearest features, embedding export and the BLEU elbow", analyze_,
        [this](std::ostream& o) { return run_analyze(analyze_, seed_, o); });
  }

  int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app_.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app_.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      if (app_.get_subcommands().empty() && (dynamic_cast<const CLI::ExtrasError*>(&e) ||
                                             dynamic_cast<const CLI::RequiredError*>(&e))) {
        const std::string word = first_positional(argc, argv);
        err << "error: " << (word.empty() ? "no command given" : "unknown command '" + word + "'") << '\n'
            << "commands: prepare-data, train, generate, evaluate, rag-explain, analyze-aspects\n";
        return kExitUnknownCommand;
      }
      err << "error: " << e.what() << '\n';
      return kExitInvalidConfig;
    }
    Command* active = nullptr;
    for (auto& c : commands_) {
      if (c.app->parsed()) active = &c;
    }
    if (active == nullptr) {
      err << "error: no command given\n";
      return kExitUnknownCommand;
    }

    try {
      active->validate();
    } catch (const MissingCheckpoint& e) {
      err << "error: " << e.what() << '\n';
      return kExitMissingCheckpoint;
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << '\n';
      return kExitInvalidConfig;
    }
    if (dry_run_) {
      out << "configuration is valid\n" << active->config().dump(2) << '\n';
      return kExitOk;
    }

    try {
      return active->execute(out);
    } catch (const MissingCheckpoint& e) {
      err << "error: " << e.what() << '\n';
      return kExitMissingCheckpoint;
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << '\n';
      return kExitInvalidConfig;
    } catch (const ReaderError& e) {
      err << "error: " << e.what() << "\nprompt follows:\n" << e.prompt() << '\n';
      return kExitRuntimeError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntimeError;
    }
  }

 private:
  /// First argument that is neither an option nor the value of a global one.
  static std::string first_positional(int argc, const char* const* argv) {
    for (int k = 1; k < argc; ++k) {
      const std::string a = argv[k];
      if (a == "--config" || a == "--seed") {
        ++k;
        continue;
      }
      if (!a.empty() && a[0] != '-') return a;
    }
    return {};
  }

  struct Command {
    CLI::App* app;
    std::function<void()> validate;
    std::function<json()> config;
    std::function<int(std::ostream&)> execute;
  };

  template <typename Options>
  void add(const char* name, const char* help, Options& opt, std::function<int(std::ostream&)> exec) {
    CLI::App* sub = app_.add_subcommand(name, help);
    opt.bind(*sub);
    commands_.push_back(Command{sub, [&opt] { opt.validate(); },
                                [&opt, this] {
                                  json j = opt.to_json();
                                  j["seed"] = seed_;
                                  return j;
                                },
                                std::move(exec)});
  }

  CLI::App app_;
  std::uint64_t seed_ = 0;
  bool dry_run_ = false;
  PrepareOptions prepare_;
  TrainOptions train_;
  GenerateOptions generate_;
  EvaluateOptions evaluate_;
  RagOptions rag_;
  AnalyzeOptions analyze_;
  std::deque<Command> commands_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Application app;
  return app.run(argc, argv, out, err);
}

}  // namespace aspex::cli
