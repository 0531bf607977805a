// Copyright 2026 The tilegene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tilegene/config.hpp"

namespace tilegene::cli {

// Config layering shared by every subcommand.
struct ConfigSources {
  std::optional<std::string> file;
  std::vector<std::string> sets;              // section.key=value
  std::map<std::string, std::string> flags;   // dedicated flags, applied last
  std::optional<std::size_t> workers;
  bool verbose = false;
};

RunConfig resolve_config(const ConfigSources& sources);

// Parses argv and runs one subcommand. Returns the process exit code:
// 0 success, 1 runtime or data failure, 2 usage or config error.
int run_cli(int argc, char** argv);

struct SynthArgs {
  std::string out;
};

struct BagArgs {
  std::string input;
  std::string out;
  std::optional<std::string> genes;  // expression matrix, already preprocessed unless raw_genes
  bool raw_genes = false;
};

struct GenesArgs {
  std::optional<std::string> matrix;
  std::optional<std::string> case_dir;
  std::string out;
};

struct SplitArgs {
  std::string cases;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::optional<std::string> resume;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

struct ValidateArgs {
  std::vector<std::string> paths;
  std::optional<std::size_t> k, d, genes, classes;
};

int run_synth(const SynthArgs& args, const RunConfig& config);
int run_bag(const BagArgs& args, const RunConfig& config);
int run_genes(const GenesArgs& args, const RunConfig& config);
int run_split(const SplitArgs& args, const RunConfig& config);
int run_train(const TrainArgs& args, const RunConfig& config);
int run_eval(const EvalArgs& args, const RunConfig& config);
int run_search(const EvalArgs& args, const RunConfig& config);
int run_validate(const ValidateArgs& args, const RunConfig& config);

}  // namespace tilegene::cli
