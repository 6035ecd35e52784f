/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line entry points: build-kg, synth, train, eval, chat, inspect.

#ifndef VRDIAL_CLI_CLI_HPP_
#define VRDIAL_CLI_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace vrdial::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,     // I/O, parse or validation error; aborted training
  kUsage = 2,       // unknown command or flag, missing argument
  kMismatch = 3,    // checkpoint does not match the graph or the format
  kEmptySplit = 4,  // nothing to train or evaluate on
};

// Default directory for data files when a path flag is omitted.
inline constexpr const char* kDataDirEnv = "VRDIAL_DATA_DIR";
std::string data_dir();

// `args` excludes the program name. Chat reads patient lines from `in`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace vrdial::cli

#endif  // VRDIAL_CLI_CLI_HPP_
