// Copyright 2026 The BITRec Authors
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

#include <ostream>

namespace bitrec {

/// Entry point of the bitrec command-line tool. Subcommands: train, eval,
/// ablate, mask-eval, gen-synthetic, grad-check, predict. Settings come from
/// built-in defaults, then --config FILE, then `--key value` flags for any
/// config key. The resolved config is printed to `out` before any work.
/// Returns the process exit code; errors are reported on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bitrec
