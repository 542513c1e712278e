// Copyright 2026 The mi6sim Authors
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


// Command-line front end: simulate, verify and sweep.

#ifndef MI6_CLI_HPP_
#define MI6_CLI_HPP_

#include <ostream>

namespace mi6 {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;  // also: a verification suite failed
constexpr int kExitInput = 2;   // trace, schedule or monitor error
constexpr int kExitSim = 3;     // invariant abort

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mi6

#endif  // MI6_CLI_HPP_
