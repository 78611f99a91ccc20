// Copyright 2026 the arscale authors
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

#include "arscale/textio.hpp"

#include <charconv>
#include <system_error>

namespace arscale {

std::string format_double(double value, int significant_digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::general,
                                 significant_digits);
  return std::string(buf, res.ptr);
}

}  // namespace arscale
