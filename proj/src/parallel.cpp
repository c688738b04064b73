// SPDX-License-Identifier: Apache-2.0
#include "prunekit/parallel.hpp"

#include <charconv>
#include <string>

#include "prunekit/error.hpp"

namespace prunekit {

unsigned resolve_threads(std::string_view spec) {
  if (spec.empty() || spec == "auto") return std::max(1u, std::thread::hardware_concurrency());
  unsigned n = 0;
  auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), n);
  if (ec != std::errc{} || ptr != spec.data() + spec.size() || n == 0)
    throw Error(ErrorCode::InvalidArgument, "thread count must be a positive integer or 'auto', got '" +
                                                std::string(spec) + "'");
  return n;
}

}  // namespace prunekit
