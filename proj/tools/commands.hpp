#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "supcal/config.hpp"

namespace supcal::cli {

struct Overrides {
  std::optional<std::string> loss;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> loop;
};

void apply(RunConfig& cfg, const Overrides& o);

// Returns the process exit code; library errors propagate to the caller.
int run(Mode mode, const RunConfig& cfg, std::ostream& log);

}  // namespace supcal::cli
