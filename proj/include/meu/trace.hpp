#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace meu {

/// One iteration of a solver run. `rounded_eu` is the expected utility of
/// the row-argmax rounding of the strategy held at that iteration.
struct TraceRow {
  std::string algorithm;
  std::string junction;
  std::uint64_t seed = 0;
  int iter = 0;
  double temp_or_w = 0.0;
  double rounded_eu = 0.0;
  double soft_eu = 0.0;
  double residual = 0.0;
  double ms = 0.0;
};

using SolveTrace = std::vector<TraceRow>;

}  // namespace meu
