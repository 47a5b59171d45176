#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "meu/model.hpp"
#include "meu/trace.hpp"

namespace meu {

/// Bayes network in UAI text form. Tables are linear, row-major with the
/// last scope variable varying fastest; a CPT's child is its last scope
/// variable.
struct UaiNetwork {
  std::vector<int> cards;
  std::vector<std::vector<int>> scopes;
  std::vector<std::vector<double>> tables;

  bool operator==(const UaiNetwork&) const = default;
};

UaiNetwork parse_uai(std::string_view text);
std::string write_uai(const UaiNetwork& net);

/// Converts a Bayes net into an influence diagram: each leaf becomes a
/// utility equal to its CPT clamped at a uniformly drawn state, and a
/// uniformly drawn `decision_fraction` of the non-leaf variables become
/// decisions. Surviving variables are renumbered densely in original order.
InfluenceDiagram bn_to_id(const UaiNetwork& bn, double decision_fraction,
                          std::uint64_t seed,
                          UtilityMode mode = UtilityMode::multiplicative);

/// Plain-text influence diagram format (see docs/id_format.md).
InfluenceDiagram parse_id(std::string_view text);
std::string write_id(const InfluenceDiagram& id);

InfluenceDiagram read_id_file(const std::string& path);
UaiNetwork read_uai_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

inline constexpr std::string_view kTraceHeader =
    "algorithm,junction,seed,iter,temp_or_w,rounded_eu,soft_eu,residual,ms";

/// Shortest-round-trip-safe decimal form (17 significant digits).
std::string format_real(double x);

void write_trace(const std::vector<TraceRow>& rows, std::ostream& out);
void write_trace(const std::vector<TraceRow>& rows, const std::string& path);

}  // namespace meu
