// One experiment = one scenario file: model parameters, initial populations,
// control law, dose schedule, integrator settings, outcome thresholds, and an
// optional stability certificate. The text format is a nested key-value
// grammar (see docs/scenario-format.md); parse and serialize round-trip.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cart/backstepping.hpp"
#include "cart/errors.hpp"
#include "cart/simulate.hpp"
#include "cart/types.hpp"

namespace cart::cli {

// Parse or validation failure; the message starts with the offending field
// path ("law.tau: ...").
class ScenarioError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

// Lyapunov certificate request. Absent numbers mean "choose automatically":
// k from the sampled coupling bound, xi from the margin rule, u_bound from
// the largest non-active pool the schedule can produce.
struct CertificateSpec {
  std::optional<double> a;  // must equal the law gain when given
  std::optional<double> k;
  std::optional<double> xi;
  std::optional<CertifiedRegion> region;
  std::optional<double> u_bound;

  bool operator==(const CertificateSpec&) const = default;
};

struct AnalysisSpec {
  double clearance_threshold = 1.0;  // cells
  double relapse_factor = 10.0;      // regrowth multiple of the nadir

  bool operator==(const AnalysisSpec&) const = default;
};

struct ScenarioFile {
  ModelParams params;
  State initial;
  ControlLaw law;
  std::vector<DoseEvent> events;
  double horizon = 0.0;  // days
  IntegratorConfig integrator;
  AnalysisSpec analysis;
  std::optional<CertificateSpec> certificate;

  bool operator==(const ScenarioFile&) const = default;
};

// Parses and validates scenario text. Unknown keys, missing required fields,
// malformed numbers and cross-field violations all raise ScenarioError with
// the field named.
ScenarioFile parse_scenario(std::string_view text);

// Reads and parses a scenario file; the filename is reported on failure.
ScenarioFile load_scenario(const std::string& path);

// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioFile& s);

// Resolved certificate, ready to drive a simulation and its monitor.
struct ResolvedCertificate {
  BacksteppingDesign design;
  CertifiedRegion region;
  double u_bound = 0.0;
};

// Fills the auto parts of the certificate: region defaults to
// [0, x1(0)] x [-|z2(0)|, |z2(0)|], u_bound to 1.1x the largest scheduled
// non-active pool, k to the sampled coupling bound, xi to the margin rule.
// When both k and xi are automatic the pair is iterated to a fixed point;
// over a region too large for the published gains that iteration diverges,
// which is reported as a ScenarioError naming certificate.k.
ResolvedCertificate resolve_certificate(
    const ScenarioFile& s,
    std::optional<std::uint64_t> jitter_seed = std::nullopt);

}  // namespace cart::cli
