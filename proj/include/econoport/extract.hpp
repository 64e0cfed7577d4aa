#pragma once

// =============================================================================
// econoport - Numerical 2-port extraction and Bode measurement
// =============================================================================
// A subcircuit with two declared ports is placed on a bench whose port minus
// terminals are grounded. Y is measured with incentive drives and the opposite
// port shorted, Z with flow drives and the opposite port open; T, H and G are
// converted from Y (or from Z where the Y experiment is singular).
// =============================================================================

#include <json.hpp>
#include <string>
#include <vector>

#include "econoport/engine.hpp"
#include "econoport/twoport.hpp"

namespace econoport {

struct ExtractionRequest {
    /// Library holding the subcircuit definition.
    Netlist library;
    std::string subckt;
    ParameterKind kind = ParameterKind::Y;
    std::vector<double> freqs;
    double amplitude = 1.0;
    SolverOptions opts;
};

struct ExtractedModel {
    ParameterKind kind = ParameterKind::Y;
    std::string subckt;
    std::vector<double> freqs;
    std::vector<ComplexMatrix2> m;
    /// Per point: empty, or why the point was skipped.
    std::vector<std::string> errors;
    /// Per point: 2-norm condition number of the measured matrix.
    std::vector<double> condition;

    [[nodiscard]] bool ok(std::size_t i) const { return errors[i].empty(); }
    [[nodiscard]] std::size_t valid_count() const;
};

[[nodiscard]] ExtractedModel extract_twoport(const ExtractionRequest& req);

struct OracleReport {
    double max_rel_err = 0.0;
    double worst_freq = 0.0;
    std::size_t compared = 0;
};

/// Entrywise relative error of the symbolic model against the measurement,
/// skipping flagged points.
[[nodiscard]] OracleReport oracle_compare(const ParameterModel& model, const ExtractedModel& extracted);

/// Entrywise relative error between two matrices (zero entries measured
/// against the matrix scale).
[[nodiscard]] double matrix_rel_err(const ComplexMatrix2& got, const ComplexMatrix2& want);

/// Response probe over the stimulus element's AC phasor.
[[nodiscard]] Spectrum bode(const FlatCircuit& circuit, const std::string& stimulus, const std::string& probe,
                            const std::vector<double>& freqs, const SolverOptions& opts = {});

/// "log:N:fstart:fstop" or "lin:N:fstart:fstop" (commas also accepted).
[[nodiscard]] std::vector<double> parse_grid(const std::string& text);

/// {"kind","subckt","points":[{"f":..,"m":[[re,im]x4]}],"gaps":[{"f":..,"reason":..}]}
[[nodiscard]] nlohmann::json to_json(const ExtractedModel& model);

}  // namespace econoport
