#pragma once

// =============================================================================
// econoport - Modified nodal analysis engine
// =============================================================================
// Unknowns are node incentives (ground eliminated) followed by the flows of
// incentive-defined branches (demand, mutual pair, incentive sources, meters,
// voltage-output controlled sources) and the internal states of rational
// controlled sources. The system is written as
//
//     G x + f(x) + d/dt (C x) = b(t)
//
// with f the nonlinear element currents. DC drops the derivative, AC solves
// (G + J + s C) X = B at s = i*2*pi*f, transient integrates the charge term
// with trapezoidal or backward-Euler companions.
//
// Flow sign conventions: passive elements and meters report the flow entering
// their + terminal; sources report the flow they deliver out of + into the
// network.
// =============================================================================

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "econoport/netlist.hpp"

namespace econoport {

struct SolverOptions {
    double reltol = 1e-6;
    /// Absolute tolerance on flows.
    double abstol = 1e-12;
    /// Absolute tolerance on incentives.
    double vabstol = 1e-9;
    /// Node-to-ground conductance used only for the DC operating point.
    double gmin = 1e-12;
    int max_iters = 200;
    std::optional<std::uint64_t> seed;

    /// Defaults overridden by the deck's .OPTIONS.
    [[nodiscard]] static SolverOptions from_circuit(const FlatCircuit& circuit);
};

struct ProbeColumn {
    std::string label;
    std::string unit;
};

struct OperatingPoint {
    std::vector<ProbeColumn> columns;
    std::vector<double> values;
    int newton_iters = 0;
    /// Largest nodal flow imbalance, gmin leakage excluded.
    double max_node_residual = 0.0;
    std::vector<double> x;

    [[nodiscard]] double value(const std::string& label) const;
};

struct TimeSeries {
    IntegrationMethod method = IntegrationMethod::Trap;
    std::vector<double> times;
    std::vector<ProbeColumn> columns;
    std::vector<std::vector<double>> values;
    /// Per time point: largest nodal flow imbalance.
    std::vector<double> node_residual;
    /// Per time point: largest port-condition residual over instrumented groups.
    std::vector<double> port_residual;

    [[nodiscard]] const std::vector<double>& series(const std::string& label) const;
    [[nodiscard]] bool has(const std::string& label) const;
};

struct Spectrum {
    std::vector<double> freqs;
    std::vector<ProbeColumn> columns;
    std::vector<std::vector<std::complex<double>>> values;
    std::vector<std::vector<double>> magnitude_db;
    /// Unwrapped along frequency, degrees.
    std::vector<std::vector<double>> phase_deg;
    /// Per frequency point: empty, or the reason the point was skipped.
    std::vector<std::string> gaps;

    [[nodiscard]] std::size_t index(const std::string& label) const;
};

/// Extra probes beyond the deck's .PROBE list. Source waveforms are
/// evaluated at at_time.
[[nodiscard]] OperatingPoint dc_op(const FlatCircuit& circuit, const SolverOptions& opts = {},
                                   const std::vector<ProbeRef>& extra = {}, double at_time = 0.0);

[[nodiscard]] TimeSeries transient(const FlatCircuit& circuit, const TranDirective& tran,
                                   const SolverOptions& opts = {}, const std::vector<ProbeRef>& extra = {});

[[nodiscard]] Spectrum ac_sweep(const FlatCircuit& circuit, const std::vector<double>& freqs,
                                const SolverOptions& opts = {}, const std::vector<ProbeRef>& extra = {});

/// Unwrap a phase sequence in degrees so consecutive samples differ by <= 180.
[[nodiscard]] std::vector<double> unwrap_degrees(const std::vector<double>& phase);

// =============================================================================
// Result emission
// =============================================================================

/// Extra columns (e.g. metrics) appended to a time series before writing.
struct ExtraColumn {
    ProbeColumn column;
    std::vector<double> values;
};

[[nodiscard]] std::string to_csv(const OperatingPoint& op);
[[nodiscard]] std::string to_csv(const TimeSeries& ts, const std::vector<ExtraColumn>& extra = {});
[[nodiscard]] std::string to_csv(const Spectrum& sp);
[[nodiscard]] std::string to_json(const OperatingPoint& op);
[[nodiscard]] std::string to_json(const TimeSeries& ts, const std::vector<ExtraColumn>& extra = {});
[[nodiscard]] std::string to_json(const Spectrum& sp);

}  // namespace econoport
