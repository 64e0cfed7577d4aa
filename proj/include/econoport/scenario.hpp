#pragma once

// =============================================================================
// econoport - Scenario manifests and the expected-property checker
// =============================================================================
// A manifest is a JSON file next to its deck:
//
//   {
//     "name": "bullwhip_supplier",
//     "deck": "bullwhip_supplier.cir",
//     "seed": 7,                                   (optional)
//     "metrics": [ {"name": "gdp", "fn": "gdp", "args": ["I(C)", ...]} ],
//     "checks":  [ {"id": "...", "predicate": "sign", "series": "...", ...} ]
//   }
//
// Series names are probe labels, metric names, or for AC decks probe labels
// whose spectrum is read as magnitude (dB) and phase (deg).
//
// Predicates:
//   approx      series ~ target (number, "op" = DC operating point with sources
//               held at that time, or another series) within tol over a window
//   monotone    nonincreasing / nondecreasing (AC: magnitude) within tol
//   peak-freq   unique interior magnitude maximum near f_expected, with gain
//   sign        positive / negative / nonnegative / nonpositive over a window
//               ("all" points or the window "mean")
//   phase-lag   phase lag at the magnitude peak, compared to a bound or to
//               another scenario's lag at its own peak
//   reduced-vs  a measure (p2p, peak-db, max, min) below another scenario's
//   settled     |d series / dt| <= tol at the end of the run
//   oscillation detrended sign changes >= n (hysteresis band) with a decaying
//               envelope
//   correlation Pearson correlation of two series over a window vs a bound
//   step        mean over an after-window minus mean over a before-window has
//               the requested sign
// =============================================================================

#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "econoport/engine.hpp"
#include "econoport/metrics.hpp"

namespace econoport {

struct MetricSpec {
    std::string name;
    std::string fn;
    std::vector<std::string> args;
};

struct Manifest {
    std::string name;
    std::string deck_path;
    std::string directory;
    std::string description;
    std::optional<std::uint64_t> seed;
    std::vector<MetricSpec> metrics;
    nlohmann::json checks = nlohmann::json::array();
};

[[nodiscard]] Manifest load_manifest(const std::string& path);

/// Everything a deck produced, plus the computed metrics.
struct ScenarioData {
    FlatCircuit circuit;
    std::optional<OperatingPoint> op;
    std::optional<TimeSeries> tran;
    std::optional<Spectrum> ac;
    std::vector<MetricSeries> metrics;
    double seconds = 0.0;

    [[nodiscard]] bool has_series(const std::string& name) const;
    /// Time-domain series (probe or metric).
    [[nodiscard]] const std::vector<double>& series(const std::string& name) const;
    [[nodiscard]] const std::vector<double>& times() const;
};

/// Parse, elaborate and run every analysis in the deck.
[[nodiscard]] ScenarioData run_scenario(const Manifest& m, const SolverOptions* override_opts = nullptr);

struct CheckResult {
    std::string id;
    std::string predicate;
    bool pass = false;
    std::string detail;
};

/// Scenarios by name, run lazily so predicates may reference each other.
class ScenarioSuite {
public:
    explicit ScenarioSuite(std::string directory);

    [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
    [[nodiscard]] const Manifest& manifest(const std::string& name) const;
    const ScenarioData& data(const std::string& name);
    std::vector<CheckResult> check(const std::string& name);

private:
    std::string dir_;
    std::vector<std::string> names_;
    std::map<std::string, Manifest> manifests_;
    std::map<std::string, std::unique_ptr<ScenarioData>> data_;
};

/// Window helpers shared with the acceptance checks.
[[nodiscard]] std::vector<std::size_t> window_indices(const std::vector<double>& axis, double lo, double hi);
[[nodiscard]] double peak_to_peak(const std::vector<double>& v, const std::vector<std::size_t>& idx);
[[nodiscard]] double pearson(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<std::size_t>& idx);

/// Sign changes of v - baseline and the swing amplitudes between consecutive
/// crossings. A side only counts once |v - baseline| exceeds band.
struct OscillationStats {
    int sign_changes = 0;
    std::vector<double> swings;
};
[[nodiscard]] OscillationStats oscillation_stats(const std::vector<double>& v, const std::vector<std::size_t>& idx,
                                                 double baseline, double band = 0.0);

}  // namespace econoport
