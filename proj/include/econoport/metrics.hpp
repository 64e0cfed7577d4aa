#pragma once

// =============================================================================
// econoport - Economic observables computed from simulated series
// =============================================================================

#include <string>
#include <vector>

#include "econoport/engine.hpp"

namespace econoport {

struct MetricSeries {
    std::string name;
    std::vector<double> times;
    std::vector<double> values;
    /// One of "$/yr", "$/#", "1/yr", "$/yr^2", "#/yr".
    std::string unit;
    /// Per point: true where the value is undefined (NaN in values).
    std::vector<bool> undefined;

    [[nodiscard]] bool any_undefined() const;
    [[nodiscard]] ExtraColumn column() const;
};

/// A time-aligned input signal.
struct Signal {
    std::vector<double> times;
    std::vector<double> values;
};

[[nodiscard]] Signal signal(const TimeSeries& ts, const std::string& label);

/// Surplus allocation rate P = v * f.
[[nodiscard]] MetricSeries surplus_rate(const Signal& v, const Signal& f);

/// money / goods, undefined where |goods| < rel_floor * max|goods|.
[[nodiscard]] MetricSeries transaction_price(const Signal& money, const Signal& goods, double rel_floor = 1e-9);

/// f_in - f_out.
[[nodiscard]] MetricSeries accounting_profit(const Signal& in, const Signal& out);

/// Y = C + I + G - NX with NX measured at the external port.
[[nodiscard]] MetricSeries gdp(const Signal& c, const Signal& i, const Signal& g, const Signal& nx);

/// d ln P / dt by centered differences, one-sided at the ends.
[[nodiscard]] MetricSeries inflation(const Signal& price_level);

/// Mean of the savings and loan rates.
[[nodiscard]] MetricSeries ftp_rate(const Signal& savings_rate, const Signal& loan_rate);

}  // namespace econoport
