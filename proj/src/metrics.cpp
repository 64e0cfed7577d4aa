#include "econoport/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "econoport/errors.hpp"

namespace econoport {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_aligned(const char* op, std::initializer_list<const Signal*> sigs) {
    const Signal& first = **sigs.begin();
    if (first.values.size() != first.times.size()) throw Error(std::string(op) + ": times and values differ in length");
    for (const Signal* s : sigs) {
        if (s->values.size() != first.values.size() || s->times.size() != first.times.size()) {
            throw Error(std::string(op) + ": length mismatch (" + std::to_string(first.values.size()) + " vs " +
                        std::to_string(s->values.size()) + ")");
        }
    }
}

MetricSeries make(const char* name, const char* unit, const Signal& like) {
    MetricSeries m;
    m.name = name;
    m.unit = unit;
    m.times = like.times;
    m.values.assign(like.values.size(), 0.0);
    m.undefined.assign(like.values.size(), false);
    return m;
}

}  // namespace

bool MetricSeries::any_undefined() const { return std::find(undefined.begin(), undefined.end(), true) != undefined.end(); }

ExtraColumn MetricSeries::column() const { return {{name, unit}, values}; }

Signal signal(const TimeSeries& ts, const std::string& label) { return {ts.times, ts.series(label)}; }

MetricSeries surplus_rate(const Signal& v, const Signal& f) {
    require_aligned("surplus_rate", {&v, &f});
    MetricSeries m = make("surplus_rate", "$/yr^2", v);
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = v.values[i] * f.values[i];
    return m;
}

MetricSeries transaction_price(const Signal& money, const Signal& goods, double rel_floor) {
    require_aligned("transaction_price", {&money, &goods});
    MetricSeries m = make("transaction_price", "$/#", money);
    double scale = 0.0;
    for (double g : goods.values) scale = std::max(scale, std::abs(g));
    const double floor = rel_floor * scale;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const double g = goods.values[i];
        if (std::abs(g) < floor || g == 0.0) {
            m.values[i] = kNaN;
            m.undefined[i] = true;
        } else {
            m.values[i] = money.values[i] / g;
        }
    }
    return m;
}

MetricSeries accounting_profit(const Signal& in, const Signal& out) {
    require_aligned("accounting_profit", {&in, &out});
    MetricSeries m = make("accounting_profit", "$/yr", in);
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = in.values[i] - out.values[i];
    return m;
}

MetricSeries gdp(const Signal& c, const Signal& i, const Signal& g, const Signal& nx) {
    require_aligned("gdp", {&c, &i, &g, &nx});
    MetricSeries m = make("gdp", "$/yr", c);
    for (std::size_t k = 0; k < m.values.size(); ++k) {
        m.values[k] = c.values[k] + i.values[k] + g.values[k] - nx.values[k];
        if (!std::isfinite(m.values[k])) m.undefined[k] = true;
    }
    return m;
}

MetricSeries inflation(const Signal& price) {
    require_aligned("inflation", {&price});
    MetricSeries m = make("inflation", "1/yr", price);
    const std::size_t n = price.values.size();
    std::vector<double> lp(n);
    for (std::size_t k = 0; k < n; ++k) lp[k] = price.values[k] > 0.0 ? std::log(price.values[k]) : kNaN;
    for (std::size_t k = 0; k < n; ++k) {
        if (n < 2) {
            m.values[k] = kNaN;
            m.undefined[k] = true;
            continue;
        }
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = k + 1 == n ? k : k + 1;
        const double d = (lp[hi] - lp[lo]) / (price.times[hi] - price.times[lo]);
        if (!std::isfinite(lp[k]) || !std::isfinite(d)) {
            m.values[k] = kNaN;
            m.undefined[k] = true;
        } else {
            m.values[k] = d;
        }
    }
    return m;
}

MetricSeries ftp_rate(const Signal& savings_rate, const Signal& loan_rate) {
    require_aligned("ftp_rate", {&savings_rate, &loan_rate});
    MetricSeries m = make("ftp_rate", "1/yr", savings_rate);
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = 0.5 * (savings_rate.values[i] + loan_rate.values[i]);
    return m;
}

}  // namespace econoport
