#include "econoport/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "econoport/errors.hpp"

namespace econoport {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double num(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::pair<double, double> window(const json& j, const char* key = "window") {
    if (!j.contains(key)) return {-kInf, kInf};
    const auto& w = j.at(key);
    if (!w.is_array() || w.size() != 2) throw Error(std::string("check field '") + key + "' must be [lo, hi]");
    return {w[0].get<double>(), w[1].get<double>()};
}

/// Magnitude (dB) and unwrapped phase (deg) of an AC probe.
struct AcView {
    const std::vector<double>* freqs;
    const std::vector<double>* mag;
    const std::vector<double>* phase;
    const std::vector<std::string>* gaps;
};

AcView ac_view(const ScenarioData& d, const std::string& name) {
    if (!d.ac) throw Error("series '" + name + "': scenario has no AC analysis");
    const std::size_t i = d.ac->index(name);
    return {&d.ac->freqs, &d.ac->magnitude_db[i], &d.ac->phase_deg[i], &d.ac->gaps};
}

std::vector<std::size_t> valid_freq_indices(const AcView& v, double lo, double hi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < v.freqs->size(); ++i) {
        const double f = (*v.freqs)[i];
        if (f >= lo && f <= hi && (*v.gaps)[i].empty()) idx.push_back(i);
    }
    return idx;
}

/// Interior local maxima of the magnitude over the valid indices.
std::vector<std::size_t> local_maxima(const std::vector<double>& mag, const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> peaks;
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        const double m = mag[idx[k]];
        if (m > mag[idx[k - 1]] && m >= mag[idx[k + 1]]) peaks.push_back(idx[k]);
    }
    return peaks;
}

std::size_t argmax(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw Error("empty window");
    std::size_t best = idx.front();
    for (std::size_t i : idx) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

/// Lag at the magnitude maximum; for a monotone response the maximum sits at
/// the low edge of the window.
double lag_at_peak(const AcView& v, double lo, double hi) {
    const auto idx = valid_freq_indices(v, lo, hi);
    return -(*v.phase)[argmax(*v.mag, idx)];
}

double lag_at(const AcView& v, double f) {
    const auto& fr = *v.freqs;
    std::size_t best = 0;
    for (std::size_t i = 0; i < fr.size(); ++i) {
        if (std::abs(std::log(fr[i] / f)) < std::abs(std::log(fr[best] / f))) best = i;
    }
    return -(*v.phase)[best];
}

double window_mean(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw Error("empty window");
    double s = 0.0;
    for (std::size_t i : idx) s += v[i];
    return s / static_cast<double>(idx.size());
}

bool sign_ok(const std::string& want, double x, double tol) {
    if (want == "positive") return x > tol;
    if (want == "negative") return x < -tol;
    if (want == "nonnegative") return x >= -tol;
    if (want == "nonpositive") return x <= tol;
    throw Error("unknown sign '" + want + "'");
}

}  // namespace

// =============================================================================
// Manifest loading
// =============================================================================

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("manifest '" + path + "': " + e.what());
    }
    Manifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.directory = fs::path(path).parent_path().string();
        m.deck_path = (fs::path(m.directory) / j.at("deck").get<std::string>()).string();
        m.description = j.value("description", "");
        if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& mj : j.value("metrics", json::array())) {
            m.metrics.push_back({mj.at("name").get<std::string>(), mj.at("fn").get<std::string>(),
                                 mj.at("args").get<std::vector<std::string>>()});
        }
        m.checks = j.value("checks", json::array());
    } catch (const json::exception& e) {
        throw Error("manifest '" + path + "': " + e.what());
    }
    return m;
}

// =============================================================================
// Running
// =============================================================================

bool ScenarioData::has_series(const std::string& name) const {
    if (tran && tran->has(name)) return true;
    return std::any_of(metrics.begin(), metrics.end(), [&](const MetricSeries& m) { return m.name == name; });
}

const std::vector<double>& ScenarioData::series(const std::string& name) const {
    for (const auto& m : metrics) {
        if (m.name == name) return m.values;
    }
    if (!tran) throw Error("series '" + name + "': scenario has no transient analysis");
    return tran->series(name);
}

const std::vector<double>& ScenarioData::times() const {
    if (!tran) throw Error("scenario has no transient analysis");
    return tran->times;
}

namespace {

Signal metric_input(const ScenarioData& d, const std::string& name) { return {d.times(), d.series(name)}; }

MetricSeries compute_metric(const ScenarioData& d, const MetricSpec& spec) {
    auto arg = [&](std::size_t i) {
        if (i >= spec.args.size()) throw Error("metric '" + spec.name + "': missing argument " + std::to_string(i + 1));
        return metric_input(d, spec.args[i]);
    };
    MetricSeries m;
    if (spec.fn == "surplus_rate") {
        m = surplus_rate(arg(0), arg(1));
    } else if (spec.fn == "transaction_price") {
        m = transaction_price(arg(0), arg(1));
    } else if (spec.fn == "accounting_profit") {
        m = accounting_profit(arg(0), arg(1));
    } else if (spec.fn == "gdp") {
        m = gdp(arg(0), arg(1), arg(2), arg(3));
    } else if (spec.fn == "inflation") {
        m = inflation(arg(0));
    } else if (spec.fn == "ftp_rate") {
        m = ftp_rate(arg(0), arg(1));
    } else if (spec.fn == "sum") {
        // Signed flow total; a leading '-' subtracts the argument.
        if (spec.args.empty()) throw Error("metric '" + spec.name + "': sum needs arguments");
        m.times = d.times();
        m.values.assign(m.times.size(), 0.0);
        m.undefined.assign(m.times.size(), false);
        m.unit = "#/yr";
        for (const auto& a : spec.args) {
            const bool neg = !a.empty() && a.front() == '-';
            const auto& v = d.series(neg ? a.substr(1) : a);
            if (v.size() != m.values.size()) throw Error("metric '" + spec.name + "': length mismatch");
            for (std::size_t k = 0; k < v.size(); ++k) m.values[k] += neg ? -v[k] : v[k];
        }
    } else {
        throw Error("metric '" + spec.name + "': unknown function '" + spec.fn + "'");
    }
    m.name = spec.name;
    return m;
}

}  // namespace

ScenarioData run_scenario(const Manifest& m, const SolverOptions* override_opts) {
    const auto start = std::chrono::steady_clock::now();
    ScenarioData d;
    d.circuit = elaborate(parse_netlist_file(m.deck_path));
    SolverOptions opts = override_opts ? *override_opts : SolverOptions::from_circuit(d.circuit);
    if (m.seed && !opts.seed) opts.seed = m.seed;
    for (const auto& a : d.circuit.analyses) {
        if (std::holds_alternative<OpDirective>(a)) {
            d.op = dc_op(d.circuit, opts);
        } else if (const auto* tr = std::get_if<TranDirective>(&a)) {
            d.tran = transient(d.circuit, *tr, opts);
        } else if (const auto* ac = std::get_if<AcDirective>(&a)) {
            d.ac = ac_sweep(d.circuit, ac->grid(), opts);
        }
    }
    for (const auto& spec : m.metrics) d.metrics.push_back(compute_metric(d, spec));
    d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return d;
}

// =============================================================================
// Series helpers
// =============================================================================

std::vector<std::size_t> window_indices(const std::vector<double>& axis, double lo, double hi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < axis.size(); ++i) {
        if (axis[i] >= lo && axis[i] <= hi) idx.push_back(i);
    }
    return idx;
}

double peak_to_peak(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw Error("empty window");
    double lo = kInf;
    double hi = -kInf;
    for (std::size_t i : idx) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    return hi - lo;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b, const std::vector<std::size_t>& idx) {
    if (idx.size() < 2) throw Error("correlation needs at least two points");
    const double ma = window_mean(a, idx);
    const double mb = window_mean(b, idx);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i : idx) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

OscillationStats oscillation_stats(const std::vector<double>& v, const std::vector<std::size_t>& idx, double baseline,
                                   double band) {
    OscillationStats st;
    int prev = 0;
    double extreme = 0.0;
    for (std::size_t i : idx) {
        const double x = v[i] - baseline;
        const int s = x > band ? 1 : (x < -band ? -1 : 0);
        if (s == 0) {
            if (std::abs(x) > std::abs(extreme)) extreme = x;
            continue;
        }
        if (prev != 0 && s != prev) {
            ++st.sign_changes;
            st.swings.push_back(std::abs(extreme));
            extreme = 0.0;
        }
        if (std::abs(x) > std::abs(extreme)) extreme = x;
        prev = s;
    }
    if (extreme != 0.0) st.swings.push_back(std::abs(extreme));
    return st;
}

// =============================================================================
// Suite
// =============================================================================

ScenarioSuite::ScenarioSuite(std::string directory) : dir_(std::move(directory)) {
    if (!fs::is_directory(dir_)) throw IoError("scenario directory '" + dir_ + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        Manifest m = load_manifest(p.string());
        names_.push_back(m.name);
        manifests_.emplace(m.name, std::move(m));
    }
}

const Manifest& ScenarioSuite::manifest(const std::string& name) const {
    const auto it = manifests_.find(name);
    if (it == manifests_.end()) throw Error("unknown scenario '" + name + "'");
    return it->second;
}

const ScenarioData& ScenarioSuite::data(const std::string& name) {
    auto it = data_.find(name);
    if (it == data_.end()) {
        it = data_.emplace(name, std::make_unique<ScenarioData>(run_scenario(manifest(name)))).first;
    }
    return *it->second;
}

namespace {

CheckResult evaluate(ScenarioSuite& suite, const std::string& scenario, const json& c) {
    CheckResult r;
    r.id = c.value("id", "");
    r.predicate = c.at("predicate").get<std::string>();
    const ScenarioData& d = suite.data(scenario);
    const std::string series = c.value("series", "");
    const std::string& p = r.predicate;
    std::ostringstream detail;

    if (p == "approx") {
        const double tol = num(c, "tol", 1e-6);
        double worst = 0.0;
        if (d.ac && !d.has_series(series)) {
            const AcView v = ac_view(d, series);
            const auto [lo, hi] = window(c);
            const std::string quantity = c.value("quantity", "magnitude_db");
            const auto& vals = quantity == "phase_deg" ? *v.phase : *v.mag;
            const double target = c.at("target").get<double>();
            const auto idx = valid_freq_indices(v, lo, hi);
            if (idx.empty()) throw Error("empty frequency window");
            for (std::size_t i : idx) worst = std::max(worst, std::abs(vals[i] - target));
        } else {
            const auto& vals = d.series(series);
            const auto [lo, hi] = window(c);
            const auto idx = window_indices(d.times(), lo, hi);
            if (idx.empty()) throw Error("empty time window");
            const auto& target = c.at("target");
            for (std::size_t i : idx) {
                double want = 0.0;
                if (target.is_number()) {
                    want = target.get<double>();
                } else if (target == "op") {
                    want = dc_op(d.circuit, SolverOptions::from_circuit(d.circuit), {}, d.times()[i]).value(series);
                } else {
                    want = d.series(target.get<std::string>())[i];
                }
                worst = std::max(worst, std::abs(vals[i] - want));
            }
        }
        r.pass = worst <= tol;
        detail << "max deviation " << fmt(worst) << " (tol " << fmt(tol) << ")";
    } else if (p == "monotone") {
        const std::string dir = c.value("direction", "nonincreasing");
        const double tol = num(c, "tol", 1e-12);
        const auto [lo, hi] = window(c);
        std::vector<double> vals;
        if (d.ac && !d.has_series(series)) {
            const AcView v = ac_view(d, series);
            for (std::size_t i : valid_freq_indices(v, lo, hi)) vals.push_back((*v.mag)[i]);
        } else {
            const auto& s = d.series(series);
            for (std::size_t i : window_indices(d.times(), lo, hi)) vals.push_back(s[i]);
        }
        double worst = 0.0;
        for (std::size_t i = 1; i < vals.size(); ++i) {
            const double step = vals[i] - vals[i - 1];
            worst = std::max(worst, dir == "nonincreasing" ? step : -step);
        }
        r.pass = vals.size() >= 2 && worst <= tol;
        detail << dir << ", worst violation " << fmt(worst) << " over " << vals.size() << " points";
    } else if (p == "peak-freq") {
        const AcView v = ac_view(d, series);
        const auto [lo, hi] = window(c);
        const auto idx = valid_freq_indices(v, lo, hi);
        const auto peaks = local_maxima(*v.mag, idx);
        const std::size_t best = argmax(*v.mag, idx);
        const bool interior = !idx.empty() && best != idx.front() && best != idx.back();
        const double fpk = (*v.freqs)[best];
        const double gain = (*v.mag)[best];
        bool ok = interior && gain > num(c, "min_gain_db", 0.0);
        if (c.value("unique", true)) ok = ok && peaks.size() == 1;
        if (c.contains("f_expected")) {
            const double fe = c.at("f_expected").get<double>();
            ok = ok && std::abs(fpk - fe) <= num(c, "rel_tol", 0.1) * fe;
        }
        r.pass = ok;
        detail << "peak " << fmt(gain) << " dB at " << fmt(fpk) << " cycles/yr, " << peaks.size() << " local maxima";
    } else if (p == "sign") {
        const std::string want = c.at("sign").get<std::string>();
        const double tol = num(c, "tol", 0.0);
        const auto [lo, hi] = window(c);
        const auto& vals = d.series(series);
        const auto idx = window_indices(d.times(), lo, hi);
        if (idx.empty()) throw Error("empty time window");
        if (c.value("mode", "all") == "mean") {
            const double m = window_mean(vals, idx);
            r.pass = sign_ok(want, m, tol);
            detail << "window mean " << fmt(m);
        } else {
            std::size_t bad = 0;
            double worst = 0.0;
            for (std::size_t i : idx) {
                if (!sign_ok(want, vals[i], tol)) {
                    ++bad;
                    if (std::abs(vals[i]) > std::abs(worst)) worst = vals[i];
                }
            }
            r.pass = bad == 0;
            detail << bad << " of " << idx.size() << " points violate " << want;
            if (bad) detail << " (worst " << fmt(worst) << ")";
        }
    } else if (p == "phase-lag") {
        const AcView v = ac_view(d, series);
        const auto [lo, hi] = window(c);
        double lag = 0.0;
        if (c.contains("at_freq")) {
            lag = lag_at(v, c.at("at_freq").get<double>());
        } else {
            lag = lag_at_peak(v, lo, hi);
        }
        bool ok = true;
        detail << "lag " << fmt(lag) << " deg";
        if (c.contains("min_deg")) ok = ok && lag >= c.at("min_deg").get<double>();
        if (c.contains("max_deg")) ok = ok && lag <= c.at("max_deg").get<double>();
        if (c.contains("greater_than")) {
            const auto& g = c.at("greater_than");
            const ScenarioData& other = suite.data(g.at("scenario").get<std::string>());
            const AcView ov = ac_view(other, g.value("series", series));
            const double olag = g.contains("at_freq") ? lag_at(ov, g.at("at_freq").get<double>()) : lag_at_peak(ov, lo, hi);
            ok = ok && lag > olag;
            detail << " vs " << fmt(olag) << " deg in " << g.at("scenario").get<std::string>();
        }
        r.pass = ok;
    } else if (p == "reduced-vs") {
        const std::string measure = c.value("measure", "p2p");
        const std::string other_name = c.at("scenario").get<std::string>();
        const std::string other_series = c.value("other_series", series);
        const auto [lo, hi] = window(c);
        auto measure_of = [&](const ScenarioData& sd, const std::string& s) {
            if (measure == "peak-db") {
                const AcView v = ac_view(sd, s);
                const auto idx = valid_freq_indices(v, lo, hi);
                return (*v.mag)[argmax(*v.mag, idx)];
            }
            const auto& vals = sd.series(s);
            const auto idx = window_indices(sd.times(), lo, hi);
            if (idx.empty()) throw Error("empty time window");
            if (measure == "p2p") return peak_to_peak(vals, idx);
            if (measure == "max") return vals[argmax(vals, idx)];
            if (measure == "min") {
                double m = kInf;
                for (std::size_t i : idx) m = std::min(m, vals[i]);
                return m;
            }
            throw Error("unknown measure '" + measure + "'");
        };
        const double mine = measure_of(d, series);
        const double theirs = measure_of(suite.data(other_name), other_series);
        const bool less = c.value("direction", "less") == "less";
        r.pass = less ? mine < theirs : mine > theirs;
        detail << measure << " " << fmt(mine) << (less ? " < " : " > ") << fmt(theirs) << " (" << other_name << ")";
    } else if (p == "settled") {
        const double tol = num(c, "tol", 1e-6);
        const auto& t = d.times();
        std::vector<std::string> names;
        if (series.empty() || series == "*") {
            for (const auto& col : d.tran->columns) names.push_back(col.label);
        } else {
            names.push_back(series);
        }
        double worst = 0.0;
        std::string worst_name;
        const std::size_t n = t.size();
        if (n < 2) throw Error("settled needs at least two time points");
        for (const auto& name : names) {
            const auto& vals = d.series(name);
            const double deriv = (vals[n - 1] - vals[n - 2]) / (t[n - 1] - t[n - 2]);
            if (std::abs(deriv) >= worst) {
                worst = std::abs(deriv);
                worst_name = name;
            }
        }
        r.pass = worst <= tol;
        detail << "max |d/dt| " << fmt(worst) << " (" << worst_name << ")";
    } else if (p == "oscillation") {
        const auto [lo, hi] = window(c);
        const auto& vals = d.series(series);
        const auto idx = window_indices(d.times(), lo, hi);
        if (idx.empty()) throw Error("empty time window");
        const double baseline = c.contains("baseline") ? c.at("baseline").get<double>() : vals.back();
        const auto st = oscillation_stats(vals, idx, baseline, num(c, "band", 0.0));
        const int need = static_cast<int>(num(c, "min_sign_changes", 3));
        bool ok = st.sign_changes >= need;
        // Swing k is the excursion between crossing k-1 and k; a period holds
        // two swings, so "after n periods" compares swing 2n with swing 0.
        const auto periods = static_cast<std::size_t>(num(c, "periods", 3));
        const double ratio_max = num(c, "max_envelope_ratio", 1.0);
        double ratio = kInf;
        if (st.swings.size() > 1 && st.swings.front() > 0.0) {
            const std::size_t k = std::min(2 * periods, st.swings.size() - 1);
            ratio = st.swings[k] / st.swings.front();
        }
        ok = ok && ratio < ratio_max;
        r.pass = ok;
        detail << st.sign_changes << " sign changes, envelope ratio " << fmt(ratio);
    } else if (p == "correlation") {
        const auto [lo, hi] = window(c);
        const auto idx = window_indices(d.times(), lo, hi);
        const double rho = pearson(d.series(series), d.series(c.at("with").get<std::string>()), idx);
        bool ok = true;
        if (c.contains("max")) ok = ok && rho <= c.at("max").get<double>();
        if (c.contains("min")) ok = ok && rho >= c.at("min").get<double>();
        r.pass = ok;
        detail << "correlation " << fmt(rho);
    } else if (p == "step") {
        const auto [blo, bhi] = window(c, "before");
        const auto [alo, ahi] = window(c, "after");
        const auto& vals = d.series(series);
        const double before = window_mean(vals, window_indices(d.times(), blo, bhi));
        const double after = window_mean(vals, window_indices(d.times(), alo, ahi));
        const std::string dir = c.at("direction").get<std::string>();
        const double tol = num(c, "tol", 0.0);
        r.pass = dir == "up" ? after - before > tol : before - after > tol;
        detail << "mean " << fmt(before) << " -> " << fmt(after);
    } else {
        throw Error("unknown predicate '" + p + "'");
    }
    r.detail = detail.str();
    return r;
}

}  // namespace

std::vector<CheckResult> ScenarioSuite::check(const std::string& name) {
    std::vector<CheckResult> out;
    for (const auto& c : manifest(name).checks) {
        try {
            out.push_back(evaluate(*this, name, c));
        } catch (const std::exception& e) {
            CheckResult r;
            r.id = c.value("id", "");
            r.predicate = c.value("predicate", "?");
            r.pass = false;
            r.detail = e.what();
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace econoport
