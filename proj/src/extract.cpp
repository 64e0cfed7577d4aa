#include "econoport/extract.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "econoport/errors.hpp"

namespace econoport {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Bench {
    std::array<std::string, 4> outer;  // p1+, p1-, p2+, p2- outer node names
};

Bench bench_nodes(const SubcktDef& def) {
    std::set<std::string> minus{def.ports[0].minus, def.ports[1].minus};
    Bench b;
    const std::array<std::string, 4> inner{def.ports[0].plus, def.ports[0].minus, def.ports[1].plus, def.ports[1].minus};
    for (std::size_t i = 0; i < 4; ++i) b.outer[i] = minus.count(inner[i]) ? "0" : "P_" + inner[i];
    return b;
}

ElementDecl source(ElementKind kind, const std::string& name, const std::string& p, const std::string& m, double amp) {
    ElementDecl e;
    e.kind = kind;
    e.name = name;
    e.nodes = {p, m};
    e.waveform.push_back({Waveform::Kind::Ac, {amp, 0.0}});
    return e;
}

/// Two experiments (drive port 1, then port 2) of kind Y or Z.
std::vector<std::array<std::vector<std::complex<double>>, 2>> experiment(const ExtractionRequest& req,
                                                                          const SubcktDef& def, bool admittance,
                                                                          std::vector<std::string>& gaps) {
    const Bench b = bench_nodes(def);
    std::vector<std::array<std::vector<std::complex<double>>, 2>> cols(2);
    for (int drive = 0; drive < 2; ++drive) {
        Netlist n;
        n.title = "extraction bench";
        n.subckts = req.library.subckts;
        Instance x;
        x.name = "DUT";
        x.subckt = def.name;
        x.nodes.assign(b.outer.begin(), b.outer.end());
        n.top.push_back(x);
        const ElementKind kind = admittance ? ElementKind::IncentiveSource : ElementKind::FlowSource;
        for (int port = 0; port < 2; ++port) {
            n.top.push_back(source(kind, "S" + std::to_string(port + 1), b.outer[2 * port], b.outer[2 * port + 1],
                                   port == drive ? req.amplitude : 0.0));
        }
        for (const auto& o : b.outer) {
            if (o != "0" && std::find(n.floating.begin(), n.floating.end(), o) == n.floating.end()) n.floating.push_back(o);
        }
        ElaborateOptions eo;
        eo.instrument_ports = false;
        const FlatCircuit c = elaborate(n, eo);
        std::vector<ProbeRef> probes;
        for (int port = 0; port < 2; ++port) {
            ProbeDecl p;
            if (admittance) {
                p.fn = 'I';
                p.args = {"S" + std::to_string(port + 1)};
            } else {
                p.fn = 'V';
                p.args = {b.outer[2 * port], b.outer[2 * port + 1]};
            }
            probes.push_back(c.resolve_probe(p));
        }
        FlatCircuit bare = c;
        bare.probes.clear();
        const Spectrum sp = ac_sweep(bare, req.freqs, req.opts, probes);
        for (std::size_t i = 0; i < req.freqs.size(); ++i) {
            if (!sp.gaps[i].empty() && gaps[i].empty()) gaps[i] = sp.gaps[i];
        }
        for (int port = 0; port < 2; ++port) {
            auto& col = cols[static_cast<std::size_t>(drive)][static_cast<std::size_t>(port)];
            col = sp.values[static_cast<std::size_t>(port)];
            for (auto& v : col) v /= req.amplitude;
        }
    }
    return cols;
}

ComplexMatrix2 assemble(const std::vector<std::array<std::vector<std::complex<double>>, 2>>& cols, std::size_t i) {
    ComplexMatrix2 m;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) m[r][c] = cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)][i];
    }
    return m;
}

bool finite(const ComplexMatrix2& m) {
    for (const auto& row : m) {
        for (const auto& v : row) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
    }
    return true;
}

double condition(const ComplexMatrix2& m) {
    Eigen::Matrix2cd a;
    a << m[0][0], m[0][1], m[1][0], m[1][1];
    const Eigen::JacobiSVD<Eigen::Matrix2cd> svd(a);
    const auto s = svd.singularValues();
    return s[1] > 0.0 ? s[0] / s[1] : std::numeric_limits<double>::infinity();
}

std::vector<double> split_numbers(const std::string& text, std::string& head) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ':' || ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    head = parts.front();
    std::vector<double> out;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(parts[i], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != parts[i].size()) throw Error("bad grid number '" + parts[i] + "' in '" + text + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::size_t ExtractedModel::valid_count() const {
    return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const std::string& e) { return e.empty(); }));
}

ExtractedModel extract_twoport(const ExtractionRequest& req) {
    const auto it = req.library.subckts.find(req.subckt);
    if (it == req.library.subckts.end()) throw ElaborationError("extraction: no subcircuit '" + req.subckt + "'");
    const SubcktDef& def = it->second;
    if (def.ports.size() != 2) {
        throw ElaborationError("extraction: subcircuit '" + req.subckt + "' declares " +
                               std::to_string(def.ports.size()) + " ports, need exactly 2");
    }
    if (req.freqs.empty()) throw Error("extraction: empty frequency grid");
    if (!(req.amplitude != 0.0) || !std::isfinite(req.amplitude)) throw Error("extraction: drive amplitude must be nonzero");

    const std::size_t nf = req.freqs.size();
    ExtractedModel out;
    out.kind = req.kind;
    out.subckt = req.subckt;
    out.freqs = req.freqs;
    out.m.assign(nf, cmat_identity());
    out.errors.assign(nf, "");
    out.condition.assign(nf, std::numeric_limits<double>::infinity());

    const bool want_z = req.kind == ParameterKind::Z;
    std::vector<std::string> gaps_primary(nf);
    const auto primary = experiment(req, def, !want_z, gaps_primary);
    const ParameterKind primary_kind = want_z ? ParameterKind::Z : ParameterKind::Y;
    std::vector<std::string> gaps_z(nf);
    std::vector<std::array<std::vector<std::complex<double>>, 2>> fallback;

    for (std::size_t i = 0; i < nf; ++i) {
        std::string reason;
        ParameterKind from = primary_kind;
        ComplexMatrix2 m{};
        bool have = false;
        if (gaps_primary[i].empty()) {
            m = assemble(primary, i);
            have = finite(m);
            if (!have) reason = std::string(to_string(primary_kind)) + " experiment produced non-finite values";
        } else {
            reason = std::string(to_string(primary_kind)) + " experiment: " + gaps_primary[i];
        }
        auto try_convert = [&](const ComplexMatrix2& src, ParameterKind k) -> bool {
            try {
                m = convert_numeric(src, k, req.kind);
                return finite(m);
            } catch (const Error& e) {
                reason = std::string(to_string(k)) + " -> " + to_string(req.kind) + ": " + e.what();
                return false;
            }
        };
        bool done = have && (from == req.kind || try_convert(m, from));
        if (!done && !want_z && req.kind != ParameterKind::Y) {
            if (fallback.empty()) fallback = experiment(req, def, false, gaps_z);
            if (gaps_z[i].empty()) {
                const ComplexMatrix2 z = assemble(fallback, i);
                if (finite(z)) done = try_convert(z, ParameterKind::Z);
            }
        }
        if (done) {
            out.m[i] = m;
            out.condition[i] = condition(m);
        } else {
            out.errors[i] = reason.empty() ? "singular experiment" : reason;
        }
    }
    return out;
}

double matrix_rel_err(const ComplexMatrix2& got, const ComplexMatrix2& want) {
    const double scale = cmat_norm(want);
    double worst = 0.0;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            const double den = std::max(std::abs(want[r][c]), 1e-12 * scale);
            const double num = std::abs(got[r][c] - want[r][c]);
            worst = std::max(worst, den > 0.0 ? num / den : num);
        }
    }
    return worst;
}

OracleReport oracle_compare(const ParameterModel& model, const ExtractedModel& extracted) {
    if (extracted.freqs.empty()) throw Error("oracle comparison: empty grid");
    if (extracted.m.size() != extracted.freqs.size() || extracted.errors.size() != extracted.freqs.size()) {
        throw Error("oracle comparison: grid mismatch");
    }
    const ParameterModel sym = convert(model, extracted.kind);
    OracleReport rep;
    for (std::size_t i = 0; i < extracted.freqs.size(); ++i) {
        if (!extracted.ok(i)) continue;
        const ComplexMatrix2 want = sym.m.eval(ComplexFrequency::at_cycles(extracted.freqs[i]).value());
        const double err = matrix_rel_err(extracted.m[i], want);
        if (rep.compared++ == 0 || err > rep.max_rel_err) {
            rep.max_rel_err = err;
            rep.worst_freq = extracted.freqs[i];
        }
    }
    return rep;
}

Spectrum bode(const FlatCircuit& circuit, const std::string& stimulus, const std::string& probe,
              const std::vector<double>& freqs, const SolverOptions& opts) {
    const int idx = circuit.element(stimulus);
    if (idx < 0) throw ElaborationError("bode: no stimulus element '" + stimulus + "'");
    const FlatElement& e = circuit.elements[static_cast<std::size_t>(idx)];
    std::complex<double> phasor = 0.0;
    for (const auto& w : e.waveform) {
        if (w.kind == Waveform::Kind::Ac) phasor += std::polar(w.args[0], w.args.size() > 1 ? w.args[1] * kPi / 180.0 : 0.0);
    }
    if (phasor == 0.0) throw ElaborationError("bode: stimulus '" + stimulus + "' has no AC waveform");
    FlatCircuit bare = circuit;
    bare.probes.clear();
    const ProbeRef ref = circuit.resolve_probe(parse_probe(probe));
    Spectrum sp = ac_sweep(bare, freqs, opts, {ref});
    Spectrum out;
    out.freqs = sp.freqs;
    out.gaps = sp.gaps;
    out.columns = {{ref.label + "/" + stimulus, "ratio"}};
    std::vector<std::complex<double>> v = sp.values[0];
    for (auto& x : v) x /= phasor;
    std::vector<double> mag(v.size()), ph(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        mag[i] = 20.0 * std::log10(std::abs(v[i]));
        ph[i] = std::arg(v[i]) * 180.0 / kPi;
    }
    out.values = {v};
    out.magnitude_db = {mag};
    out.phase_deg = {unwrap_degrees(ph)};
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    std::string head;
    const auto nums = split_numbers(text, head);
    for (char& ch : head) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if ((head != "log" && head != "lin") || nums.size() != 3) {
        throw Error("grid must be log:N:fstart:fstop or lin:N:fstart:fstop, got '" + text + "'");
    }
    AcDirective ac;
    ac.log = head == "log";
    ac.points = static_cast<int>(nums[0]);
    ac.fstart = nums[1];
    ac.fstop = nums[2];
    if (ac.points < 1 || static_cast<double>(ac.points) != nums[0]) throw Error("grid point count must be a positive integer");
    if (ac.log && !(ac.fstart > 0.0)) throw Error("log grid needs fstart > 0");
    if (!(ac.fstop >= ac.fstart)) throw Error("grid needs fstop >= fstart");
    return ac.grid();
}

nlohmann::json to_json(const ExtractedModel& model) {
    nlohmann::json j;
    j["kind"] = to_string(model.kind);
    j["subckt"] = model.subckt;
    j["points"] = nlohmann::json::array();
    j["gaps"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.freqs.size(); ++i) {
        if (!model.ok(i)) {
            j["gaps"].push_back({{"f", model.freqs[i]}, {"reason", model.errors[i]}});
            continue;
        }
        nlohmann::json m = nlohmann::json::array();
        for (const auto& row : model.m[i]) {
            for (const auto& v : row) m.push_back({v.real(), v.imag()});
        }
        j["points"].push_back({{"f", model.freqs[i]}, {"m", m}, {"condition", model.condition[i]}});
    }
    return j;
}

}  // namespace econoport
