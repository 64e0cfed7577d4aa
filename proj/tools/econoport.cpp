// =============================================================================
// econoport - command-line front end
// =============================================================================
//   econoport run       --deck D [--out DIR] [--format csv|json] [--seed N]
//   econoport extract   --deck D --subckt S --kind Y|Z|T|H|G [--grid G]
//   econoport bode      --deck D --stimulus F --probe P [--grid G] [--format csv|json|svg]
//   econoport scenarios [--dir DIR] [--only NAME]...
//
// Exit codes: 0 ok, 1 usage or check failure, 2 parse, 3 elaborate, 4 solve,
// 5 io.
// =============================================================================

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "econoport/errors.hpp"
#include "econoport/extract.hpp"
#include "econoport/plot.hpp"
#include "econoport/scenario.hpp"

namespace fs = std::filesystem;
using namespace econoport;

namespace {

enum Exit : int { kOk = 0, kFail = 1, kParse = 2, kElaborate = 3, kSolve = 4, kIo = 5 };

struct Common {
    std::string deck;
    std::string out = ".";
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    std::optional<double> reltol;
    std::optional<double> abstol;
    std::string grid;
};

std::string out_dir(const Common& c) {
    if (const char* env = std::getenv("ECONOPORT_OUT"); env && *env) return env;
    return c.out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + path.string() + "'");
    std::cout << "wrote " << path.string() << '\n';
}

SolverOptions options_for(const FlatCircuit& c, const Common& cfg) {
    SolverOptions o = SolverOptions::from_circuit(c);
    if (cfg.seed) o.seed = cfg.seed;
    if (cfg.reltol) o.reltol = *cfg.reltol;
    if (cfg.abstol) o.abstol = *cfg.abstol;
    return o;
}

std::string stem(const std::string& deck) { return fs::path(deck).stem().string(); }

int cmd_run(const Common& cfg) {
    if (cfg.format != "csv" && cfg.format != "json") throw Error("run: --format must be csv or json");
    const FlatCircuit c = elaborate(parse_netlist_file(cfg.deck));
    const SolverOptions opts = options_for(c, cfg);
    std::vector<AnalysisDirective> analyses = c.analyses;
    if (analyses.empty()) analyses.emplace_back(OpDirective{});
    std::map<std::string, int> seen;
    const bool csv = cfg.format == "csv";
    for (const auto& a : analyses) {
        std::string kind;
        std::string text;
        if (std::holds_alternative<OpDirective>(a)) {
            kind = "op";
            const auto r = dc_op(c, opts);
            text = csv ? to_csv(r) : to_json(r);
        } else if (const auto* tr = std::get_if<TranDirective>(&a)) {
            kind = "tran";
            const auto r = transient(c, *tr, opts);
            text = csv ? to_csv(r) : to_json(r);
        } else {
            kind = "ac";
            const auto& ac = std::get<AcDirective>(a);
            const auto r = ac_sweep(c, cfg.grid.empty() ? ac.grid() : parse_grid(cfg.grid), opts);
            text = csv ? to_csv(r) : to_json(r);
        }
        const int n = ++seen[kind];
        const std::string name = stem(cfg.deck) + "." + kind + (n > 1 ? std::to_string(n) : "") + "." + cfg.format;
        write_file(fs::path(out_dir(cfg)) / name, text);
    }
    return kOk;
}

int cmd_extract(const Common& cfg, const std::string& subckt, const std::string& kind) {
    ExtractionRequest req;
    req.library = parse_netlist_file(cfg.deck);
    req.subckt = subckt;
    req.kind = parse_parameter_kind(kind);
    req.freqs = parse_grid(cfg.grid.empty() ? "log:50:0.01:1000" : cfg.grid);
    req.opts.seed = cfg.seed;
    if (cfg.reltol) req.opts.reltol = *cfg.reltol;
    if (cfg.abstol) req.opts.abstol = *cfg.abstol;
    const ExtractedModel m = extract_twoport(req);
    write_file(fs::path(out_dir(cfg)) / (subckt + "." + to_string(req.kind) + ".json"), to_json(m).dump(1) + "\n");
    std::cout << m.valid_count() << " of " << m.freqs.size() << " points extracted\n";
    return kOk;
}

int cmd_bode(const Common& cfg, const std::string& stimulus, const std::string& probe) {
    if (cfg.format != "csv" && cfg.format != "json" && cfg.format != "svg") {
        throw Error("bode: --format must be csv, json or svg");
    }
    const FlatCircuit c = elaborate(parse_netlist_file(cfg.deck));
    std::vector<double> freqs;
    if (!cfg.grid.empty()) {
        freqs = parse_grid(cfg.grid);
    } else {
        for (const auto& a : c.analyses) {
            if (const auto* ac = std::get_if<AcDirective>(&a)) freqs = ac->grid();
        }
        if (freqs.empty()) freqs = parse_grid("log:200:0.01:1000");
    }
    const Spectrum sp = bode(c, stimulus, probe, freqs, options_for(c, cfg));
    const fs::path base = fs::path(out_dir(cfg)) / (stem(cfg.deck) + ".bode");
    if (cfg.format == "json") {
        write_file(base.string() + ".json", to_json(sp));
    } else {
        write_file(base.string() + ".csv", to_csv(sp));
    }
    if (cfg.format == "svg") write_file(base.string() + ".svg", bode_svg(sp, probe + " / " + stimulus));
    return kOk;
}

int cmd_scenarios(const std::string& dir, const std::vector<std::string>& only, const Common& cfg, bool write) {
    ScenarioSuite suite(dir);
    std::size_t failed = 0;
    std::size_t total = 0;
    for (const auto& name : suite.names()) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        const auto results = suite.check(name);
        for (const auto& r : results) {
            ++total;
            if (!r.pass) ++failed;
            std::cout << (r.pass ? "PASS " : "FAIL ") << name << '/' << r.id << " [" << r.predicate << "] " << r.detail
                      << '\n';
        }
        if (write) {
            const ScenarioData& d = suite.data(name);
            std::vector<ExtraColumn> extra;
            for (const auto& m : d.metrics) extra.push_back(m.column());
            const bool csv = cfg.format != "json";
            const fs::path base = fs::path(out_dir(cfg)) / name;
            if (d.tran) write_file(base.string() + ".tran." + (csv ? "csv" : "json"), csv ? to_csv(*d.tran, extra) : to_json(*d.tran, extra));
            if (d.ac) write_file(base.string() + ".ac." + (csv ? "csv" : "json"), csv ? to_csv(*d.ac) : to_json(*d.ac));
            if (d.op) write_file(base.string() + ".op." + (csv ? "csv" : "json"), csv ? to_csv(*d.op) : to_json(*d.op));
        }
    }
    std::cout << (total - failed) << " of " << total << " checks passed\n";
    return failed == 0 ? kOk : kFail;
}

void add_common(CLI::App* sub, Common& cfg, bool needs_deck) {
    auto* deck = sub->add_option("--deck", cfg.deck, "Netlist deck");
    if (needs_deck) deck->required();
    sub->add_option("--out", cfg.out, "Output directory (ECONOPORT_OUT overrides)");
    sub->add_option("--format", cfg.format, "csv, json or svg");
    sub->add_option("--seed", cfg.seed, "Noise seed override");
    sub->add_option("--reltol", cfg.reltol, "Relative Newton tolerance");
    sub->add_option("--abstol", cfg.abstol, "Absolute flow tolerance");
    sub->add_option("--grid", cfg.grid, "Frequency grid, e.g. log:200:0.01:1000");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"econoport: economic circuit simulator"};
    app.require_subcommand(1);

    Common cfg;
    auto* run = app.add_subcommand("run", "Run every analysis in a deck");
    add_common(run, cfg, true);

    std::string subckt;
    std::string kind = "Y";
    auto* extract = app.add_subcommand("extract", "Extract a 2-port parameter model of a subcircuit");
    add_common(extract, cfg, true);
    extract->add_option("--subckt", subckt, "Subcircuit name")->required();
    extract->add_option("--kind", kind, "Y, Z, T, H or G");

    std::string stimulus;
    std::string probe;
    auto* bodecmd = app.add_subcommand("bode", "Frequency response of a probe over a stimulus");
    add_common(bodecmd, cfg, true);
    bodecmd->add_option("--stimulus", stimulus, "Source element with an AC waveform")->required();
    bodecmd->add_option("--probe", probe, "Probe, e.g. I(L1) or V(n)")->required();

    std::string dir = "scenarios";
    std::vector<std::string> only;
    bool write = false;
    auto* scen = app.add_subcommand("scenarios", "Run the scenario corpus and check its manifests");
    add_common(scen, cfg, false);
    scen->add_option("--dir", dir, "Scenario directory");
    scen->add_option("--only", only, "Restrict to these scenarios");
    scen->add_flag("--write", write, "Also write each scenario's results to --out");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run) return cmd_run(cfg);
        if (*extract) return cmd_extract(cfg, subckt, kind);
        if (*bodecmd) return cmd_bode(cfg, stimulus, probe);
        if (*scen) return cmd_scenarios(dir, only, cfg, write);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kParse;
    } catch (const ElaborationError& e) {
        std::cerr << "elaboration error: " << e.what() << '\n';
        return kElaborate;
    } catch (const SolveError& e) {
        std::cerr << "solve error: " << e.what() << '\n';
        return kSolve;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFail;
    }
    return kFail;
}
