#pragma once

// =============================================================================
// econoport - Netlist dialect: parser, printer, elaborator
// =============================================================================
// One statement per line, "+" continues the previous statement, "*" starts a
// comment line and ";" an inline comment. Keywords are case-insensitive,
// names are case-sensitive. Node "0" is the global ground.
//
//   DEMAND    <name> <n+> <n-> eps=<v> [f0=<flow>]
//   STORAGE   <name> <n+> <n-> k=<v> [q0=<stock>]
//   FRICTION  <name> <n+> <n-> b=<v>
//   MUTUAL    <name> <a+> <a-> <b+> <b-> eps11= eps12= eps22= [f01= f02=]
//   FSRC|VSRC <name> <n+> <n-> <waveform>...
//   AMMETER   <name> <n+> <n->           VOLTMETER <name> <n+> <n->
//   CCVS|CCCS <name> <out+> <out-> sense=<element> tf=<rational | pid kp= ki= kd= [wf=]>
//   VCVS|VCCS <name> <out+> <out-> ctrl+=<node> ctrl-=<node> gain=<rational>
//   DIODE     <name> <n+> <n-> [ron=] [roff=]
//   PRODFET   <name> <drain> <gate> <source> mu= kth=
//   NOISE     <name> <n+> <n-> seed= amp=
//   .SUBCKT <name> <p1+ p1- p2+ p2- ...> ... .ENDS [name]
//   X<name> <nodes...> <subckt>
//   .OP   .TRAN tstep tstop [method=trap|be] [ic=op|zero|uic]
//   .AC lin|log n fstart fstop   .PROBE V(n) V(a,b) I(e) Q(e) P(n) ...
//   .OPTIONS key=value ...   .FLOAT <nodes...>   .TITLE <text>   .END
//
// Waveforms: DC(v) STEP(t0,level) PULSE(v1,v2,t0,width) SINE(off,amp,f[,deg])
//            PWL(t1 v1 t2 v2 ...) AC(mag[,deg]) NOISE(seed,amp)
// Rationals: a number, or [n0,n1,...]/[d0,d1,...] with ascending coefficients.
// Numbers take the suffixes f p n u m k meg g t.
// =============================================================================

#include <array>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "econoport/rational.hpp"

namespace econoport {

enum class ElementKind {
    Demand,
    Storage,
    Friction,
    Mutual,
    FlowSource,
    IncentiveSource,
    Vcvs,
    Vccs,
    Ccvs,
    Cccs,
    Diode,
    ProdFet,
    Noise,
    Ammeter,
    Voltmeter,
};

[[nodiscard]] const char* keyword(ElementKind kind);
[[nodiscard]] std::optional<ElementKind> element_kind_from_keyword(const std::string& word);
[[nodiscard]] int terminal_count(ElementKind kind);

/// Source position; never participates in structural equality.
struct SourceLoc {
    int line = 0;
    int column = 0;
    bool operator==(const SourceLoc&) const { return true; }
};

struct Waveform {
    enum class Kind { Dc, Step, Pulse, Sine, Pwl, Ac, Noise };
    Kind kind = Kind::Dc;
    std::vector<double> args;

    bool operator==(const Waveform&) const = default;

    /// Time-domain contribution (AC and NOISE contribute 0 here).
    [[nodiscard]] double value(double t) const;
    /// Instants where the waveform has a corner.
    void breakpoints(std::vector<double>& out) const;
};

[[nodiscard]] const char* to_string(Waveform::Kind kind);

/// Controlled-source gain: a rational literal or a PID policy.
struct TransferSpec {
    bool pid = false;
    std::vector<double> num{0.0};
    std::vector<double> den{1.0};
    double kp = 0.0, ki = 0.0, kd = 0.0, wf = 1e3;

    bool operator==(const TransferSpec&) const = default;
    [[nodiscard]] RationalFunction function() const;
};

struct ElementDecl {
    ElementKind kind = ElementKind::Friction;
    std::string name;
    std::vector<std::string> nodes;
    std::map<std::string, double> params;
    /// sense, ctrl+, ctrl-
    std::map<std::string, std::string> refs;
    std::vector<Waveform> waveform;
    std::optional<TransferSpec> tf;
    SourceLoc loc;

    bool operator==(const ElementDecl&) const = default;
};

struct Instance {
    std::string name;
    std::vector<std::string> nodes;
    std::string subckt;
    SourceLoc loc;

    bool operator==(const Instance&) const = default;
};

using Statement = std::variant<ElementDecl, Instance>;

[[nodiscard]] const std::string& statement_name(const Statement& st);

struct PortDecl {
    std::string plus;
    std::string minus;
    bool operator==(const PortDecl&) const = default;
};

struct SubcktDef {
    std::string name;
    std::vector<PortDecl> ports;
    std::vector<Statement> body;
    SourceLoc loc;

    bool operator==(const SubcktDef&) const = default;
    /// Port terminals in declaration order (p1+, p1-, p2+, ...).
    [[nodiscard]] std::vector<std::string> terminals() const;
};

enum class IntegrationMethod { Trap, BackwardEuler };
enum class InitialCondition { OperatingPoint, Zero, User };

struct OpDirective {
    bool operator==(const OpDirective&) const = default;
};

struct TranDirective {
    double tstep = 0.0;
    double tstop = 0.0;
    IntegrationMethod method = IntegrationMethod::Trap;
    InitialCondition ic = InitialCondition::OperatingPoint;
    bool operator==(const TranDirective&) const = default;
};

struct AcDirective {
    bool log = true;
    int points = 2;
    double fstart = 0.0;
    double fstop = 0.0;
    bool operator==(const AcDirective&) const = default;

    /// Frequencies in cycles/yr.
    [[nodiscard]] std::vector<double> grid() const;
};

using AnalysisDirective = std::variant<OpDirective, TranDirective, AcDirective>;

/// V(node), V(a,b), I(element), Q(element) = integral of I, P(node) = integral of V.
struct ProbeDecl {
    char fn = 'V';
    std::vector<std::string> args;
    SourceLoc loc;

    bool operator==(const ProbeDecl&) const = default;
    [[nodiscard]] std::string text() const;
};

[[nodiscard]] ProbeDecl parse_probe(const std::string& text);

struct Netlist {
    std::string title;
    std::map<std::string, SubcktDef> subckts;
    std::vector<Statement> top;
    std::vector<AnalysisDirective> analyses;
    std::vector<ProbeDecl> probes;
    std::map<std::string, double> options;
    std::vector<std::string> floating;

    bool operator==(const Netlist&) const = default;
};

[[nodiscard]] Netlist parse_netlist(const std::string& text);
[[nodiscard]] Netlist parse_netlist_file(const std::string& path);
[[nodiscard]] std::string print_netlist(const Netlist& netlist);

// =============================================================================
// Elaboration
// =============================================================================

struct FlatElement {
    ElementKind kind = ElementKind::Friction;
    std::string name;
    std::vector<int> nodes;
    std::map<std::string, double> params;
    std::vector<Waveform> waveform;
    std::optional<RationalFunction> tf;
    /// Index of the sensed element (CCVS/CCCS), -1 otherwise.
    int sense = -1;
    /// Controlling nodes (VCVS/VCCS).
    std::array<int, 2> ctrl{0, 0};
    /// Inserted by elaboration to measure a subcircuit port terminal.
    bool instrument = false;

    [[nodiscard]] double param(const std::string& key, double fallback = 0.0) const;
};

/// All terminal ammeters of one instance whose ports share terminals. The
/// port condition holds when their flows (outer -> inner) sum to zero.
struct PortGroup {
    std::string instance;
    std::vector<std::string> ports;
    std::vector<int> ammeters;
};

struct ProbeRef {
    enum class Kind { Incentive, Flow, Stock, Price };
    std::string label;
    Kind kind = Kind::Incentive;
    int node_plus = 0;
    int node_minus = 0;
    int element = -1;
};

[[nodiscard]] const char* unit_label(ProbeRef::Kind kind);

struct ElaborateOptions {
    bool instrument_ports = true;
};

struct FlatCircuit {
    std::string title;
    std::vector<std::string> node_names;
    std::map<std::string, int> node_index;
    std::vector<FlatElement> elements;
    std::map<std::string, int> element_index;
    std::vector<PortGroup> port_groups;
    std::vector<ProbeRef> probes;
    std::vector<AnalysisDirective> analyses;
    std::map<std::string, double> options;

    [[nodiscard]] int node_count() const { return static_cast<int>(node_names.size()); }
    [[nodiscard]] int node(const std::string& name) const;
    [[nodiscard]] int element(const std::string& name) const;
    [[nodiscard]] ProbeRef resolve_probe(const ProbeDecl& probe) const;
};

[[nodiscard]] FlatCircuit elaborate(const Netlist& netlist, const ElaborateOptions& opts = {});

}  // namespace econoport
