#include <doctest.h>

#include <cmath>

#include "econoport/agents.hpp"
#include "econoport/engine.hpp"
#include "econoport/errors.hpp"

using namespace econoport;

namespace {

FlatCircuit circuit(const std::string& deck) { return elaborate(parse_netlist(deck)); }

const TranDirective& tran_of(const FlatCircuit& c) {
    for (const auto& a : c.analyses) {
        if (const auto* t = std::get_if<TranDirective>(&a)) return *t;
    }
    throw std::runtime_error("deck has no .TRAN");
}

TimeSeries run_tran(const std::string& deck) {
    const FlatCircuit c = circuit(deck);
    return transient(c, tran_of(c), SolverOptions::from_circuit(c));
}

std::string rc_deck(double tstep, const char* method) {
    return "FSRC F 1 0 STEP(0,1)\nFRICTION R 1 0 b=1\nSTORAGE C 1 0 k=1\n.TRAN " + std::to_string(tstep) +
           " 1 method=" + method + " ic=zero\n.PROBE V(1)\n";
}

double measured_order(const char* method) {
    double v[3];
    const double h[3] = {0.02, 0.01, 0.005};
    for (int i = 0; i < 3; ++i) v[i] = run_tran(rc_deck(h[i], method)).series("V(1)").back();
    return std::log2(std::abs(v[0] - v[1]) / std::abs(v[1] - v[2]));
}

}  // namespace

// =============================================================================
// DC operating point
// =============================================================================

TEST_CASE("zero sources give all-zero unknowns") {
    const auto op = dc_op(circuit("FSRC F 1 0 DC(0)\nFRICTION R1 1 2 b=1\nSTORAGE C1 2 0 k=1\n"
                                  "DEMAND L1 2 0 eps=3\nVSRC V 3 0 DC(0)\nFRICTION R2 3 1 b=2\n"));
    for (double x : op.x) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("flow source into friction gives v = f / b") {
    const auto op = dc_op(circuit("FSRC F 1 0 DC(1)\nFRICTION R 1 0 b=2\n.PROBE V(1) I(R) I(F)\n"));
    CHECK(op.value("V(1)") == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(op.value("I(R)") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(op.value("I(F)") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(op.max_node_residual <= 1e-9);
}

TEST_CASE("producer in triode delivers the closed-form output") {
    const auto op = dc_op(circuit("VSRC VK g 0 DC(3)\nVSRC VL d 0 DC(1)\nPRODFET M d g 0 mu=2 kth=1\n.PROBE I(M) I(VL)\n"));
    CHECK(op.value("I(M)") == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(op.value("I(VL)") == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(op.value("I(M)") == doctest::Approx(diminishing_returns(2.0, 1.0, 3.0, 1.0)).epsilon(1e-12));
}

TEST_CASE("producer with a load resistor converges by Newton") {
    const auto op = dc_op(circuit("VSRC VK g 0 DC(3)\nVSRC VS s 0 DC(4)\nFRICTION R s d b=1\n"
                                  "PRODFET M d g 0 mu=2 kth=1\n.PROBE V(d) I(M)\n"));
    const double l = op.value("V(d)");
    CHECK(op.value("I(M)") == doctest::Approx(4.0 - l).epsilon(1e-9));
    CHECK(op.value("I(M)") == doctest::Approx(diminishing_returns(2.0, 1.0, 3.0, l)).epsilon(1e-9));
    CHECK(op.newton_iters > 1);
}

TEST_CASE("diode blocks reverse incentive and conducts forward") {
    const auto fwd = dc_op(circuit("VSRC V 1 0 DC(1)\nFRICTION R 1 2 b=1\nDIODE D 2 0\n.PROBE I(D)\n"));
    CHECK(fwd.value("I(D)") == doctest::Approx(1.0).epsilon(1e-5));
    const auto rev = dc_op(circuit("VSRC V 1 0 DC(-1)\nFRICTION R 1 2 b=1\nDIODE D 2 0\n.PROBE I(D)\n"));
    CHECK(std::abs(rev.value("I(D)")) < 1e-8);
}

TEST_CASE("floating subgraph is named in the singular-matrix error") {
    const FlatCircuit c = circuit("FSRC F 1 0 DC(1)\nFRICTION R 1 0 b=1\nVSRC V a b DC(1)\nVOLTMETER M a b\n");
    SolverOptions o;
    o.gmin = 0.0;
    try {
        (void)dc_op(c, o);
        FAIL("expected a singular matrix");
    } catch (const SolveError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("singular") != std::string::npos);
        CHECK(msg.find("{a, b}") != std::string::npos);
    }
}

TEST_CASE("improper transfer function is rejected") {
    const FlatCircuit c = circuit("FSRC F 1 0 DC(1)\nFRICTION R 1 0 b=1\nVCVS E 2 0 ctrl+=1 ctrl-=0 gain=[0,1]/[1]\n"
                                  "FRICTION R2 2 0 b=1\n");
    CHECK_THROWS_AS((void)dc_op(c), SolveError);
}

TEST_CASE("controlled sources with rational gains settle to their DC gain") {
    const auto op = dc_op(circuit("VSRC V 1 0 DC(2)\nFRICTION R 1 0 b=1\n"
                                  "VCVS E 2 0 ctrl+=1 ctrl-=0 gain=[3]/[1,1]\nFRICTION R2 2 0 b=1\n"
                                  "AMMETER A 1 3\nFRICTION R3 3 0 b=0.5\n"
                                  "CCCS G 4 0 sense=A tf=4\nFRICTION R4 4 0 b=2\n.PROBE V(2) V(4)\n"));
    CHECK(op.value("V(2)") == doctest::Approx(6.0).epsilon(1e-9));
    // I(A) = 2 * 0.5 = 1; CCCS delivers 4 into node 4 across b = 2.
    CHECK(op.value("V(4)") == doctest::Approx(2.0).epsilon(1e-9));
}

// =============================================================================
// Transient
// =============================================================================

TEST_CASE("demand and storage oscillate at sqrt(eps/k) without decay") {
    const auto ts = run_tran("DEMAND L 1 0 eps=4\nSTORAGE C 1 0 k=1 q0=1\n.TRAN 1e-3 31.4159265 ic=uic\n.PROBE V(1)\n");
    const auto& v = ts.series("V(1)");
    CHECK(v.front() == doctest::Approx(1.0).epsilon(1e-6));
    std::vector<double> up;
    double first_peak = 0.0, last_peak = 0.0;
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k - 1] < 0.0 && v[k] >= 0.0) {
            up.push_back(ts.times[k - 1] + (ts.times[k] - ts.times[k - 1]) * (-v[k - 1]) / (v[k] - v[k - 1]));
        }
    }
    for (std::size_t k = 1; k + 1 < v.size(); ++k) {
        if (v[k] >= v[k - 1] && v[k] > v[k + 1]) {
            if (first_peak == 0.0) first_peak = v[k];
            last_peak = v[k];
        }
    }
    REQUIRE(up.size() >= 9);
    const double period = (up.back() - up.front()) / static_cast<double>(up.size() - 1);
    const double omega = 2.0 * 3.14159265358979323846 / period;
    CHECK(omega == doctest::Approx(2.0).epsilon(0.005));
    CHECK(last_peak > 0.99 * first_peak);
    for (double r : ts.node_residual) CHECK(r <= 1e-9);
}

TEST_CASE("storage shunted by friction follows the analytic step response") {
    const auto ts = run_tran(rc_deck(1e-3, "trap"));
    const auto& v = ts.series("V(1)");
    double worst = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) worst = std::max(worst, std::abs(v[k] - (1.0 - std::exp(-ts.times[k]))));
    CHECK(worst <= 1e-4);
    const auto be = run_tran(rc_deck(1e-3, "be"));
    CHECK(be.method == IntegrationMethod::BackwardEuler);
}

TEST_CASE("Richardson step halving measures trapezoid order 2 and Euler order 1") {
    CHECK(measured_order("trap") == doctest::Approx(2.0).epsilon(0.1));
    CHECK(measured_order("be") == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("zero-source circuit with zero initial state stays at zero") {
    const auto ts = run_tran("FSRC F 1 0 DC(0)\nFRICTION R 1 2 b=1\nSTORAGE C 2 0 k=1\nDEMAND L 1 0 eps=2\n"
                             ".TRAN 0.01 1 ic=zero\n");
    for (const auto& col : ts.values) {
        for (double x : col) CHECK(x == 0.0);
    }
}

TEST_CASE("stock and price probes integrate flows and incentives") {
    const auto ts = run_tran("FSRC F 1 0 DC(2)\nFRICTION R 1 0 b=1\n.TRAN 0.01 1\n.PROBE Q(R) P(1) Q(F)\n");
    CHECK(ts.series("Q(R)").back() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(ts.series("P(1)").back() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(ts.series("Q(F)").back() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("element-trio circuits without sources are passive") {
    const auto ts = run_tran("DEMAND L 1 2 eps=3\nFRICTION R 2 0 b=0.7\nSTORAGE C 1 0 k=2 q0=1.5\n"
                             "STORAGE C2 2 0 k=0.5\n.TRAN 0.01 20 ic=uic\n.PROBE V(1) V(2) I(L)\n");
    const auto& v1 = ts.series("V(1)");
    const auto& v2 = ts.series("V(2)");
    const auto& fl = ts.series("I(L)");
    // Stored quantity: q^2 / (2k) on storage, f^2 / (2 eps) on demand.
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v1.size(); ++k) {
        const double e = 0.5 * 2.0 * v1[k] * v1[k] + 0.5 * 0.5 * v2[k] * v2[k] + 0.5 * fl[k] * fl[k] / 3.0;
        CHECK(e <= prev + 1e-9);
        prev = e;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("noise is deterministic under a fixed seed and changes with the seed") {
    const std::string deck = "NOISE N 1 0 seed=7 amp=0.5\nFRICTION R 1 2 b=1\nSTORAGE C 2 0 k=1\n"
                             "FSRC F 2 0 NOISE(3,0.2)\n.TRAN 0.01 2\n.PROBE V(2)\n";
    const auto a = run_tran(deck);
    const auto b = run_tran(deck);
    CHECK(a.values == b.values);
    const FlatCircuit c = circuit(deck);
    SolverOptions o = SolverOptions::from_circuit(c);
    o.seed = 99;
    const auto d = transient(c, tran_of(c), o);
    CHECK(d.values != a.values);
    for (double r : a.node_residual) CHECK(r <= 1e-9);
}

TEST_CASE("diode curtailment in transient keeps the output non-negative") {
    const auto ts = run_tran("VSRC V 1 0 SINE(0,1,1)\nFRICTION R 1 2 b=1\nDIODE D 2 0\n"
                             "STORAGE C 2 0 k=0.01\n.TRAN 1e-3 2\n.PROBE I(D)\n");
    for (double i : ts.series("I(D)")) CHECK(i >= -1e-8);
    for (double r : ts.node_residual) CHECK(r <= 1e-9);
}

TEST_CASE("PID-controlled feedback holds the port and node conditions") {
    const auto ts = run_tran(R"(
.SUBCKT trader u c d c
  DEMAND L1 u d eps=2
  FRICTION R1 d m b=0.5
  STORAGE C1 m c k=4
.ENDS
FSRC F u 0 STEP(0.5,1)
FRICTION RU u 0 b=1
X1 u 0 d 0 trader
AMMETER A d e
FRICTION RL e 0 b=2
CCVS P f 0 sense=A tf=pid kp=1 ki=0.5 kd=0.1
FRICTION RF f 0 b=1
.TRAN 0.01 5
)");
    for (double r : ts.node_residual) CHECK(r <= 1e-9);
    for (double r : ts.port_residual) CHECK(r <= 1e-9);
}

// =============================================================================
// AC
// =============================================================================

TEST_CASE("direct delivery into a demand element is 0 dB and 0 degrees") {
    const FlatCircuit c = circuit("FSRC F 1 0 AC(1)\nDEMAND L 1 0 eps=1\n.PROBE I(L)\n");
    AcDirective ac;
    ac.log = true;
    ac.points = 40;
    ac.fstart = 1e-2;
    ac.fstop = 1e3;
    const auto sp = ac_sweep(c, ac.grid());
    const auto i = sp.index("I(L)");
    for (std::size_t k = 0; k < sp.freqs.size(); ++k) {
        CHECK(std::abs(sp.magnitude_db[i][k]) <= 0.01);
        CHECK(std::abs(sp.phase_deg[i][k]) <= 0.1);
    }
}

TEST_CASE("trader input incentive per unit flow equals symbolic z11") {
    const FlatCircuit c = circuit(R"(
.SUBCKT trader u c d c
  DEMAND L1 u d eps=2
  FRICTION R1 d m b=0.5
  STORAGE C1 m c k=4
.ENDS
FSRC F u 0 AC(1)
X1 u 0 d 0 trader
.FLOAT d
.PROBE V(u)
)");
    const ParameterModel z = trader(2.0, 2.0, 0.25);
    AcDirective ac;
    ac.points = 50;
    ac.fstart = 1e-2;
    ac.fstop = 1e3;
    const auto sp = ac_sweep(c, ac.grid());
    const auto i = sp.index("V(u)");
    for (std::size_t k = 0; k < sp.freqs.size(); ++k) {
        const Complex want = z.m.at(0, 0).eval(ComplexFrequency::at_cycles(sp.freqs[k]));
        CHECK(std::abs(sp.values[i][k] - want) <= 1e-6 * std::abs(want));
    }
}

TEST_CASE("passive two-port is reciprocal") {
    const char* body = "FRICTION R1 1 2 b=1\nSTORAGE C1 2 0 k=0.3\nDEMAND L1 2 3 eps=2\nFRICTION R2 3 0 b=0.4\n"
                       "MUTUAL M 1 0 3 0 eps11=2 eps12=0.5 eps22=1\n";
    const auto sp12 = ac_sweep(circuit(std::string(body) + "FSRC F 3 0 AC(1)\n.PROBE V(1)\n"), {0.1, 1.0, 10.0});
    const auto sp21 = ac_sweep(circuit(std::string(body) + "FSRC F 1 0 AC(1)\n.PROBE V(3)\n"), {0.1, 1.0, 10.0});
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(sp12.values[0][k] - sp21.values[0][k]) <= 1e-9 * std::abs(sp12.values[0][k]));
    }
}

TEST_CASE("a singular frequency point becomes a gap and the sweep continues") {
    const FlatCircuit c = circuit("FSRC F 1 0 AC(1)\nSTORAGE C 1 0 k=1\n.PROBE V(1)\n");
    const auto sp = ac_sweep(c, {0.0, 1.0});
    CHECK_FALSE(sp.gaps[0].empty());
    CHECK(sp.gaps[1].empty());
    CHECK(std::abs(sp.values[0][1]) == doctest::Approx(1.0 / (2.0 * 3.14159265358979323846)));
}

TEST_CASE("phase unwrapping removes 360 degree jumps") {
    const auto u = unwrap_degrees({170.0, -170.0, -10.0, -150.0});
    CHECK(u[1] == doctest::Approx(190.0));
    CHECK(u[2] == doctest::Approx(350.0));
    CHECK(u[3] == doctest::Approx(210.0));
}

TEST_CASE("CSV and JSON carry unit headers") {
    const auto ts = run_tran("FSRC F 1 0 DC(1)\nFRICTION R 1 0 b=1\n.TRAN 0.5 1\n.PROBE V(1) I(R)\n");
    const std::string csv = to_csv(ts);
    CHECK(csv.rfind("time [yr],V(1) [$/(#*yr)],I(R) [#/yr]\n", 0) == 0);
    CHECK(to_json(ts).find("\"unit\": \"#/yr\"") != std::string::npos);
}
