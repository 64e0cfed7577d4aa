#include "econoport/engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "econoport/errors.hpp"

namespace econoport {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct Term {
    int var;
    double coef;
};

/// Controllable canonical realization of a proper transfer function:
/// z' = A z + e_n u, y = r . z + d u.
struct Realization {
    int first = -1;
    int order = 0;
    std::vector<double> a;  // monic denominator coefficients a_0..a_{n-1}
    std::vector<double> r;
    double d = 0.0;
};

struct ProdFetPoint {
    double q = 0.0;
    double dk = 0.0;
    double dl = 0.0;
};

ProdFetPoint prodfet(double mu, double kth, double k, double l) {
    const double vov = k - kth;
    if (vov <= 0.0) return {};
    const double sign = l < 0.0 ? -1.0 : 1.0;
    const double al = std::abs(l);
    if (al < vov) return {sign * mu * (vov * al - 0.5 * al * al), sign * mu * al, mu * (vov - al)};
    return {sign * 0.5 * mu * vov * vov, sign * mu * vov, 0.0};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool generator_convention(ElementKind k) {
    switch (k) {
        case ElementKind::FlowSource:
        case ElementKind::IncentiveSource:
        case ElementKind::Noise:
        case ElementKind::Vcvs:
        case ElementKind::Vccs:
        case ElementKind::Ccvs:
        case ElementKind::Cccs:
            return true;
        default: return false;
    }
}

int branch_count(ElementKind k) {
    switch (k) {
        case ElementKind::Demand:
        case ElementKind::IncentiveSource:
        case ElementKind::Noise:
        case ElementKind::Ammeter:
        case ElementKind::Vcvs:
        case ElementKind::Ccvs:
            return 1;
        case ElementKind::Mutual: return 2;
        default: return 0;
    }
}

class Mna {
public:
    enum class Mode { Dc, Step };

    Mna(const FlatCircuit& c, const SolverOptions& o) : c_(c), opts_(o) {
        const std::size_t ne = c.elements.size();
        branch_.assign(ne, -1);
        real_.resize(ne);
        control_.resize(ne);
        nodes_ = c.node_count() - 1;
        int next = nodes_;
        for (std::size_t i = 0; i < ne; ++i) {
            const int nb = branch_count(c.elements[i].kind);
            if (nb > 0) {
                branch_[i] = next;
                next += nb;
            }
        }
        for (std::size_t i = 0; i < ne; ++i) {
            const FlatElement& e = c.elements[i];
            if (!e.tf) continue;
            const RationalFunction& h = *e.tf;
            const int n = h.den().degree();
            if (h.num().degree() > n) {
                throw SolveError("transfer function of " + e.name + " is improper; use a filtered derivative");
            }
            Realization& r = real_[i];
            r.order = n;
            r.first = n > 0 ? next : -1;
            next += n;
            const auto& dc = h.den().coeffs();
            std::vector<double> nc = h.num().coeffs();
            nc.resize(static_cast<std::size_t>(n) + 1, 0.0);
            r.d = nc[static_cast<std::size_t>(n)];
            for (int k = 0; k < n; ++k) {
                r.a.push_back(dc[static_cast<std::size_t>(k)]);
                r.r.push_back(nc[static_cast<std::size_t>(k)] - r.d * dc[static_cast<std::size_t>(k)]);
            }
        }
        dim_ = next;
        for (std::size_t i = 0; i < ne; ++i) {
            const FlatElement& e = c.elements[i];
            if (e.kind == ElementKind::Vcvs || e.kind == ElementKind::Vccs) {
                add_term(control_[i], nv(e.ctrl[0]), 1.0);
                add_term(control_[i], nv(e.ctrl[1]), -1.0);
            } else if (e.kind == ElementKind::Ccvs || e.kind == ElementKind::Cccs) {
                const auto& s = c.elements[static_cast<std::size_t>(e.sense)];
                add_term(control_[i], branch_[static_cast<std::size_t>(e.sense)],
                         generator_convention(s.kind) ? -1.0 : 1.0);
            }
            if (e.kind == ElementKind::Diode || e.kind == ElementKind::ProdFet) nonlinear_.push_back(static_cast<int>(i));
            if (e.kind == ElementKind::Storage) storage_.push_back(static_cast<int>(i));
        }
        diode_on_.assign(ne, 0);
        build();
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int nodes() const { return nodes_; }
    [[nodiscard]] bool linear() const { return nonlinear_.empty(); }
    [[nodiscard]] const MatrixXd& C() const { return C_; }
    [[nodiscard]] const std::vector<int>& storage() const { return storage_; }
    [[nodiscard]] static int nv(int node) { return node - 1; }
    [[nodiscard]] int branch(int element) const { return branch_[static_cast<std::size_t>(element)]; }

    [[nodiscard]] double at(const VectorXd& x, int node) const { return node > 0 ? x[nv(node)] : 0.0; }

    // -------------------------------------------------------------------------
    // Sources
    // -------------------------------------------------------------------------

    /// noise: per element walk value at this instant (empty = all zero).
    [[nodiscard]] double source_value(int idx, double t, const std::vector<double>& noise) const {
        const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
        double v = 0.0;
        for (const auto& w : e.waveform) v += w.value(t);
        if (!noise.empty()) v += noise[static_cast<std::size_t>(idx)];
        return v;
    }

    void rhs(double t, const std::vector<double>& noise, VectorXd& b) const {
        b.setZero(dim_);
        for (std::size_t i = 0; i < c_.elements.size(); ++i) {
            const FlatElement& e = c_.elements[i];
            switch (e.kind) {
                case ElementKind::FlowSource: {
                    const double f = source_value(static_cast<int>(i), t, noise);
                    add_rhs(b, nv(e.nodes[0]), f);
                    add_rhs(b, nv(e.nodes[1]), -f);
                    break;
                }
                case ElementKind::IncentiveSource:
                case ElementKind::Noise:
                    b[branch_[i]] = source_value(static_cast<int>(i), t, noise);
                    break;
                default: break;
            }
        }
    }

    void rhs_ac(VectorXcd& b) const {
        b.setZero(dim_);
        for (std::size_t i = 0; i < c_.elements.size(); ++i) {
            const FlatElement& e = c_.elements[i];
            if (e.kind != ElementKind::FlowSource && e.kind != ElementKind::IncentiveSource) continue;
            for (const auto& w : e.waveform) {
                if (w.kind != Waveform::Kind::Ac) continue;
                const double ph = w.args.size() > 1 ? w.args[1] * kPi / 180.0 : 0.0;
                const std::complex<double> p = std::polar(w.args[0], ph);
                if (e.kind == ElementKind::FlowSource) {
                    if (nv(e.nodes[0]) >= 0) b[nv(e.nodes[0])] += p;
                    if (nv(e.nodes[1]) >= 0) b[nv(e.nodes[1])] -= p;
                } else {
                    b[branch_[i]] += p;
                }
            }
        }
    }

    /// Elements carrying a random walk, with their seed and amplitude.
    struct NoiseSpec {
        int element;
        std::uint64_t seed;
        double amp;
    };

    [[nodiscard]] std::vector<NoiseSpec> noise_specs() const {
        std::vector<NoiseSpec> out;
        for (std::size_t i = 0; i < c_.elements.size(); ++i) {
            const FlatElement& e = c_.elements[i];
            auto seeded = [&](double s) {
                const auto base = static_cast<std::uint64_t>(s);
                return opts_.seed ? mix_seed(*opts_.seed, base) : base;
            };
            if (e.kind == ElementKind::Noise) out.push_back({static_cast<int>(i), seeded(e.param("seed")), e.param("amp")});
            for (const auto& w : e.waveform) {
                if (w.kind == Waveform::Kind::Noise) out.push_back({static_cast<int>(i), seeded(w.args[0]), w.args[1]});
            }
        }
        return out;
    }

    // -------------------------------------------------------------------------
    // Linear solves
    // -------------------------------------------------------------------------

    /// DC system matrix (regularized) or step matrix G + alpha C.
    [[nodiscard]] MatrixXd system(Mode mode, double alpha) const {
        MatrixXd a = G_;
        if (mode == Mode::Dc) {
            for (int i = 0; i < nodes_; ++i) a(i, i) += opts_.gmin;
            for (std::size_t i = 0; i < c_.elements.size(); ++i) {
                const FlatElement& e = c_.elements[i];
                if (e.kind == ElementKind::Demand) a(branch_[i], branch_[i]) -= opts_.gmin;
                if (e.kind == ElementKind::Mutual) {
                    a(branch_[i], branch_[i]) -= opts_.gmin;
                    a(branch_[i] + 1, branch_[i] + 1) -= opts_.gmin;
                }
                const Realization& r = real_[i];
                if (r.order > 0 && r.a[0] == 0.0) a(r.first + r.order - 1, r.first) += opts_.gmin;
            }
        } else {
            a += alpha * C_;
        }
        return a;
    }

    /// Newton iteration on base*x + f(x) = rhs. Returns iterations used.
    int newton(const MatrixXd& base, const VectorXd& b, VectorXd& x, const char* where) {
        if (linear()) {
            x = solve(base, b, where);
            return 1;
        }
        std::vector<int> flips(c_.elements.size(), 0);
        set_diode_states(x, flips, true);
        for (int it = 1; it <= opts_.max_iters; ++it) {
            MatrixXd a = base;
            VectorXd r = b;
            stamp_nonlinear(x, a, r);
            const VectorXd xn = solve(a, r, where);
            bool converged = true;
            for (int i = 0; i < dim_; ++i) {
                const double tol = opts_.reltol * std::abs(xn[i]) + (i < nodes_ ? opts_.vabstol : opts_.abstol);
                if (std::abs(xn[i] - x[i]) > tol) {
                    converged = false;
                    break;
                }
            }
            x = xn;
            if (set_diode_states(x, flips, false)) converged = false;
            if (converged) return it;
        }
        VectorXd r = b - base * x;
        add_nonlinear_currents(x, r);
        throw SolveError(std::string("Newton iteration did not converge ") + where + " after " +
                         std::to_string(opts_.max_iters) + " iterations (residual " +
                         std::to_string(r.cwiseAbs().maxCoeff()) + ")");
    }

    VectorXd solve(const MatrixXd& a, const VectorXd& b, const char* where) {
        Eigen::PartialPivLU<MatrixXd> lu(a);
        VectorXd x = lu.solve(b);
        check_solution(a, lu.matrixLU(), x, where);
        return x;
    }

    /// Factorization cache for linear transient steps keyed by alpha.
    const Eigen::PartialPivLU<MatrixXd>& factor(double alpha, const char* where) {
        for (auto& [key, lu] : cache_) {
            if (key == alpha) return lu;
        }
        const MatrixXd a = system(Mode::Step, alpha);
        cache_.emplace_back(alpha, Eigen::PartialPivLU<MatrixXd>(a));
        const auto& lu = cache_.back().second;
        VectorXd probe = VectorXd::Ones(dim_);
        VectorXd x = lu.solve(probe);
        check_solution(a, lu.matrixLU(), x, where);
        return lu;
    }

    void check_solution(const MatrixXd& a, const MatrixXd& lu, const VectorXd& x, const char* where) const {
        double pmin = std::numeric_limits<double>::infinity();
        double pmax = 0.0;
        for (int i = 0; i < lu.rows(); ++i) {
            pmin = std::min(pmin, std::abs(lu(i, i)));
            pmax = std::max(pmax, std::abs(lu(i, i)));
        }
        if (lu.rows() > 0 && (!(pmin > 1e-300) || pmin < 1e-18 * pmax || !x.allFinite())) {
            throw SolveError(std::string("singular matrix ") + where + ": " + floating_report(a));
        }
    }

    /// Names nodes without a conductive path to ground.
    [[nodiscard]] std::string floating_report(const MatrixXd&) const {
        std::vector<int> parent(static_cast<std::size_t>(c_.node_count()));
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> root = [&](int i) { return parent[i] == i ? i : parent[i] = root(parent[i]); };
        auto join = [&](int a, int b) { parent[root(a)] = root(b); };
        for (const auto& e : c_.elements) {
            switch (e.kind) {
                case ElementKind::Storage:
                case ElementKind::FlowSource:
                case ElementKind::Vccs:
                case ElementKind::Cccs:
                case ElementKind::Voltmeter:
                    break;
                case ElementKind::Mutual:
                    join(e.nodes[0], e.nodes[1]);
                    join(e.nodes[2], e.nodes[3]);
                    break;
                case ElementKind::ProdFet: join(e.nodes[0], e.nodes[2]); break;
                default: join(e.nodes[0], e.nodes[1]); break;
            }
        }
        std::string names;
        for (int n = 1; n < c_.node_count(); ++n) {
            if (root(n) != root(0)) names += (names.empty() ? "" : ", ") + c_.node_names[static_cast<std::size_t>(n)];
        }
        if (names.empty()) return "no floating subgraph found (loop of incentive-defined branches?)";
        return "floating subgraph {" + names + "} has no conductive path to ground";
    }

    // -------------------------------------------------------------------------
    // Nonlinear elements
    // -------------------------------------------------------------------------

    /// Returns true if any diode changed state.
    bool set_diode_states(const VectorXd& x, std::vector<int>& flips, bool init) {
        bool changed = false;
        for (int idx : nonlinear_) {
            const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
            if (e.kind != ElementKind::Diode) continue;
            auto& st = diode_on_[static_cast<std::size_t>(idx)];
            const char on = at(x, e.nodes[0]) - at(x, e.nodes[1]) > 0.0 ? 1 : 0;
            if (init) {
                st = on;
                continue;
            }
            if (on != st) {
                if (++flips[static_cast<std::size_t>(idx)] > 50) continue;  // frozen
                st = on;
                changed = true;
            }
        }
        return changed;
    }

    [[nodiscard]] double diode_g(int idx) const {
        const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
        return diode_on_[static_cast<std::size_t>(idx)] ? 1.0 / e.param("ron", 1e-6) : 1.0 / e.param("roff", 1e9);
    }

    [[nodiscard]] ProdFetPoint fet_point(int idx, const VectorXd& x) const {
        const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
        const double vd = at(x, e.nodes[0]), vg = at(x, e.nodes[1]), vs = at(x, e.nodes[2]);
        return prodfet(e.param("mu"), e.param("kth"), vg - vs, vd - vs);
    }

    template <typename M, typename V>
    void stamp_linearized(const VectorXd& x, M& a, V* b) const {
        for (int idx : nonlinear_) {
            const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
            if (e.kind == ElementKind::Diode) {
                stamp_g(a, nv(e.nodes[0]), nv(e.nodes[1]), diode_g(idx));
                continue;
            }
            const int d = nv(e.nodes[0]), g = nv(e.nodes[1]), s = nv(e.nodes[2]);
            const ProdFetPoint p = fet_point(idx, x);
            const double k0 = at(x, e.nodes[1]) - at(x, e.nodes[2]);
            const double l0 = at(x, e.nodes[0]) - at(x, e.nodes[2]);
            for (const auto& [row, sign] : {std::pair{d, 1.0}, std::pair{s, -1.0}}) {
                if (row < 0) continue;
                if (g >= 0) a(row, g) += sign * p.dk;
                if (d >= 0) a(row, d) += sign * p.dl;
                if (s >= 0) a(row, s) -= sign * (p.dk + p.dl);
                if (b) (*b)[row] -= sign * (p.q - p.dk * k0 - p.dl * l0);
            }
        }
    }

    void stamp_nonlinear(const VectorXd& x, MatrixXd& a, VectorXd& b) const { stamp_linearized(x, a, &b); }

    void add_nonlinear_currents(const VectorXd& x, VectorXd& r) const {
        for (int idx : nonlinear_) {
            const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
            double i = 0.0;
            int from = nv(e.nodes[0]), to = 0;
            if (e.kind == ElementKind::Diode) {
                i = diode_g(idx) * (at(x, e.nodes[0]) - at(x, e.nodes[1]));
                to = nv(e.nodes[1]);
            } else {
                i = fet_point(idx, x).q;
                to = nv(e.nodes[2]);
            }
            if (from >= 0) r[from] -= i;
            if (to >= 0) r[to] += i;
        }
    }

    // -------------------------------------------------------------------------
    // Element flows
    // -------------------------------------------------------------------------

    /// y of a controlled source from the unknown vector.
    template <typename V>
    [[nodiscard]] auto controlled_output(int idx, const V& x) const {
        const Realization& r = real_[static_cast<std::size_t>(idx)];
        typename V::Scalar y = 0.0;
        for (const auto& t : control_[static_cast<std::size_t>(idx)]) y += r.d * t.coef * x[t.var];
        for (int k = 0; k < r.order; ++k) y += r.r[static_cast<std::size_t>(k)] * x[r.first + k];
        return y;
    }

    /// Flow in reporting convention. storage_flow: per-element flows of
    /// storage elements (reactive current), source values at t.
    [[nodiscard]] double flow(int idx, const VectorXd& x, double t, const std::vector<double>& noise,
                              const std::vector<double>& storage_flow) const {
        const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
        const auto ui = static_cast<std::size_t>(idx);
        switch (e.kind) {
            case ElementKind::Friction: return e.param("b") * (at(x, e.nodes[0]) - at(x, e.nodes[1]));
            case ElementKind::Storage: return storage_flow[ui];
            case ElementKind::Demand:
            case ElementKind::Mutual:
            case ElementKind::Ammeter: return x[branch_[ui]];
            case ElementKind::IncentiveSource:
            case ElementKind::Noise:
            case ElementKind::Vcvs:
            case ElementKind::Ccvs: return -x[branch_[ui]];
            case ElementKind::FlowSource: return source_value(idx, t, noise);
            case ElementKind::Vccs:
            case ElementKind::Cccs: return controlled_output(idx, x);
            case ElementKind::Diode: return diode_g(idx) * (at(x, e.nodes[0]) - at(x, e.nodes[1]));
            case ElementKind::ProdFet: return fet_point(idx, x).q;
            case ElementKind::Voltmeter: return 0.0;
        }
        return 0.0;
    }

    [[nodiscard]] std::complex<double> flow_ac(int idx, const VectorXcd& x, std::complex<double> s,
                                               const VectorXd& op) const {
        const FlatElement& e = c_.elements[static_cast<std::size_t>(idx)];
        const auto ui = static_cast<std::size_t>(idx);
        auto v = [&](int n) { return n > 0 ? x[nv(n)] : std::complex<double>(0.0); };
        switch (e.kind) {
            case ElementKind::Friction: return e.param("b") * (v(e.nodes[0]) - v(e.nodes[1]));
            case ElementKind::Storage: return s * e.param("k") * (v(e.nodes[0]) - v(e.nodes[1]));
            case ElementKind::Demand:
            case ElementKind::Mutual:
            case ElementKind::Ammeter: return x[branch_[ui]];
            case ElementKind::IncentiveSource:
            case ElementKind::Noise:
            case ElementKind::Vcvs:
            case ElementKind::Ccvs: return -x[branch_[ui]];
            case ElementKind::FlowSource: {
                std::complex<double> p = 0.0;
                for (const auto& w : e.waveform) {
                    if (w.kind == Waveform::Kind::Ac) p += std::polar(w.args[0], w.args.size() > 1 ? w.args[1] * kPi / 180.0 : 0.0);
                }
                return p;
            }
            case ElementKind::Vccs:
            case ElementKind::Cccs: return controlled_output(idx, x);
            case ElementKind::Diode: return diode_g(idx) * (v(e.nodes[0]) - v(e.nodes[1]));
            case ElementKind::ProdFet: {
                const ProdFetPoint p = fet_point(idx, op);
                return p.dk * (v(e.nodes[1]) - v(e.nodes[2])) + p.dl * (v(e.nodes[0]) - v(e.nodes[2]));
            }
            case ElementKind::Voltmeter: return 0.0;
        }
        return 0.0;
    }

    /// Net flow leaving each node (index 0 = ground) through its elements.
    [[nodiscard]] std::vector<double> node_sums(const VectorXd& x, double t, const std::vector<double>& noise,
                                                const std::vector<double>& storage_flow) const {
        std::vector<double> sum(static_cast<std::size_t>(c_.node_count()), 0.0);
        auto leave = [&](int node, double i) { sum[static_cast<std::size_t>(node)] += i; };
        for (std::size_t i = 0; i < c_.elements.size(); ++i) {
            const FlatElement& e = c_.elements[i];
            const int idx = static_cast<int>(i);
            if (e.kind == ElementKind::Voltmeter) continue;
            if (e.kind == ElementKind::Mutual) {
                leave(e.nodes[0], x[branch_[i]]);
                leave(e.nodes[1], -x[branch_[i]]);
                leave(e.nodes[2], x[branch_[i] + 1]);
                leave(e.nodes[3], -x[branch_[i] + 1]);
                continue;
            }
            double f = flow(idx, x, t, noise, storage_flow);
            if (generator_convention(e.kind)) f = -f;
            if (e.kind == ElementKind::ProdFet) {
                leave(e.nodes[0], f);
                leave(e.nodes[2], -f);
                continue;
            }
            leave(e.nodes[0], f);
            leave(e.nodes[1], -f);
        }
        return sum;
    }

    /// Largest nodal flow imbalance using element flows.
    [[nodiscard]] double node_residual(const VectorXd& x, double t, const std::vector<double>& noise,
                                       const std::vector<double>& storage_flow) const {
        const auto sum = node_sums(x, t, noise, storage_flow);
        double worst = 0.0;
        for (std::size_t n = 1; n < sum.size(); ++n) worst = std::max(worst, std::abs(sum[n]));
        return worst;
    }

    /// Storage flows that balance every node given the other element flows,
    /// split between storages as i = K A^T (A K A^T)^+ r.
    [[nodiscard]] std::vector<double> balancing_storage_flows(const VectorXd& x, double t,
                                                              const std::vector<double>& noise) const {
        std::vector<double> out(c_.elements.size(), 0.0);
        if (storage_.empty()) return out;
        const auto sum = node_sums(x, t, noise, out);
        const auto ns = static_cast<int>(storage_.size());
        MatrixXd a = MatrixXd::Zero(nodes_, ns);
        VectorXd kdiag(ns);
        for (int s = 0; s < ns; ++s) {
            const FlatElement& e = c_.elements[static_cast<std::size_t>(storage_[static_cast<std::size_t>(s)])];
            if (nv(e.nodes[0]) >= 0) a(nv(e.nodes[0]), s) += 1.0;
            if (nv(e.nodes[1]) >= 0) a(nv(e.nodes[1]), s) -= 1.0;
            kdiag[s] = e.param("k");
        }
        VectorXd r(nodes_);
        for (int n = 0; n < nodes_; ++n) r[n] = -sum[static_cast<std::size_t>(n + 1)];
        const MatrixXd ak = a * kdiag.asDiagonal();
        const VectorXd y = (ak * a.transpose()).completeOrthogonalDecomposition().solve(r);
        const VectorXd i = ak.transpose() * y;
        for (int s = 0; s < ns; ++s) out[static_cast<std::size_t>(storage_[static_cast<std::size_t>(s)])] = i[s];
        return out;
    }

    [[nodiscard]] double port_residual(const VectorXd& x) const {
        double worst = 0.0;
        for (const auto& g : c_.port_groups) {
            double s = 0.0;
            for (int m : g.ammeters) s += x[branch_[static_cast<std::size_t>(m)]];
            worst = std::max(worst, std::abs(s));
        }
        return worst;
    }

    // -------------------------------------------------------------------------
    // AC
    // -------------------------------------------------------------------------

    [[nodiscard]] MatrixXcd ac_matrix(std::complex<double> s, const VectorXd& op) const {
        MatrixXcd a = G_.cast<std::complex<double>>() + s * C_.cast<std::complex<double>>();
        stamp_linearized(op, a, static_cast<VectorXcd*>(nullptr));
        return a;
    }

    void init_diodes(const VectorXd& x) {
        std::vector<int> flips(c_.elements.size(), 0);
        set_diode_states(x, flips, true);
    }

private:
    const FlatCircuit& c_;
    SolverOptions opts_;
    int nodes_ = 0;
    int dim_ = 0;
    std::vector<int> branch_;
    std::vector<Realization> real_;
    std::vector<std::vector<Term>> control_;
    std::vector<int> nonlinear_;
    std::vector<int> storage_;
    std::vector<char> diode_on_;
    MatrixXd G_, C_;
    std::vector<std::pair<double, Eigen::PartialPivLU<MatrixXd>>> cache_;

    static void add_term(std::vector<Term>& t, int var, double coef) {
        if (var >= 0) t.push_back({var, coef});
    }

    static void add_rhs(VectorXd& b, int row, double v) {
        if (row >= 0) b[row] += v;
    }

    template <typename M>
    static void stamp_g(M& m, int a, int b, double g) {
        if (a >= 0) m(a, a) += g;
        if (b >= 0) m(b, b) += g;
        if (a >= 0 && b >= 0) {
            m(a, b) -= g;
            m(b, a) -= g;
        }
    }

    /// KCL coupling of branch flow j entering + and leaving -, and the
    /// incentive row v+ - v-.
    void stamp_branch(int j, int p, int m) {
        if (p >= 0) {
            G_(p, j) += 1.0;
            G_(j, p) += 1.0;
        }
        if (m >= 0) {
            G_(m, j) -= 1.0;
            G_(j, m) -= 1.0;
        }
    }

    void build() {
        G_ = MatrixXd::Zero(dim_, dim_);
        C_ = MatrixXd::Zero(dim_, dim_);
        for (std::size_t i = 0; i < c_.elements.size(); ++i) {
            const FlatElement& e = c_.elements[i];
            const int p = e.nodes.empty() ? -1 : nv(e.nodes[0]);
            const int m = e.nodes.size() < 2 ? -1 : nv(e.nodes[1]);
            const int j = branch_[i];
            switch (e.kind) {
                case ElementKind::Friction: stamp_g(G_, p, m, e.param("b")); break;
                case ElementKind::Storage: stamp_g(C_, p, m, e.param("k")); break;
                case ElementKind::Demand:
                    stamp_branch(j, p, m);
                    C_(j, j) -= 1.0 / e.param("eps");
                    break;
                case ElementKind::Mutual: {
                    Eigen::Matrix2d eps;
                    eps << e.param("eps11"), e.param("eps12"), e.param("eps12"), e.param("eps22");
                    const Eigen::Matrix2d l = eps.inverse();
                    stamp_branch(j, p, m);
                    stamp_branch(j + 1, nv(e.nodes[2]), nv(e.nodes[3]));
                    C_.block<2, 2>(j, j) -= l;
                    break;
                }
                case ElementKind::IncentiveSource:
                case ElementKind::Noise:
                case ElementKind::Ammeter: stamp_branch(j, p, m); break;
                case ElementKind::Vcvs:
                case ElementKind::Ccvs:
                    stamp_branch(j, p, m);
                    stamp_output(static_cast<int>(i), j, -1.0);
                    break;
                case ElementKind::Vccs:
                case ElementKind::Cccs:
                    // Delivers y out of + into the network.
                    if (p >= 0) stamp_output(static_cast<int>(i), p, -1.0);
                    if (m >= 0) stamp_output(static_cast<int>(i), m, 1.0);
                    break;
                default: break;
            }
            const Realization& r = real_[i];
            for (int k = 0; k < r.order; ++k) {
                const int row = r.first + k;
                C_(row, row) += 1.0;
                if (k + 1 < r.order) {
                    G_(row, row + 1) -= 1.0;
                } else {
                    for (int q = 0; q < r.order; ++q) G_(row, r.first + q) += r.a[static_cast<std::size_t>(q)];
                    for (const auto& t : control_[i]) G_(row, t.var) -= t.coef;
                }
            }
        }
    }

    /// row += sign * y, with y = d*u + r.z
    void stamp_output(int idx, int row, double sign) {
        const Realization& r = real_[static_cast<std::size_t>(idx)];
        for (const auto& t : control_[static_cast<std::size_t>(idx)]) G_(row, t.var) += sign * r.d * t.coef;
        for (int k = 0; k < r.order; ++k) G_(row, r.first + k) += sign * r.r[static_cast<std::size_t>(k)];
    }
};

// =============================================================================
// Probe evaluation
// =============================================================================

std::vector<ProbeRef> probe_list(const FlatCircuit& c, const std::vector<ProbeRef>& extra) {
    std::vector<ProbeRef> out = c.probes;
    out.insert(out.end(), extra.begin(), extra.end());
    if (!out.empty()) return out;
    for (int n = 1; n < c.node_count(); ++n) {
        ProbeDecl p;
        p.fn = 'V';
        p.args = {c.node_names[static_cast<std::size_t>(n)]};
        out.push_back(c.resolve_probe(p));
    }
    for (const auto& e : c.elements) {
        if (e.kind == ElementKind::Voltmeter) continue;
        ProbeDecl p;
        p.fn = 'I';
        p.args = {e.name};
        out.push_back(c.resolve_probe(p));
    }
    return out;
}

std::vector<ProbeColumn> columns_of(const std::vector<ProbeRef>& probes) {
    std::vector<ProbeColumn> cols;
    for (const auto& p : probes) cols.push_back({p.label, unit_label(p.kind)});
    return cols;
}

double stock_offset(const FlatCircuit& c, const ProbeRef& p) {
    if (p.kind != ProbeRef::Kind::Stock) return 0.0;
    return c.elements[static_cast<std::size_t>(p.element)].param("q0");
}

std::vector<double> zero_storage_flow(const FlatCircuit& c) { return std::vector<double>(c.elements.size(), 0.0); }

}  // namespace

// =============================================================================
// Options and result accessors
// =============================================================================

SolverOptions SolverOptions::from_circuit(const FlatCircuit& c) {
    SolverOptions o;
    auto get = [&](const char* key, double& target) {
        if (const auto it = c.options.find(key); it != c.options.end()) target = it->second;
    };
    get("reltol", o.reltol);
    get("abstol", o.abstol);
    get("vabstol", o.vabstol);
    get("gmin", o.gmin);
    double iters = o.max_iters;
    get("maxiter", iters);
    o.max_iters = std::max(1, static_cast<int>(iters));
    if (const auto it = c.options.find("seed"); it != c.options.end()) o.seed = static_cast<std::uint64_t>(it->second);
    return o;
}

double OperatingPoint::value(const std::string& label) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].label == label) return values[i];
    }
    throw Error("no probe '" + label + "' in operating point");
}

const std::vector<double>& TimeSeries::series(const std::string& label) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].label == label) return values[i];
    }
    throw Error("no probe '" + label + "' in time series");
}

bool TimeSeries::has(const std::string& label) const {
    return std::any_of(columns.begin(), columns.end(), [&](const ProbeColumn& c) { return c.label == label; });
}

std::size_t Spectrum::index(const std::string& label) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].label == label) return i;
    }
    throw Error("no probe '" + label + "' in spectrum");
}

std::vector<double> unwrap_degrees(const std::vector<double>& phase) {
    std::vector<double> out = phase;
    double offset = 0.0;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (double& p : out) {
        if (!std::isfinite(p)) continue;
        if (std::isfinite(prev)) {
            double d = p + offset - prev;
            while (d > 180.0) {
                offset -= 360.0;
                d -= 360.0;
            }
            while (d < -180.0) {
                offset += 360.0;
                d += 360.0;
            }
        }
        p += offset;
        prev = p;
    }
    return out;
}

// =============================================================================
// DC operating point
// =============================================================================

OperatingPoint dc_op(const FlatCircuit& c, const SolverOptions& opts, const std::vector<ProbeRef>& extra, double at_time) {
    Mna mna(c, opts);
    VectorXd b;
    mna.rhs(at_time, {}, b);
    VectorXd x = VectorXd::Zero(mna.dim());
    OperatingPoint op;
    op.newton_iters = mna.newton(mna.system(Mna::Mode::Dc, 0.0), b, x, "at the DC operating point");
    const auto probes = probe_list(c, extra);
    op.columns = columns_of(probes);
    const auto sflow = zero_storage_flow(c);
    for (const auto& p : probes) {
        double v = 0.0;
        switch (p.kind) {
            case ProbeRef::Kind::Incentive: v = mna.at(x, p.node_plus) - mna.at(x, p.node_minus); break;
            case ProbeRef::Kind::Flow: v = mna.flow(p.element, x, at_time, {}, sflow); break;
            case ProbeRef::Kind::Stock: {
                const auto& e = c.elements[static_cast<std::size_t>(p.element)];
                v = e.kind == ElementKind::Storage ? e.param("k") * (mna.at(x, e.nodes[0]) - mna.at(x, e.nodes[1])) : 0.0;
                break;
            }
            case ProbeRef::Kind::Price: v = 0.0; break;
        }
        op.values.push_back(v);
    }
    op.max_node_residual = mna.node_residual(x, at_time, {}, sflow);
    op.x.assign(x.data(), x.data() + x.size());
    return op;
}

// =============================================================================
// Transient
// =============================================================================

TimeSeries transient(const FlatCircuit& c, const TranDirective& tran, const SolverOptions& opts,
                     const std::vector<ProbeRef>& extra) {
    if (!(tran.tstep > 0.0) || !(tran.tstop > tran.tstep)) throw SolveError("transient needs 0 < tstep < tstop");
    Mna mna(c, opts);
    const int dim = mna.dim();
    const auto nsteps = static_cast<std::size_t>(std::ceil(tran.tstop / tran.tstep - 1e-9));
    std::vector<double> times(nsteps + 1);
    for (std::size_t k = 0; k <= nsteps; ++k) times[k] = std::min(tran.tstop, static_cast<double>(k) * tran.tstep);
    times.back() = tran.tstop;

    // Random walks, one value per time point.
    const auto specs = mna.noise_specs();
    std::vector<std::vector<double>> walk(specs.size(), std::vector<double>(nsteps + 1, 0.0));
    for (std::size_t s = 0; s < specs.size(); ++s) {
        std::mt19937_64 gen(specs[s].seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t k = 1; k <= nsteps; ++k) {
            walk[s][k] = walk[s][k - 1] + specs[s].amp * std::sqrt(times[k] - times[k - 1]) * normal(gen);
        }
    }
    std::vector<double> noise(specs.empty() ? 0 : c.elements.size(), 0.0);
    auto noise_at = [&](std::size_t k) {
        if (specs.empty()) return;
        std::fill(noise.begin(), noise.end(), 0.0);
        for (std::size_t s = 0; s < specs.size(); ++s) noise[static_cast<std::size_t>(specs[s].element)] += walk[s][k];
    };

    std::vector<double> bps;
    for (const auto& e : c.elements) {
        for (const auto& w : e.waveform) w.breakpoints(bps);
    }
    std::sort(bps.begin(), bps.end());
    auto breakpoint_in = [&](double lo, double hi) {
        const auto it = std::upper_bound(bps.begin(), bps.end(), lo);
        return it != bps.end() && *it <= hi;
    };

    const MatrixXd& C = mna.C();
    VectorXd x = VectorXd::Zero(dim);
    VectorXd b(dim);
    VectorXd q(dim), qd = VectorXd::Zero(dim);
    std::vector<double> sflow(c.elements.size(), 0.0), sq(c.elements.size(), 0.0), sqd(c.elements.size(), 0.0);
    auto storage_charge = [&](int idx, const VectorXd& xv) {
        const auto& e = c.elements[static_cast<std::size_t>(idx)];
        return e.param("k") * (mna.at(xv, e.nodes[0]) - mna.at(xv, e.nodes[1]));
    };

    noise_at(0);
    if (tran.ic == InitialCondition::OperatingPoint) {
        mna.rhs(0.0, noise, b);
        mna.newton(mna.system(Mna::Mode::Dc, 0.0), b, x, "at the initial operating point");
        for (int s : mna.storage()) sq[static_cast<std::size_t>(s)] = storage_charge(s, x);
    } else {
        // Consistent start from prescribed stocks: a tiny implicit step holds the
        // reactive charges while the algebraic unknowns settle.
        VectorXd qh = VectorXd::Zero(dim);
        if (tran.ic == InitialCondition::User) {
            for (std::size_t i = 0; i < c.elements.size(); ++i) {
                const auto& e = c.elements[i];
                if (e.kind == ElementKind::Storage) {
                    if (Mna::nv(e.nodes[0]) >= 0) qh[Mna::nv(e.nodes[0])] += e.param("q0");
                    if (Mna::nv(e.nodes[1]) >= 0) qh[Mna::nv(e.nodes[1])] -= e.param("q0");
                } else if (e.kind == ElementKind::Demand) {
                    qh[mna.branch(static_cast<int>(i))] = -e.param("f0") / e.param("eps");
                } else if (e.kind == ElementKind::Mutual) {
                    Eigen::Matrix2d eps;
                    eps << e.param("eps11"), e.param("eps12"), e.param("eps12"), e.param("eps22");
                    const Eigen::Vector2d flux = eps.inverse() * Eigen::Vector2d(e.param("f01"), e.param("f02"));
                    qh[mna.branch(static_cast<int>(i))] = -flux[0];
                    qh[mna.branch(static_cast<int>(i)) + 1] = -flux[1];
                }
            }
        }
        const double h0 = 1e-6 * tran.tstep;
        mna.rhs(0.0, noise, b);
        VectorXd rhs = b + qh / h0;
        mna.newton(mna.system(Mna::Mode::Step, 1.0 / h0), rhs, x, "at the initial condition");
        for (int s : mna.storage()) sq[static_cast<std::size_t>(s)] = storage_charge(s, x);
        sflow = mna.balancing_storage_flows(x, 0.0, noise);
    }
    q = C * x;

    const auto probes = probe_list(c, extra);
    TimeSeries ts;
    ts.method = tran.method;
    ts.times = times;
    ts.columns = columns_of(probes);
    ts.values.assign(probes.size(), std::vector<double>(nsteps + 1, 0.0));
    ts.node_residual.assign(nsteps + 1, 0.0);
    ts.port_residual.assign(nsteps + 1, 0.0);
    std::vector<double> prev_raw(probes.size(), 0.0);

    auto record = [&](std::size_t k) {
        const double t = times[k];
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const ProbeRef& pr = probes[p];
            double raw = 0.0;
            switch (pr.kind) {
                case ProbeRef::Kind::Incentive:
                case ProbeRef::Kind::Price: raw = mna.at(x, pr.node_plus) - mna.at(x, pr.node_minus); break;
                case ProbeRef::Kind::Flow:
                case ProbeRef::Kind::Stock: raw = mna.flow(pr.element, x, t, noise, sflow); break;
            }
            double& out = ts.values[p][k];
            if (pr.kind == ProbeRef::Kind::Incentive || pr.kind == ProbeRef::Kind::Flow) {
                out = raw;
            } else if (pr.kind == ProbeRef::Kind::Stock &&
                       c.elements[static_cast<std::size_t>(pr.element)].kind == ElementKind::Storage) {
                out = sq[static_cast<std::size_t>(pr.element)];
            } else if (k == 0) {
                out = stock_offset(c, pr);
            } else {
                out = ts.values[p][k - 1] + 0.5 * (times[k] - times[k - 1]) * (raw + prev_raw[p]);
            }
            prev_raw[p] = raw;
        }
        ts.node_residual[k] = mna.node_residual(x, t, noise, sflow);
        ts.port_residual[k] = mna.port_residual(x);
    };
    record(0);

    const bool linear = mna.linear();
    for (std::size_t k = 0; k < nsteps; ++k) {
        const double t0 = times[k];
        const double t1 = times[k + 1];
        const double h = t1 - t0;
        const bool be = tran.method == IntegrationMethod::BackwardEuler || k == 0 ||
                        breakpoint_in(k > 0 ? times[k - 1] : -1.0, t1);
        const double alpha = be ? 1.0 / h : 2.0 / h;
        noise_at(k + 1);
        mna.rhs(t1, noise, b);
        VectorXd rhs = b + alpha * q;
        if (!be) rhs += qd;
        char where[96];
        std::snprintf(where, sizeof where, "at t=%.9g", t1);
        if (linear) {
            x = mna.factor(alpha, where).solve(rhs);
            if (!x.allFinite()) throw SolveError(std::string("singular companion system ") + where);
        } else {
            mna.newton(mna.system(Mna::Mode::Step, alpha), rhs, x, where);
        }
        const VectorXd qn = C * x;
        qd = be ? VectorXd((qn - q) / h) : VectorXd(alpha * (qn - q) - qd);
        q = qn;
        for (int s : mna.storage()) {
            const auto us = static_cast<std::size_t>(s);
            const double qe = storage_charge(s, x);
            const double fe = be ? (qe - sq[us]) / h : alpha * (qe - sq[us]) - sqd[us];
            sqd[us] = fe;
            sflow[us] = fe;
            sq[us] = qe;
        }
        record(k + 1);
    }
    return ts;
}

// =============================================================================
// AC sweep
// =============================================================================

Spectrum ac_sweep(const FlatCircuit& c, const std::vector<double>& freqs, const SolverOptions& opts,
                  const std::vector<ProbeRef>& extra) {
    Mna mna(c, opts);
    VectorXd op = VectorXd::Zero(mna.dim());
    if (!mna.linear()) {
        VectorXd b;
        mna.rhs(0.0, {}, b);
        mna.newton(mna.system(Mna::Mode::Dc, 0.0), b, op, "at the AC operating point");
    }
    mna.init_diodes(op);
    VectorXcd stim;
    mna.rhs_ac(stim);

    const auto probes = probe_list(c, extra);
    Spectrum sp;
    sp.freqs = freqs;
    sp.columns = columns_of(probes);
    const std::size_t nf = freqs.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    sp.values.assign(probes.size(), std::vector<std::complex<double>>(nf, {nan, nan}));
    sp.gaps.assign(nf, "");
    for (std::size_t i = 0; i < nf; ++i) {
        const std::complex<double> s(0.0, 2.0 * kPi * freqs[i]);
        const MatrixXcd a = mna.ac_matrix(s, op);
        Eigen::PartialPivLU<MatrixXcd> lu(a);
        const VectorXcd x = lu.solve(stim);
        double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
        for (int r = 0; r < a.rows(); ++r) {
            pmin = std::min(pmin, std::abs(lu.matrixLU()(r, r)));
            pmax = std::max(pmax, std::abs(lu.matrixLU()(r, r)));
        }
        if (!x.allFinite() || !(pmin > 1e-18 * pmax)) {
            std::ostringstream os;
            os << "singular system at f=" << freqs[i];
            sp.gaps[i] = os.str();
            continue;
        }
        for (std::size_t p = 0; p < probes.size(); ++p) {
            const ProbeRef& pr = probes[p];
            std::complex<double> v;
            auto nodev = [&](int n) { return n > 0 ? x[Mna::nv(n)] : std::complex<double>(0.0); };
            switch (pr.kind) {
                case ProbeRef::Kind::Incentive: v = nodev(pr.node_plus) - nodev(pr.node_minus); break;
                case ProbeRef::Kind::Price: v = (nodev(pr.node_plus) - nodev(pr.node_minus)) / s; break;
                case ProbeRef::Kind::Flow: v = mna.flow_ac(pr.element, x, s, op); break;
                case ProbeRef::Kind::Stock: v = mna.flow_ac(pr.element, x, s, op) / s; break;
            }
            sp.values[p][i] = v;
        }
    }
    for (const auto& col : sp.values) {
        std::vector<double> mag(nf), ph(nf);
        for (std::size_t i = 0; i < nf; ++i) {
            mag[i] = 20.0 * std::log10(std::abs(col[i]));
            ph[i] = std::arg(col[i]) * 180.0 / kPi;
        }
        sp.magnitude_db.push_back(std::move(mag));
        sp.phase_deg.push_back(unwrap_degrees(ph));
    }
    return sp;
}

// =============================================================================
// CSV / JSON
// =============================================================================

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string header(const ProbeColumn& c) { return c.label + " [" + c.unit + "]"; }

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

nlohmann::json column_json(const ProbeColumn& c) { return {{"name", c.label}, {"unit", c.unit}}; }

}  // namespace

std::string to_csv(const OperatingPoint& op) {
    std::ostringstream os;
    os << "probe,unit,value\n";
    for (std::size_t i = 0; i < op.columns.size(); ++i) {
        os << csv_quote(op.columns[i].label) << ',' << op.columns[i].unit << ',' << fmt(op.values[i]) << '\n';
    }
    return os.str();
}

std::string to_csv(const TimeSeries& ts, const std::vector<ExtraColumn>& extra) {
    std::ostringstream os;
    os << "time [yr]";
    for (const auto& c : ts.columns) os << ',' << csv_quote(header(c));
    for (const auto& e : extra) os << ',' << csv_quote(header(e.column));
    os << '\n';
    for (std::size_t k = 0; k < ts.times.size(); ++k) {
        os << fmt(ts.times[k]);
        for (const auto& v : ts.values) os << ',' << fmt(v[k]);
        for (const auto& e : extra) os << ',' << fmt(e.values[k]);
        os << '\n';
    }
    return os.str();
}

std::string to_csv(const Spectrum& sp) {
    std::ostringstream os;
    os << "freq [cycles/yr]";
    for (const auto& c : sp.columns) {
        os << ',' << csv_quote(c.label + " re [" + c.unit + "]") << ',' << csv_quote(c.label + " im [" + c.unit + "]")
           << ',' << csv_quote(c.label + " mag [dB]") << ',' << csv_quote(c.label + " phase [deg]");
    }
    os << '\n';
    for (std::size_t i = 0; i < sp.freqs.size(); ++i) {
        os << fmt(sp.freqs[i]);
        for (std::size_t p = 0; p < sp.columns.size(); ++p) {
            os << ',' << fmt(sp.values[p][i].real()) << ',' << fmt(sp.values[p][i].imag()) << ','
               << fmt(sp.magnitude_db[p][i]) << ',' << fmt(sp.phase_deg[p][i]);
        }
        os << '\n';
    }
    return os.str();
}

std::string to_json(const OperatingPoint& op) {
    nlohmann::json j;
    j["analysis"] = "op";
    j["newton_iters"] = op.newton_iters;
    j["columns"] = nlohmann::json::array();
    for (std::size_t i = 0; i < op.columns.size(); ++i) {
        auto col = column_json(op.columns[i]);
        col["value"] = op.values[i];
        j["columns"].push_back(col);
    }
    return j.dump(1);
}

std::string to_json(const TimeSeries& ts, const std::vector<ExtraColumn>& extra) {
    nlohmann::json j;
    j["analysis"] = "tran";
    j["method"] = ts.method == IntegrationMethod::Trap ? "trap" : "be";
    j["time"] = {{"unit", "yr"}, {"values", ts.times}};
    j["columns"] = nlohmann::json::array();
    for (std::size_t i = 0; i < ts.columns.size(); ++i) {
        auto col = column_json(ts.columns[i]);
        col["values"] = ts.values[i];
        j["columns"].push_back(col);
    }
    for (const auto& e : extra) {
        auto col = column_json(e.column);
        col["values"] = e.values;
        j["columns"].push_back(col);
    }
    return j.dump(1);
}

std::string to_json(const Spectrum& sp) {
    nlohmann::json j;
    j["analysis"] = "ac";
    j["freq"] = {{"unit", "cycles/yr"}, {"values", sp.freqs}};
    j["columns"] = nlohmann::json::array();
    for (std::size_t p = 0; p < sp.columns.size(); ++p) {
        auto col = column_json(sp.columns[p]);
        std::vector<double> re, im;
        for (const auto& v : sp.values[p]) {
            re.push_back(v.real());
            im.push_back(v.imag());
        }
        col["re"] = re;
        col["im"] = im;
        col["magnitude_db"] = sp.magnitude_db[p];
        col["phase_deg"] = sp.phase_deg[p];
        j["columns"].push_back(col);
    }
    j["gaps"] = nlohmann::json::array();
    for (std::size_t i = 0; i < sp.gaps.size(); ++i) {
        if (!sp.gaps[i].empty()) j["gaps"].push_back({{"index", i}, {"reason", sp.gaps[i]}});
    }
    return j.dump(1);
}

}  // namespace econoport
