#include "econoport/twoport.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "econoport/errors.hpp"

namespace econoport {

namespace {

// -----------------------------------------------------------------------------
// Field adaptors: the conversion formulas are written once over any 2x2
// container with entries supporting + - * / and a zero test.
// -----------------------------------------------------------------------------

struct SymbolicField {
    using M = Matrix2;
    using S = RationalFunction;
    static S get(const M& m, int r, int c) { return m.at(r, c); }
    static M make(S a11, S a12, S a21, S a22) { return {a11, a12, a21, a22}; }
    bool vanishes(const S& pivot, const M&) const { return pivot.is_zero(); }
    bool det_vanishes(const S& det, const M&) const { return det.is_zero(); }
};

struct NumericField {
    using M = ComplexMatrix2;
    using S = Complex;
    double floor = 1e-13;
    static S get(const M& m, int r, int c) { return m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]; }
    static M make(S a11, S a12, S a21, S a22) { return {{{a11, a12}, {a21, a22}}}; }
    bool vanishes(const S& pivot, const M& m) const {
        const double scale = cmat_norm(m);
        return !(std::abs(pivot) > floor * scale) || !std::isfinite(std::abs(pivot));
    }
    bool det_vanishes(const S& det, const M& m) const {
        const double scale = cmat_norm(m);
        return !(std::abs(det) > floor * scale * scale) || !std::isfinite(std::abs(det));
    }
};

[[noreturn]] void blocked(ParameterKind from, ParameterKind to, const char* pivot) {
    std::ostringstream os;
    os << "conversion " << to_string(from) << " -> " << to_string(to) << " blocked: pivot " << pivot
       << " vanishes";
    throw ConversionError(os.str());
}

template <class F>
typename F::M to_z(const F& f, const typename F::M& m, ParameterKind from) {
    using S = typename F::S;
    const S a11 = F::get(m, 0, 0), a12 = F::get(m, 0, 1), a21 = F::get(m, 1, 0), a22 = F::get(m, 1, 1);
    const S det = a11 * a22 - a12 * a21;
    const S one = S(1.0);
    switch (from) {
        case ParameterKind::Z: return m;
        case ParameterKind::Y:
            if (f.det_vanishes(det, m)) blocked(from, ParameterKind::Z, "det y");
            return F::make(a22 / det, -a12 / det, -a21 / det, a11 / det);
        case ParameterKind::T:
            if (f.vanishes(a21, m)) blocked(from, ParameterKind::Z, "t21");
            return F::make(a22 / a21, one / a21, det / a21, a11 / a21);
        case ParameterKind::H:
            if (f.vanishes(a22, m)) blocked(from, ParameterKind::Z, "h22");
            return F::make(det / a22, a12 / a22, -a21 / a22, one / a22);
        case ParameterKind::G:
            if (f.vanishes(a11, m)) blocked(from, ParameterKind::Z, "g11");
            return F::make(one / a11, -a12 / a11, a21 / a11, det / a11);
    }
    throw ConversionError("unknown parameter kind");
}

template <class F>
typename F::M from_z(const F& f, const typename F::M& z, ParameterKind to) {
    using S = typename F::S;
    const S z11 = F::get(z, 0, 0), z12 = F::get(z, 0, 1), z21 = F::get(z, 1, 0), z22 = F::get(z, 1, 1);
    const S det = z11 * z22 - z12 * z21;
    const S one = S(1.0);
    switch (to) {
        case ParameterKind::Z: return z;
        case ParameterKind::Y:
            if (f.det_vanishes(det, z)) blocked(ParameterKind::Z, to, "det z");
            return F::make(z22 / det, -z12 / det, -z21 / det, z11 / det);
        case ParameterKind::T:
            if (f.vanishes(z12, z)) blocked(ParameterKind::Z, to, "z12");
            return F::make(z22 / z12, det / z12, one / z12, z11 / z12);
        case ParameterKind::H:
            if (f.vanishes(z22, z)) blocked(ParameterKind::Z, to, "z22");
            return F::make(det / z22, z12 / z22, -z21 / z22, one / z22);
        case ParameterKind::G:
            if (f.vanishes(z11, z)) blocked(ParameterKind::Z, to, "z11");
            return F::make(one / z11, -z12 / z11, z21 / z11, det / z11);
    }
    throw ConversionError("unknown parameter kind");
}

template <class F>
typename F::M y_to_t_generic(const F& f, const typename F::M& y) {
    using S = typename F::S;
    const S y11 = F::get(y, 0, 0), y12 = F::get(y, 0, 1), y21 = F::get(y, 1, 0), y22 = F::get(y, 1, 1);
    if (f.vanishes(y12, y)) blocked(ParameterKind::Y, ParameterKind::T, "y12");
    const S det = y11 * y22 - y12 * y21;
    const S one = S(1.0);
    return F::make(-y11 / y12, -one / y12, -det / y12, -y22 / y12);
}

template <class F>
typename F::M t_to_y_generic(const F& f, const typename F::M& t) {
    using S = typename F::S;
    const S t11 = F::get(t, 0, 0), t12 = F::get(t, 0, 1), t21 = F::get(t, 1, 0), t22 = F::get(t, 1, 1);
    if (f.vanishes(t12, t)) blocked(ParameterKind::T, ParameterKind::Y, "t12");
    const S det = t11 * t22 - t12 * t21;
    const S one = S(1.0);
    return F::make(t11 / t12, -one / t12, -det / t12, t22 / t12);
}

template <class F>
typename F::M convert_generic(const F& f, const typename F::M& m, ParameterKind from, ParameterKind to) {
    if (from == to) return m;
    if (from == ParameterKind::Y && to == ParameterKind::T) return y_to_t_generic(f, m);
    if (from == ParameterKind::T && to == ParameterKind::Y) return t_to_y_generic(f, m);
    return from_z(f, to_z(f, m, from), to);
}

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

// =============================================================================
// Names
// =============================================================================

const char* to_string(ParameterKind kind) {
    switch (kind) {
        case ParameterKind::Y: return "Y";
        case ParameterKind::Z: return "Z";
        case ParameterKind::T: return "T";
        case ParameterKind::H: return "H";
        case ParameterKind::G: return "G";
    }
    return "?";
}

const char* to_string(InterconnectKind kind) {
    switch (kind) {
        case InterconnectKind::Parallel: return "parallel";
        case InterconnectKind::Series: return "series";
        case InterconnectKind::SeriesParallel: return "series-parallel";
        case InterconnectKind::ParallelSeries: return "parallel-series";
        case InterconnectKind::Cascade: return "cascade";
    }
    return "?";
}

ParameterKind parse_parameter_kind(const std::string& text) {
    const std::string u = upper(text);
    if (u == "Y") return ParameterKind::Y;
    if (u == "Z") return ParameterKind::Z;
    if (u == "T") return ParameterKind::T;
    if (u == "H") return ParameterKind::H;
    if (u == "G") return ParameterKind::G;
    throw AlgebraError("unknown parameter kind '" + text + "'");
}

InterconnectKind parse_interconnect_kind(const std::string& text) {
    const std::string u = upper(text);
    if (u == "PARALLEL" || u == "COMPETITION") return InterconnectKind::Parallel;
    if (u == "SERIES" || u == "COOPERATION") return InterconnectKind::Series;
    if (u == "SERIES-PARALLEL" || u == "FRANCHISE") return InterconnectKind::SeriesParallel;
    if (u == "PARALLEL-SERIES" || u == "CARTEL") return InterconnectKind::ParallelSeries;
    if (u == "CASCADE" || u == "CHAIN") return InterconnectKind::Cascade;
    throw AlgebraError("unknown interconnection '" + text + "'");
}

const char* entry_role(ParameterKind kind, int row, int col) {
    const bool diag = row == col;
    switch (kind) {
        case ParameterKind::Y: return diag ? "price elasticity" : "cross-elasticity";
        case ParameterKind::Z: return diag ? "price inelasticity" : "cross-inelasticity";
        case ParameterKind::T:
            if (row == 0 && col == 0) return "price transmission";
            if (row == 1 && col == 1) return "flow throughput";
            return row == 0 ? "transfer inelasticity" : "transfer elasticity";
        case ParameterKind::H:
        case ParameterKind::G:
            if (diag) return row == 0 ? "input inelasticity" : "output elasticity";
            return row == 0 ? "reverse transmission" : "forward transmission";
    }
    return "";
}

bool approx_equal(const ParameterModel& a, const ParameterModel& b, double tol) {
    return a.kind == b.kind && approx_equal(a.m, b.m, tol);
}

// =============================================================================
// Conversion
// =============================================================================

ParameterModel convert(const ParameterModel& model, ParameterKind target) {
    return {target, convert_generic(SymbolicField{}, model.m, model.kind, target), model.ports};
}

Matrix2 y_to_t(const Matrix2& y) { return y_to_t_generic(SymbolicField{}, y); }

Matrix2 t_to_y(const Matrix2& t) { return t_to_y_generic(SymbolicField{}, t); }

ComplexMatrix2 convert_numeric(const ComplexMatrix2& m, ParameterKind from, ParameterKind to,
                               double pivot_floor) {
    NumericField f;
    f.floor = pivot_floor;
    return convert_generic(f, m, from, to);
}

// =============================================================================
// Interconnection
// =============================================================================

ParameterKind canonical_kind(InterconnectKind kind) {
    switch (kind) {
        case InterconnectKind::Parallel: return ParameterKind::Y;
        case InterconnectKind::Series: return ParameterKind::Z;
        case InterconnectKind::SeriesParallel: return ParameterKind::H;
        case InterconnectKind::ParallelSeries: return ParameterKind::G;
        case InterconnectKind::Cascade: return ParameterKind::T;
    }
    return ParameterKind::Z;
}

ParameterModel aggregate(InterconnectKind kind, const std::vector<ParameterModel>& models) {
    if (models.empty()) throw AlgebraError(std::string("aggregate(") + to_string(kind) + "): empty model list");
    const ParameterKind canon = canonical_kind(kind);
    ParameterModel out = convert(models.front(), canon);
    for (std::size_t i = 1; i < models.size(); ++i) {
        const Matrix2 next = convert(models[i], canon).m;
        out.m = kind == InterconnectKind::Cascade ? mat2_mul(next, out.m) : out.m + next;
    }
    out.ports = {models.front().ports[0], models.back().ports[1]};
    return out;
}

ComplexMatrix2 principal_root(const ComplexMatrix2& m, int n) {
    if (n < 1) throw AlgebraError("matrix root order must be positive");
    if (n == 1) return m;
    Eigen::Matrix2cd a;
    a << m[0][0], m[0][1], m[1][0], m[1][1];
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(a);
    if (es.info() != Eigen::Success) throw AlgebraError("eigendecomposition failed");
    const Eigen::Matrix2cd v = es.eigenvectors();
    const Eigen::Vector2cd lambda = es.eigenvalues();
    const Eigen::JacobiSVD<Eigen::Matrix2cd> svd(v);
    const double cond = svd.singularValues()(0) / svd.singularValues()(1);
    if (!std::isfinite(cond) || cond > 1e10) throw AlgebraError("defective eigenstructure");
    Eigen::Vector2cd root;
    for (int i = 0; i < 2; ++i) {
        const Complex l = lambda(i);
        if (l.real() < 0.0 && std::abs(l.imag()) <= 1e-12 * std::abs(l)) {
            throw AlgebraError("eigenvalue on the negative real axis");
        }
        root(i) = std::pow(l, 1.0 / n);
    }
    const Eigen::Matrix2cd r = v * root.asDiagonal() * v.inverse();
    return {{{r(0, 0), r(0, 1)}, {r(1, 0), r(1, 1)}}};
}

std::vector<ComplexMatrix2> representative(InterconnectKind kind, const std::vector<ParameterModel>& models,
                                           const std::vector<ComplexFrequency>& at) {
    if (models.empty()) throw AlgebraError("representative: empty model list");
    const ParameterKind canon = canonical_kind(kind);
    std::vector<ComplexMatrix2> out;
    out.reserve(at.size());
    if (kind != InterconnectKind::Cascade) {
        const ParameterModel agg = aggregate(kind, models);
        const Matrix2 mean = agg.m.scaled(RationalFunction(1.0 / static_cast<double>(models.size())));
        for (const auto& s : at) out.push_back(mean.eval(s.value()));
        return out;
    }
    std::vector<Matrix2> ts;
    for (const auto& m : models) ts.push_back(convert(m, canon).m);
    std::vector<std::string> bad;
    for (const auto& s : at) {
        ComplexMatrix2 prod = cmat_identity();
        for (const auto& t : ts) prod = cmat_mul(t.eval(s.value()), prod);
        try {
            out.push_back(principal_root(prod, static_cast<int>(models.size())));
        } catch (const AlgebraError& e) {
            std::ostringstream os;
            os << "s=" << s.sigma << (s.omega < 0 ? "" : "+") << s.omega << "i (" << e.what() << ")";
            bad.push_back(os.str());
        }
    }
    if (!bad.empty()) {
        std::string msg = "representative chain root undefined at";
        for (const auto& b : bad) msg += " " + b;
        throw AlgebraError(msg);
    }
    return out;
}

ReciprocityReport reciprocity_check(const ParameterModel& model) {
    const Matrix2& m = model.m;
    ReciprocityReport r;
    switch (model.kind) {
        case ParameterKind::Y:
            r.identity = "y12 == y21";
            r.witness = m.a12 - m.a21;
            r.is_reciprocal = approx_equal(m.a12, m.a21);
            break;
        case ParameterKind::Z:
            r.identity = "z12 == z21";
            r.witness = m.a12 - m.a21;
            r.is_reciprocal = approx_equal(m.a12, m.a21);
            break;
        case ParameterKind::T:
            r.identity = "det t == 1";
            r.witness = m.det() - RationalFunction(1.0);
            r.is_reciprocal = approx_equal(m.det(), RationalFunction(1.0));
            break;
        case ParameterKind::H:
            r.identity = "h12 == -h21";
            r.witness = m.a12 + m.a21;
            r.is_reciprocal = approx_equal(m.a12, -m.a21);
            break;
        case ParameterKind::G:
            r.identity = "g12 == -g21";
            r.witness = m.a12 + m.a21;
            r.is_reciprocal = approx_equal(m.a12, -m.a21);
            break;
    }
    if (r.is_reciprocal) r.witness = RationalFunction();
    return r;
}

// =============================================================================
// Numeric helpers
// =============================================================================

ComplexMatrix2 cmat_mul(const ComplexMatrix2& a, const ComplexMatrix2& b) {
    ComplexMatrix2 r{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    return r;
}

ComplexMatrix2 cmat_add(const ComplexMatrix2& a, const ComplexMatrix2& b) {
    ComplexMatrix2 r{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) r[i][j] = a[i][j] + b[i][j];
    }
    return r;
}

ComplexMatrix2 cmat_scale(const ComplexMatrix2& a, Complex c) {
    ComplexMatrix2 r = a;
    for (auto& row : r) {
        for (auto& x : row) x *= c;
    }
    return r;
}

Complex cmat_det(const ComplexMatrix2& a) { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

double cmat_norm(const ComplexMatrix2& a) {
    double m = 0.0;
    for (const auto& row : a) {
        for (const auto& x : row) m = std::max(m, std::abs(x));
    }
    return m;
}

ComplexMatrix2 cmat_identity() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }

// =============================================================================
// JSON
// =============================================================================

void to_json(nlohmann::json& j, const ParameterModel& model) {
    j = nlohmann::json{{"kind", to_string(model.kind)}, {"m", model.m}, {"ports", model.ports}};
}

void from_json(const nlohmann::json& j, ParameterModel& model) {
    model.kind = parse_parameter_kind(j.at("kind").get<std::string>());
    model.m = j.at("m").get<Matrix2>();
    if (j.contains("ports")) model.ports = j.at("ports").get<std::array<std::string, 2>>();
}

}  // namespace econoport
