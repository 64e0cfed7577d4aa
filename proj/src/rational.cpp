#include "econoport/rational.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "econoport/errors.hpp"

namespace econoport {

namespace {

/// Relative singular-value gap required before a common factor is removed.
constexpr double kCertifyRatio = 1e-4;

constexpr double kCancelNoise = 1e-12;

std::vector<double> combine(const Polynomial& a, const Polynomial& b, double sign, bool clean) {
    const std::size_t n = std::max(a.coeffs().size(), b.coeffs().size());
    std::vector<double> out(n, 0.0);
    const double scale = std::max(a.max_abs(), b.max_abs());
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i];
        const double y = sign * b[i];
        const double r = x + y;
        if (clean && std::abs(r) <= kCancelNoise * scale) {
            out[i] = 0.0;
        } else {
            out[i] = r;
        }
    }
    return out;
}

Polynomial unit(const Polynomial& p) {
    const double m = p.max_abs();
    return m > 0.0 ? p.scaled(1.0 / m) : p;
}

struct Cofactors {
    Polynomial num;
    Polynomial den;
};

/// Cofactors u, v of a common divisor of degree d, taken from the null vector
/// of the convolution system a*v - b*u = 0. Returns false when the smallest
/// singular value does not certify a divisor of that degree.
bool cofactors(const Polynomial& a, const Polynomial& b, int d, double tol, Cofactors& out) {
    const int m = a.degree();
    const int n = b.degree();
    const int nv = n - d + 1;
    const int nu = m - d + 1;
    const int rows = m + n - d + 1;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(rows, nv + nu);
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i <= m; ++i) sys(i + j, j) = a[static_cast<std::size_t>(i)];
    }
    for (int j = 0; j < nu; ++j) {
        for (int i = 0; i <= n; ++i) sys(i + j, nv + j) = -b[static_cast<std::size_t>(i)];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) > tol * sv(0)) return false;
    const Eigen::VectorXd null = svd.matrixV().col(nv + nu - 1);
    out.den = Polynomial(std::vector<double>(null.data(), null.data() + nv));
    out.num = Polynomial(std::vector<double>(null.data() + nv, null.data() + nv + nu));
    return out.den.degree() == n - d && !out.den.is_zero();
}

}  // namespace

ComplexFrequency ComplexFrequency::at_cycles(double f) {
    return {0.0, 2.0 * std::numbers::pi * f};
}

// =============================================================================
// Polynomial
// =============================================================================

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    for (double c : coeffs_) {
        if (!std::isfinite(c)) throw AlgebraError("polynomial coefficient is not finite");
    }
    trim();
}

Polynomial::Polynomial(std::initializer_list<double> coeffs)
    : Polynomial(std::vector<double>(coeffs)) {}

Polynomial Polynomial::constant(double c) { return Polynomial(std::vector<double>{c}); }

Polynomial Polynomial::s() { return Polynomial({0.0, 1.0}); }

void Polynomial::trim() {
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
}

double Polynomial::leading() const { return coeffs_.empty() ? 0.0 : coeffs_.back(); }

double Polynomial::max_abs() const {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
}

Complex Polynomial::eval(Complex s) const {
    Complex acc{0.0, 0.0};
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * s + *it;
    return acc;
}

double Polynomial::eval(double x) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
}

Polynomial Polynomial::scaled(double c) const {
    std::vector<double> out(coeffs_);
    for (double& x : out) x *= c;
    return Polynomial(std::move(out));
}

Polynomial Polynomial::thresholded(double threshold) const {
    std::vector<double> out(coeffs_);
    for (double& x : out) {
        if (std::abs(x) <= threshold) x = 0.0;
    }
    return Polynomial(std::move(out));
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    return Polynomial(combine(a, b, 1.0, false));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    return Polynomial(combine(a, b, -1.0, false));
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<double> out(a.coeffs().size() + b.coeffs().size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
        for (std::size_t j = 0; j < b.coeffs().size(); ++j) out[i + j] += a.coeffs()[i] * b.coeffs()[j];
    }
    return Polynomial(std::move(out));
}

Polynomial add_clean(const Polynomial& a, const Polynomial& b) {
    return Polynomial(combine(a, b, 1.0, true));
}

Polynomial subtract_clean(const Polynomial& a, const Polynomial& b) {
    return Polynomial(combine(a, b, -1.0, true));
}

std::string Polynomial::to_string(char var) const {
    if (coeffs_.empty()) return "0";
    std::ostringstream os;
    os.precision(12);
    bool first = true;
    for (int i = degree(); i >= 0; --i) {
        const double c = coeffs_[static_cast<std::size_t>(i)];
        if (c == 0.0) continue;
        double mag = std::abs(c);
        if (first) {
            if (c < 0) os << "-";
        } else {
            os << (c < 0 ? " - " : " + ");
        }
        first = false;
        if (i == 0 || mag != 1.0) {
            os << mag;
            if (i > 0) os << "*";
        }
        if (i >= 1) os << var;
        if (i >= 2) os << "^" << i;
    }
    return os.str();
}

PolyDivision divmod(const Polynomial& a, const Polynomial& b) {
    if (b.is_zero()) throw AlgebraError("polynomial division by the zero polynomial");
    if (a.degree() < b.degree()) return {Polynomial{}, a};
    std::vector<double> rem(a.coeffs());
    const int db = b.degree();
    const double lead = b.leading();
    std::vector<double> quo(static_cast<std::size_t>(a.degree() - db + 1), 0.0);
    for (int k = a.degree() - db; k >= 0; --k) {
        const double q = rem[static_cast<std::size_t>(k + db)] / lead;
        quo[static_cast<std::size_t>(k)] = q;
        for (int j = 0; j <= db; ++j) rem[static_cast<std::size_t>(k + j)] -= q * b[static_cast<std::size_t>(j)];
        rem[static_cast<std::size_t>(k + db)] = 0.0;
    }
    rem.resize(static_cast<std::size_t>(db));
    return {Polynomial(std::move(quo)), Polynomial(std::move(rem))};
}

Polynomial poly_gcd(const Polynomial& a, const Polynomial& b, double tol) {
    if (a.is_zero() && b.is_zero()) return Polynomial::constant(1.0);
    Polynomial x = unit(a);
    Polynomial y = unit(b);
    if (x.degree() < y.degree()) std::swap(x, y);
    while (!y.is_zero()) {
        Polynomial r = divmod(x, y).remainder.thresholded(tol);
        x = y;
        y = unit(r);
    }
    std::vector<double> g = x.coeffs();
    const double lead = g.back();
    for (double& c : g) c /= lead;
    g.back() = 1.0;
    return Polynomial(std::move(g));
}

// =============================================================================
// RationalFunction
// =============================================================================

RationalFunction::RationalFunction() : num_(), den_(Polynomial::constant(1.0)) {}

RationalFunction::RationalFunction(double c)
    : num_(Polynomial::constant(c)), den_(Polynomial::constant(1.0)) {}

RationalFunction::RationalFunction(Raw, Polynomial num, Polynomial den)
    : num_(std::move(num)), den_(std::move(den)) {}

RationalFunction::RationalFunction(Polynomial num, Polynomial den, double tol) {
    if (den.is_zero()) throw AlgebraError("rational function with zero denominator");
    if (num.is_zero()) {
        num_ = Polynomial{};
        den_ = Polynomial::constant(1.0);
        return;
    }
    if (den.degree() > 0 && num.degree() > 0) {
        // Largest certified common-factor degree: the convolution system has a
        // null vector exactly when the common factor has at least that degree,
        // so the test is monotone in d. The remainder sequence seeds the search.
        const Polynomial a = unit(num);
        const Polynomial b = unit(den);
        const double certify = kCertifyRatio * tol;
        int lo = 0;
        int hi = std::min(a.degree(), b.degree());
        Cofactors best;
        const int seed = std::min(poly_gcd(a, b, tol).degree(), hi);
        if (seed > 0) {
            Cofactors c;
            if (cofactors(a, b, seed, certify, c)) {
                lo = seed;
                best = c;
            } else {
                hi = seed - 1;
            }
        }
        while (lo < hi) {
            const int mid = (lo + hi + 1) / 2;
            Cofactors c;
            if (cofactors(a, b, mid, certify, c)) {
                lo = mid;
                best = c;
            } else {
                hi = mid - 1;
            }
        }
        if (lo > 0) {
            num = best.num.scaled(num.max_abs());
            den = best.den.scaled(den.max_abs());
        }
    }
    const double lead = den.leading();
    std::vector<double> n = num.coeffs();
    std::vector<double> d = den.coeffs();
    for (double& c : n) c /= lead;
    for (double& c : d) c /= lead;
    d.back() = 1.0;
    num_ = Polynomial(std::move(n));
    den_ = Polynomial(std::move(d));
}

RationalFunction RationalFunction::s() { return RationalFunction(Raw{}, Polynomial::s(), Polynomial::constant(1.0)); }

RationalFunction RationalFunction::normalized(double tol) const { return RationalFunction(num_, den_, tol); }

Complex RationalFunction::eval(Complex s, double pole_floor) const {
    const Complex d = den_.eval(s);
    const double floor = pole_floor * (1.0 + std::pow(std::abs(s), den_.degree()));
    if (std::abs(d) < floor) {
        std::ostringstream os;
        os << "evaluation at pole s = " << s.real() << (s.imag() < 0 ? "" : "+") << s.imag() << "i of "
           << to_string();
        throw PoleError(os.str(), s);
    }
    return num_.eval(s) / d;
}

RationalFunction operator+(const RationalFunction& a, const RationalFunction& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.den_ == b.den_) return RationalFunction(add_clean(a.num_, b.num_), a.den_);
    return RationalFunction(add_clean(a.num_ * b.den_, b.num_ * a.den_), a.den_ * b.den_);
}

RationalFunction operator-(const RationalFunction& a, const RationalFunction& b) {
    if (b.is_zero()) return a;
    if (a.den_ == b.den_) return RationalFunction(subtract_clean(a.num_, b.num_), a.den_);
    return RationalFunction(subtract_clean(a.num_ * b.den_, b.num_ * a.den_), a.den_ * b.den_);
}

RationalFunction operator*(const RationalFunction& a, const RationalFunction& b) {
    if (a.is_zero() || b.is_zero()) return {};
    return RationalFunction(a.num_ * b.num_, a.den_ * b.den_);
}

RationalFunction operator/(const RationalFunction& a, const RationalFunction& b) {
    if (b.is_zero()) throw AlgebraError("division by the zero rational function");
    if (a.is_zero()) return {};
    return RationalFunction(a.num_ * b.den_, a.den_ * b.num_);
}

RationalFunction RationalFunction::operator-() const {
    return RationalFunction(Raw{}, num_.scaled(-1.0), den_);
}

bool approx_equal(const RationalFunction& a, const RationalFunction& b, double tol) {
    const Polynomial ad = a.num() * b.den();
    const Polynomial cb = b.num() * a.den();
    const double scale = std::max(ad.max_abs(), cb.max_abs());
    if (scale == 0.0) return true;
    return (ad - cb).max_abs() <= tol * scale;
}

bool operator==(const RationalFunction& a, const RationalFunction& b) { return approx_equal(a, b); }

std::string RationalFunction::to_string() const {
    if (den_.degree() == 0 && den_.leading() == 1.0) return num_.to_string();
    return "(" + num_.to_string() + ")/(" + den_.to_string() + ")";
}

RationalFunction rf_arith(RfOp op, const RationalFunction& a, const RationalFunction& b) {
    switch (op) {
        case RfOp::Add: return a + b;
        case RfOp::Sub: return a - b;
        case RfOp::Mul: return a * b;
        case RfOp::Div: return a / b;
        case RfOp::Neg: return -a;
    }
    throw AlgebraError("unknown rational operation");
}

RationalFunction pid_policy(double kp, double ki, double kd, double wf) {
    RationalFunction out(kp);
    if (ki != 0.0) out = out + RationalFunction(Polynomial::constant(ki), Polynomial::s());
    if (kd != 0.0) {
        if (!(wf > 0.0)) throw AlgebraError("derivative filter corner must be positive");
        out = out + RationalFunction(Polynomial({0.0, kd}), Polynomial({1.0, 1.0 / wf}));
    }
    return out;
}

// =============================================================================
// Matrix2
// =============================================================================

Matrix2 Matrix2::identity() { return {1.0, 0.0, 0.0, 1.0}; }

Matrix2 Matrix2::diag(const RationalFunction& d1, const RationalFunction& d2) { return {d1, 0.0, 0.0, d2}; }

const RationalFunction& Matrix2::at(int r, int c) const {
    if (r == 0) return c == 0 ? a11 : a12;
    return c == 0 ? a21 : a22;
}

RationalFunction Matrix2::det() const { return a11 * a22 - a12 * a21; }

ComplexMatrix2 Matrix2::eval(Complex s) const {
    return {{{a11.eval(s), a12.eval(s)}, {a21.eval(s), a22.eval(s)}}};
}

Matrix2 Matrix2::scaled(const RationalFunction& c) const { return {a11 * c, a12 * c, a21 * c, a22 * c}; }

Matrix2 operator+(const Matrix2& a, const Matrix2& b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

Matrix2 operator-(const Matrix2& a, const Matrix2& b) {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

bool approx_equal(const Matrix2& a, const Matrix2& b, double tol) {
    return approx_equal(a.a11, b.a11, tol) && approx_equal(a.a12, b.a12, tol) &&
           approx_equal(a.a21, b.a21, tol) && approx_equal(a.a22, b.a22, tol);
}

bool operator==(const Matrix2& a, const Matrix2& b) { return approx_equal(a, b); }

Matrix2 mat2_mul(const Matrix2& a, const Matrix2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

Matrix2 mat2_inv(const Matrix2& a) {
    const RationalFunction d = a.det();
    if (d.is_zero()) throw AlgebraError("matrix inverse: determinant vanishes identically");
    return {a.a22 / d, -a.a12 / d, -a.a21 / d, a.a11 / d};
}

// =============================================================================
// JSON
// =============================================================================

void to_json(nlohmann::json& j, const RationalFunction& f) {
    j = nlohmann::json{{"num", f.num().coeffs()}, {"den", f.den().coeffs()}};
}

void from_json(const nlohmann::json& j, RationalFunction& f) {
    if (!j.is_object() || !j.contains("num") || !j.contains("den")) {
        throw AlgebraError("rational function JSON needs \"num\" and \"den\" arrays");
    }
    f = RationalFunction(Polynomial(j.at("num").get<std::vector<double>>()),
                         Polynomial(j.at("den").get<std::vector<double>>()));
}

void to_json(nlohmann::json& j, const Matrix2& m) {
    j = nlohmann::json::array({nlohmann::json::array({m.a11, m.a12}), nlohmann::json::array({m.a21, m.a22})});
}

void from_json(const nlohmann::json& j, Matrix2& m) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 || !j[1].is_array() ||
        j[1].size() != 2) {
        throw AlgebraError("2x2 matrix JSON must be [[a11,a12],[a21,a22]]");
    }
    m = {j[0][0].get<RationalFunction>(), j[0][1].get<RationalFunction>(), j[1][0].get<RationalFunction>(),
         j[1][1].get<RationalFunction>()};
}

}  // namespace econoport
