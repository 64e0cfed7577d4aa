#pragma once

// =============================================================================
// econoport - Polynomials and rational functions of the complex frequency s
// =============================================================================
// Every parameter entry, elasticity and transfer function in the toolkit is a
// ratio of real-coefficient polynomials in s = sigma + i*omega. Values are
// immutable; every operation returns a normalized result:
//   - the denominator is monic,
//   - common factors of numerator and denominator are cancelled (numeric GCD
//     with coefficient thresholding),
//   - the zero function is 0/1.
// Equality is cross-multiplication equality within a relative tolerance.
// =============================================================================

#include <array>
#include <complex>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

namespace econoport {

using Complex = std::complex<double>;

/// Default relative tolerance for GCD thresholding and equality.
inline constexpr double kRationalTolerance = 1e-9;

/// Complex frequency s = sigma + i*omega (sigma in 1/yr, omega in rad/yr).
struct ComplexFrequency {
    double sigma = 0.0;
    double omega = 0.0;

    [[nodiscard]] Complex value() const { return {sigma, omega}; }
    /// Purely imaginary s at a cycle frequency f (cycles/yr).
    [[nodiscard]] static ComplexFrequency at_cycles(double f);
};

// -----------------------------------------------------------------------------
// Polynomial
// -----------------------------------------------------------------------------

/// Real polynomial, coefficients in ascending degree. The zero polynomial has
/// no coefficients; otherwise the highest coefficient is nonzero.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs);
    Polynomial(std::initializer_list<double> coeffs);

    static Polynomial constant(double c);
    /// The monomial s.
    static Polynomial s();

    [[nodiscard]] const std::vector<double>& coeffs() const { return coeffs_; }
    [[nodiscard]] bool is_zero() const { return coeffs_.empty(); }
    /// Degree; -1 for the zero polynomial.
    [[nodiscard]] int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    [[nodiscard]] double leading() const;
    [[nodiscard]] double operator[](std::size_t i) const {
        return i < coeffs_.size() ? coeffs_[i] : 0.0;
    }
    /// Largest absolute coefficient (0 for the zero polynomial).
    [[nodiscard]] double max_abs() const;

    [[nodiscard]] Complex eval(Complex s) const;
    [[nodiscard]] double eval(double x) const;

    [[nodiscard]] Polynomial scaled(double c) const;
    /// Coefficients with |c| <= threshold set to zero.
    [[nodiscard]] Polynomial thresholded(double threshold) const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    Polynomial operator-() const { return scaled(-1.0); }

    /// Exact coefficient equality.
    friend bool operator==(const Polynomial&, const Polynomial&) = default;

    [[nodiscard]] std::string to_string(char var = 's') const;

private:
    void trim();
    std::vector<double> coeffs_;
};

struct PolyDivision {
    Polynomial quotient;
    Polynomial remainder;
};

/// Long division a = q*b + r with deg r < deg b. Throws AlgebraError if b == 0.
[[nodiscard]] PolyDivision divmod(const Polynomial& a, const Polynomial& b);

/// Monic greatest common divisor by repeated remainder; remainder coefficients
/// below tol (relative to the unit-norm dividend) are treated as zero.
[[nodiscard]] Polynomial poly_gcd(const Polynomial& a, const Polynomial& b,
                                  double tol = kRationalTolerance);

/// a - b with cancellation noise removed: result coefficients below 1e-12 of
/// the larger operand norm are zeroed.
[[nodiscard]] Polynomial subtract_clean(const Polynomial& a, const Polynomial& b);
[[nodiscard]] Polynomial add_clean(const Polynomial& a, const Polynomial& b);

// -----------------------------------------------------------------------------
// RationalFunction
// -----------------------------------------------------------------------------

class RationalFunction {
public:
    /// The zero function 0/1.
    RationalFunction();
    RationalFunction(double c);  // NOLINT(google-explicit-constructor)
    explicit RationalFunction(Polynomial num, Polynomial den = Polynomial::constant(1.0),
                              double tol = kRationalTolerance);

    static RationalFunction s();
    static RationalFunction one() { return RationalFunction(1.0); }

    [[nodiscard]] const Polynomial& num() const { return num_; }
    [[nodiscard]] const Polynomial& den() const { return den_; }
    [[nodiscard]] bool is_zero() const { return num_.is_zero(); }
    /// deg num <= deg den
    [[nodiscard]] bool is_proper() const { return num_.degree() <= den_.degree(); }

    /// Re-run cancellation with a caller-chosen tolerance.
    [[nodiscard]] RationalFunction normalized(double tol = kRationalTolerance) const;

    /// num(s)/den(s); throws PoleError when |den(s)| < floor*(1+|s|^deg den).
    [[nodiscard]] Complex eval(Complex s, double pole_floor = 1e-12) const;
    [[nodiscard]] Complex eval(ComplexFrequency s, double pole_floor = 1e-12) const {
        return eval(s.value(), pole_floor);
    }

    friend RationalFunction operator+(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator-(const RationalFunction& a, const RationalFunction& b);
    friend RationalFunction operator*(const RationalFunction& a, const RationalFunction& b);
    /// Throws AlgebraError when b is the zero function.
    friend RationalFunction operator/(const RationalFunction& a, const RationalFunction& b);
    RationalFunction operator-() const;

    /// Cross-multiplication equality with the default tolerance.
    friend bool operator==(const RationalFunction& a, const RationalFunction& b);

    [[nodiscard]] std::string to_string() const;

private:
    struct Raw {};
    RationalFunction(Raw, Polynomial num, Polynomial den);
    Polynomial num_;
    Polynomial den_;
};

/// a/b == c/d iff ||a*d - c*b|| <= tol * max(||a*d||, ||c*b||).
[[nodiscard]] bool approx_equal(const RationalFunction& a, const RationalFunction& b,
                                double tol = kRationalTolerance);

enum class RfOp { Add, Sub, Mul, Div, Neg };
/// Dispatching form of the arithmetic operators (Neg ignores b).
[[nodiscard]] RationalFunction rf_arith(RfOp op, const RationalFunction& a,
                                        const RationalFunction& b = RationalFunction());

/// Filtered PID policy Kp + Ki/s + Kd*s/(1 + s/wf).
[[nodiscard]] RationalFunction pid_policy(double kp, double ki, double kd, double wf = 1e3);

// -----------------------------------------------------------------------------
// Matrix2
// -----------------------------------------------------------------------------

using ComplexMatrix2 = std::array<std::array<Complex, 2>, 2>;

struct Matrix2 {
    RationalFunction a11, a12, a21, a22;

    static Matrix2 identity();
    static Matrix2 diag(const RationalFunction& d1, const RationalFunction& d2);

    [[nodiscard]] const RationalFunction& at(int r, int c) const;
    [[nodiscard]] RationalFunction det() const;
    [[nodiscard]] ComplexMatrix2 eval(Complex s) const;
    [[nodiscard]] Matrix2 scaled(const RationalFunction& c) const;

    friend Matrix2 operator+(const Matrix2& a, const Matrix2& b);
    friend Matrix2 operator-(const Matrix2& a, const Matrix2& b);
    /// Entrywise cross-multiplication equality.
    friend bool operator==(const Matrix2& a, const Matrix2& b);
};

[[nodiscard]] Matrix2 mat2_mul(const Matrix2& a, const Matrix2& b);
/// Adjugate over determinant; throws AlgebraError when det(a) == 0.
[[nodiscard]] Matrix2 mat2_inv(const Matrix2& a);
[[nodiscard]] bool approx_equal(const Matrix2& a, const Matrix2& b,
                                double tol = kRationalTolerance);

// JSON: {"num":[c0,c1,...],"den":[c0,c1,...]}
void to_json(nlohmann::json& j, const RationalFunction& f);
void from_json(const nlohmann::json& j, RationalFunction& f);
void to_json(nlohmann::json& j, const Matrix2& m);
void from_json(const nlohmann::json& j, Matrix2& m);

}  // namespace econoport
