#include <doctest.h>

#include <cmath>
#include <random>

#include "econoport/errors.hpp"
#include "econoport/rational.hpp"

using namespace econoport;

namespace {

RationalFunction rf(std::vector<double> n, std::vector<double> d = {1.0}) {
    return RationalFunction(Polynomial(std::move(n)), Polynomial(std::move(d)));
}

Polynomial random_poly(std::mt19937_64& gen, int max_degree) {
    std::uniform_int_distribution<int> deg(0, max_degree);
    std::uniform_real_distribution<double> coef(-10.0, 10.0);
    std::vector<double> c(static_cast<std::size_t>(deg(gen) + 1));
    for (double& x : c) x = coef(gen);
    if (std::abs(c.back()) < 0.5) c.back() = 1.0;
    return Polynomial(c);
}

RationalFunction random_rf(std::mt19937_64& gen, int max_degree) {
    return RationalFunction(random_poly(gen, max_degree), random_poly(gen, max_degree));
}

// Hand-coded trader impedance, kept independent of the twoport factories.
Matrix2 trader_z(double eps, double b, double k) {
    const RationalFunction z11 = rf({eps * k, eps * b, 1.0}, {0.0, eps});
    const RationalFunction zx = rf({k, b}, {0.0, 1.0});
    return {z11, zx, zx, zx};
}

}  // namespace

TEST_CASE("polynomial canonical form") {
    CHECK(Polynomial().is_zero());
    CHECK(Polynomial({0.0}).is_zero());
    CHECK(Polynomial({0.0}).degree() == -1);
    const Polynomial p({1.0, 2.0, 0.0, 0.0});
    CHECK(p.degree() == 1);
    CHECK(p.leading() == 2.0);
    CHECK((p - p).is_zero());
}

TEST_CASE("polynomial division") {
    // (s^2 + 3s + 2) = (s + 1)(s + 2)
    const auto [q, r] = divmod(Polynomial({2.0, 3.0, 1.0}), Polynomial({1.0, 1.0}));
    CHECK(q == Polynomial({2.0, 1.0}));
    CHECK(r.is_zero());
    CHECK_THROWS_AS((void)divmod(Polynomial({1.0}), Polynomial()), AlgebraError);
}

TEST_CASE("gcd recovers a shared factor") {
    const Polynomial a = Polynomial({1.0, 1.0}) * Polynomial({3.0, 0.0, 1.0});
    const Polynomial b = Polynomial({1.0, 1.0}) * Polynomial({-2.0, 5.0});
    const Polynomial g = poly_gcd(a, b);
    REQUIRE(g.degree() == 1);
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(1.0));
}

TEST_CASE("arithmetic examples") {
    const RationalFunction inv_s = rf({1.0}, {0.0, 1.0});
    SUBCASE("additive identity") {
        CHECK(inv_s + RationalFunction() == inv_s);
        CHECK(rf_arith(RfOp::Add, inv_s, 0.0) == inv_s);
    }
    SUBCASE("1/s + 1") {
        const RationalFunction sum = rf_arith(RfOp::Add, inv_s, 1.0);
        CHECK(sum.num() == Polynomial({1.0, 1.0}));
        CHECK(sum.den() == Polynomial({0.0, 1.0}));
    }
    SUBCASE("cancellation to s/eps") {
        const double eps = 2.0, b = 3.0, k = 5.0;
        const RationalFunction f = rf({0.0, k, b}, {eps * k, eps * b});
        REQUIRE(f.num().degree() == 1);
        REQUIRE(f.den().degree() == 0);
        CHECK(f.den()[0] == 1.0);
        CHECK(f.num()[0] == doctest::Approx(0.0));
        CHECK(f.num()[1] == doctest::Approx(0.5));
    }
    SUBCASE("division by zero function") {
        CHECK_THROWS_AS((void)rf_arith(RfOp::Div, inv_s, RationalFunction()), AlgebraError);
    }
    SUBCASE("negation and subtraction") {
        CHECK(rf_arith(RfOp::Neg, inv_s) + inv_s == RationalFunction());
        CHECK((rf_arith(RfOp::Sub, inv_s, inv_s)).is_zero());
    }
}

TEST_CASE("evaluation examples") {
    CHECK(RationalFunction(1.0).eval(Complex{0.3, -7.0}) == Complex{1.0, 0.0});
    const Complex v = rf({1.0, 1.0}, {0.0, 1.0}).eval(Complex{0.0, 1.0});
    CHECK(v.real() == doctest::Approx(1.0));
    CHECK(v.imag() == doctest::Approx(-1.0));
    const Complex w = rf({0.0, 0.5}).eval(ComplexFrequency{0.0, 2.0});
    CHECK(std::abs(w - Complex{0.0, 1.0}) < 1e-15);
}

TEST_CASE("evaluation at a pole carries the offending s") {
    const RationalFunction f = rf({1.0}, {-1.0, 1.0});
    try {
        (void)f.eval(Complex{1.0, 0.0});
        FAIL("expected a pole error");
    } catch (const PoleError& e) {
        CHECK(e.s() == Complex{1.0, 0.0});
    }
}

TEST_CASE("matrix examples") {
    const RationalFunction s = RationalFunction::s();
    const RationalFunction inv_s = rf({1.0}, {0.0, 1.0});
    CHECK(mat2_mul(Matrix2::diag(s, inv_s), Matrix2::diag(inv_s, s)) == Matrix2::identity());
    CHECK(mat2_inv(Matrix2::identity()) == Matrix2::identity());

    const Matrix2 z = trader_z(2.0, 3.0, 5.0);
    CHECK(mat2_mul(Matrix2::identity(), z) == z);
    CHECK(z.det() == rf({5.0, 3.0}, {2.0}));

    const Matrix2 y = mat2_inv(z);
    CHECK(y.a11 == rf({2.0}, {0.0, 1.0}));
    CHECK(y.a12 == rf({-2.0}, {0.0, 1.0}));
    CHECK(y.a21 == y.a12);
    CHECK(y.a22 == rf({10.0, 6.0, 1.0}, {0.0, 5.0, 3.0}));

    Matrix2 singular{1.0, s, inv_s, 1.0};
    CHECK_THROWS_AS((void)mat2_inv(singular), AlgebraError);
}

TEST_CASE("json round trip") {
    const RationalFunction f = rf({1.0, 2.0}, {3.0, 4.0, 5.0});
    const nlohmann::json j = f;
    REQUIRE(j.at("den").size() == 3);
    CHECK(j.at("den")[2].get<double>() == 1.0);
    CHECK(j.at("num")[1].get<double>() == doctest::Approx(0.4));
    CHECK(j.get<RationalFunction>() == f);
    const Matrix2 z = trader_z(1.0, 2.0, 3.0);
    const nlohmann::json jm = z;
    CHECK(jm.get<Matrix2>() == z);
}

// =============================================================================
// Properties
// =============================================================================

TEST_CASE("ring laws on random rational functions") {
    std::mt19937_64 gen(20240611);
    for (int trial = 0; trial < 200; ++trial) {
        const RationalFunction a = random_rf(gen, 6);
        const RationalFunction b = random_rf(gen, 6);
        const RationalFunction c = random_rf(gen, 6);
        CHECK((a + b) + c == a + (b + c));
        CHECK(a * (b + c) == a * b + a * c);
    }
}

TEST_CASE("evaluation is additive") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    int checked = 0;
    for (int trial = 0; checked < 50 && trial < 500; ++trial) {
        const RationalFunction a = random_rf(gen, 4);
        const RationalFunction b = random_rf(gen, 4);
        const Complex s{u(gen), u(gen)};
        Complex ea, eb, es;
        try {
            ea = a.eval(s, 1e-6);
            eb = b.eval(s, 1e-6);
            es = (a + b).eval(s, 1e-6);
        } catch (const PoleError&) {
            continue;
        }
        CHECK(std::abs(es - (ea + eb)) <= 1e-10 * std::max(1.0, std::abs(ea) + std::abs(eb)));
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("matrix times inverse is identity") {
    std::mt19937_64 gen(99);
    int checked = 0;
    while (checked < 100) {
        const Matrix2 a{random_rf(gen, 3), random_rf(gen, 3), random_rf(gen, 3), random_rf(gen, 3)};
        if (a.det().is_zero()) continue;
        CHECK(mat2_mul(a, mat2_inv(a)) == Matrix2::identity());
        ++checked;
    }
}

TEST_CASE("normalization is idempotent") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Polynomial common = random_poly(gen, 2);
        const RationalFunction f(random_poly(gen, 4) * common, random_poly(gen, 4) * common);
        const RationalFunction g = f.normalized();
        CHECK(g.num() == f.num());
        CHECK(g.den() == f.den());
        CHECK(g.den().leading() == 1.0);
    }
}
