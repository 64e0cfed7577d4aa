#include "econoport/agents.hpp"

#include <algorithm>
#include <cmath>

#include "econoport/errors.hpp"

namespace econoport {

ParameterModel trader(double eps, double b, double k) {
    if (!(eps > 0.0) || !(b > 0.0) || !(k > 0.0)) throw AlgebraError("trader parameters must be positive");
    const RationalFunction z11(Polynomial({eps * k, eps * b, 1.0}), Polynomial({0.0, eps}));
    const RationalFunction zx(Polynomial({k, b}), Polynomial({0.0, 1.0}));
    return {ParameterKind::Z, {z11, zx, zx, zx}, {"u", "d"}};
}

ParameterModel consumer(double e11, double e12, double e21, double e22) {
    const RationalFunction inv_s(Polynomial({1.0}), Polynomial({0.0, 1.0}));
    return {ParameterKind::Y, Matrix2{e11, e12, e21, e22}.scaled(inv_s), {"a", "o"}};
}

ParameterModel reserve_bank(const RationalFunction& policy) {
    return {ParameterKind::Z, Matrix2{1.0, -1.0, 1.0, -1.0}.scaled(policy), {"t", "a"}};
}

double diminishing_returns(double mu, double kth, double capital, double labor) {
    const double vov = capital - kth;
    if (vov <= 0.0) return 0.0;
    const double sign = labor < 0.0 ? -1.0 : 1.0;
    const double l = std::min(std::abs(labor), vov);
    return sign * mu * (vov * l - 0.5 * l * l);
}

}  // namespace econoport
