#pragma once

// =============================================================================
// econoport - Symbolic agent library
// =============================================================================
// Parameter models of the canonical example agents. The trader uses the
// tabulated parameterization in which b is a friction premium per unit flow
// (V = b*F) and k a storage stiffness per unit stock (V = k*q); netlists that
// reproduce it declare FRICTION b=1/b and STORAGE k=1/k.
// =============================================================================

#include "econoport/twoport.hpp"

namespace econoport {

/// Trader with demand eps in series and friction b + storage k in the shunt:
///   z = [[(s^2+eps*b*s+eps*k)/(eps*s), (b*s+k)/s], [(b*s+k)/s, (b*s+k)/s]]
[[nodiscard]] ParameterModel trader(double eps, double b, double k);

/// Consumer with mutual elasticity matrix E: y = E / s.
[[nodiscard]] ParameterModel consumer(double e11, double e12, double e21, double e22);

/// Reserve bank reacting to the spread of target and actual flows:
///   z = I(s) [[1, -1], [1, -1]]
[[nodiscard]] ParameterModel reserve_bank(const RationalFunction& policy);

/// Level-1 production law with cutoff, triode and saturation regions:
///   Q = mu*((K-Kth)*L - L^2/2) for 0 <= L < K-Kth.
[[nodiscard]] double diminishing_returns(double mu, double kth, double capital, double labor);

}  // namespace econoport
