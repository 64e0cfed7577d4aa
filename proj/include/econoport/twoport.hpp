#pragma once

// =============================================================================
// econoport - 2-port behavioral operators
// =============================================================================
// A 2-port agent is described by one of five parameter models. With port 1
// upstream (u) and port 2 downstream (d), and every flow F measured into the
// agent at the port's + terminal:
//
//   Y : (F1, F2)   = y (V1, V2)        admittance / flexibility
//   Z : (V1, V2)   = z (F1, F2)        impedance / stickiness
//   H : (V1, F2)   = h (F1, V2)        hybrid
//   G : (F1, V2)   = g (V1, F2)        inverse hybrid, g = h^-1
//   T : (V2, F2)   = t (V1, -F1)       transmission, upstream -> downstream
//
// Interconnection algebra (aggregate agent):
//   Parallel       (competition) : sum of Y
//   Series         (cooperation) : sum of Z
//   SeriesParallel (franchise)   : sum of H
//   ParallelSeries (cartel)      : sum of G
//   Cascade        (chain)       : product of T
// Representative agents average the canonical matrices: arithmetically, or
// for chains geometrically (principal matrix n-th root per frequency).
// =============================================================================

#include <array>
#include <string>
#include <vector>

#include "econoport/rational.hpp"

namespace econoport {

enum class ParameterKind { Y, Z, T, H, G };
enum class InterconnectKind { Parallel, Series, SeriesParallel, ParallelSeries, Cascade };

[[nodiscard]] const char* to_string(ParameterKind kind);
[[nodiscard]] const char* to_string(InterconnectKind kind);
[[nodiscard]] ParameterKind parse_parameter_kind(const std::string& text);
[[nodiscard]] InterconnectKind parse_interconnect_kind(const std::string& text);

/// Matrix-entry roles used in reports ("price elasticity", "flow throughput").
/// Documentation labels only.
[[nodiscard]] const char* entry_role(ParameterKind kind, int row, int col);

struct ParameterModel {
    ParameterKind kind = ParameterKind::Z;
    Matrix2 m = Matrix2::identity();
    std::array<std::string, 2> ports{"u", "d"};
};

[[nodiscard]] bool approx_equal(const ParameterModel& a, const ParameterModel& b,
                                double tol = kRationalTolerance);

// =============================================================================
// Conversion
// =============================================================================

/// Convert between kinds through the Z hub (Y->T and T->Y use the direct
/// formulas). Throws ConversionError naming the blocked step.
[[nodiscard]] ParameterModel convert(const ParameterModel& model, ParameterKind target);

/// t = (1/y12) [[-y11, -1], [-det y, -y22]]
[[nodiscard]] Matrix2 y_to_t(const Matrix2& y);
/// y = (1/t12) [[t11, -1], [-det t, t22]]
[[nodiscard]] Matrix2 t_to_y(const Matrix2& t);

/// Pointwise conversion of an evaluated matrix. A pivot whose magnitude is
/// below pivot_floor times the matrix scale raises ConversionError.
[[nodiscard]] ComplexMatrix2 convert_numeric(const ComplexMatrix2& m, ParameterKind from,
                                             ParameterKind to, double pivot_floor = 1e-13);

// =============================================================================
// Interconnection
// =============================================================================

[[nodiscard]] ParameterKind canonical_kind(InterconnectKind kind);

/// Cascade takes models ordered upstream to downstream and returns the chain
/// transmission t_n * ... * t_2 * t_1.
[[nodiscard]] ParameterModel aggregate(InterconnectKind kind, const std::vector<ParameterModel>& models);

/// Numeric representative agent at each frequency, in the canonical kind.
/// Throws AlgebraError listing the frequencies where the chain root is
/// undefined (defective eigenstructure or eigenvalue on the negative axis).
[[nodiscard]] std::vector<ComplexMatrix2> representative(InterconnectKind kind,
                                                         const std::vector<ParameterModel>& models,
                                                         const std::vector<ComplexFrequency>& at);

/// Principal n-th root of a diagonalizable 2x2 complex matrix.
[[nodiscard]] ComplexMatrix2 principal_root(const ComplexMatrix2& m, int n);

struct ReciprocityReport {
    bool is_reciprocal = false;
    std::string identity;
    /// Residual of the identity (zero when reciprocal).
    RationalFunction witness;
};

/// y12 == y21, z12 == z21, det t == 1, h12 == -h21, g12 == -g21
[[nodiscard]] ReciprocityReport reciprocity_check(const ParameterModel& model);

// Numeric 2x2 helpers shared with extraction.
[[nodiscard]] ComplexMatrix2 cmat_mul(const ComplexMatrix2& a, const ComplexMatrix2& b);
[[nodiscard]] ComplexMatrix2 cmat_add(const ComplexMatrix2& a, const ComplexMatrix2& b);
[[nodiscard]] ComplexMatrix2 cmat_scale(const ComplexMatrix2& a, Complex c);
[[nodiscard]] Complex cmat_det(const ComplexMatrix2& a);
[[nodiscard]] double cmat_norm(const ComplexMatrix2& a);
[[nodiscard]] ComplexMatrix2 cmat_identity();

// JSON: {"kind":"Y","m":[[rf,rf],[rf,rf]],"ports":["u","d"]}
void to_json(nlohmann::json& j, const ParameterModel& model);
void from_json(const nlohmann::json& j, ParameterModel& model);

}  // namespace econoport
