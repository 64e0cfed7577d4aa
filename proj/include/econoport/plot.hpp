#pragma once

// =============================================================================
// econoport - SVG Bode plots
// =============================================================================
// Output uses a small SVG subset: one <svg> root holding <g>, <rect>, <line>,
// <polyline> and <text>. Two panels, magnitude (dB) over phase (deg), share a
// log-frequency axis with decade grid lines.
// =============================================================================

#include <string>

#include "econoport/engine.hpp"

namespace econoport {

/// Plot every probe column of the spectrum; gaps break the polylines.
[[nodiscard]] std::string bode_svg(const Spectrum& sp, const std::string& title = "");

/// Element names allowed in bode_svg output.
[[nodiscard]] bool svg_subset_element(const std::string& name);

}  // namespace econoport
