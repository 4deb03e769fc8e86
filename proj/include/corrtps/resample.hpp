// resample.hpp - pull-back warping of volumes and masks through a field.
#pragma once

#include "corrtps/field.hpp"
#include "corrtps/segment.hpp"
#include "corrtps/volume.hpp"

namespace corrtps {

// Output lives on the field's (moving) grid: out(x) = fixed(x + field(x)),
// sampled trilinearly with air fill outside the fixed volume.
Volume warp_volume(const DisplacementField& field, const Volume& fixed);

// Same pull-back with nearest-neighbour sampling; outside samples are background.
Mask warp_mask(const DisplacementField& field, const Mask& fixed_mask);

// All-zero field on the given grid.
DisplacementField compose_identity(const GridGeometry& geometry);

// Sequential application "inner then outer" as a single field:
// total(x) = inner(x) + outer(x + inner(x)).
DisplacementField compose_pullback(const DisplacementField& outer,
                                   const DisplacementField& inner);

} // namespace corrtps
