#pragma once

#include "flexhdr/scene.hpp"

namespace flexhdr {

// Classical no-alignment merge: per pixel, the confidence-weighted average of
// the linearized frames using the fixed exposure knees. Where every frame is
// untrusted the reference's linearized value is kept. Serves as the reference
// point the trained model has to beat.
HdrImage naive_exposure_weighted_merge(const FrameSet& fs);

}  // namespace flexhdr
