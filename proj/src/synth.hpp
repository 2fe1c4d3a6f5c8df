#pragma once

#include "field_param.hpp"
#include "grid.hpp"

#include <cstdint>

namespace pdeflow {

// Sum of `modes` random cosine modes over the physical box. Integer wavenumber
// triples are drawn from [-freq_max, freq_max]^3 with the zero mode excluded,
// so the result is smooth at grid scale and periodic over the box.
ScalarField band_limited_field(const Grid3& g, uint64_t seed, int modes, int freq_max);

struct SynthTruth {
    Potentials pot;
    IsoDiffusivity diff;
    VectorField v;
    ScalarField d;
};

// Random smooth ground truth: divergence-free velocity rescaled so its max
// in-mask speed equals v_max, and a smooth diffusivity mapped affinely into
// [0.1 d_max, d_max]. All randomness derives from the seed.
SynthTruth synth_truth(const Grid3& g, const DomainMask& m, uint64_t seed,
                       double v_max, double d_max, int modes = 6, int freq_max = 2);

// Positive multi-blob concentration with a broadband ripple; the in-mask
// maximum is rescaled to exactly amp. Gradients are nonzero over most of the
// domain so transport is observable everywhere.
ScalarField synth_initial(const Grid3& g, const DomainMask& m, uint64_t seed, double amp);

} // namespace pdeflow
