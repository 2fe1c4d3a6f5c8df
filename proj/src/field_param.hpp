#pragma once

#include "grid.hpp"

#include <array>

namespace pdeflow {

// Free parameters of the velocity model. The estimated velocity is the cross
// product of the two potential gradients, which is divergence free in the
// continuum limit.
struct Potentials {
    ScalarField gamma1;
    ScalarField gamma2;

    Potentials() = default;
    explicit Potentials(const Grid3& g) : gamma1(g), gamma2(g) {}
};

// Isotropic diffusivity parameter, D = l^2 pointwise.
struct IsoDiffusivity {
    ScalarField l;

    IsoDiffusivity() = default;
    explicit IsoDiffusivity(const Grid3& g) : l(g) {}
};

// Upper-triangular per-voxel Cholesky factor for the full tensor variant.
struct CholeskyField {
    ScalarField l11, l12, l13, l22, l23, l33;

    CholeskyField() = default;
    explicit CholeskyField(const Grid3& g)
        : l11(g), l12(g), l13(g), l22(g), l23(g), l33(g) {}
};

// Symmetric 3x3 tensor per voxel, unique entries only.
struct SymTensorField {
    ScalarField d11, d12, d13, d22, d23, d33;

    SymTensorField() = default;
    explicit SymTensorField(const Grid3& g)
        : d11(g), d12(g), d13(g), d22(g), d23(g), d33(g) {}
};

struct FeatureMaps {
    ScalarField v_mag;                  // mm/s
    std::array<ScalarField, 3> v_rgb;   // orientation channels in [0,1]
    ScalarField d;                      // mm^2/s
    ScalarField peclet;                 // +inf sentinel where d = 0
    ScalarField inv_peclet;             // +inf sentinel where v_mag = 0
};

// V = grad(gamma1) x grad(gamma2), central differences.
VectorField velocity_from_potentials(const Potentials& p);

// D = l^2 pointwise, always nonnegative.
ScalarField diffusivity_iso(const IsoDiffusivity& p);

// D = L^T L per voxel, symmetric PSD by construction.
SymTensorField diffusion_tensor_from_cholesky(const CholeskyField& c);

// Magnitude, orientation channels and Peclet maps. char_len in mm.
FeatureMaps feature_maps(const VectorField& v, const ScalarField& d, double char_len);

} // namespace pdeflow
