#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pdeflow {

// Regular voxel lattice. Values are indexed x-fastest, z-slowest.
struct Grid3 {
    int nx = 0, ny = 0, nz = 0;
    double dx = 1.0, dy = 1.0, dz = 1.0; // voxel spacing in mm

    Grid3() = default;
    Grid3(int nx_, int ny_, int nz_, double dx_, double dy_, double dz_);

    std::size_t size() const { return (std::size_t)nx * ny * nz; }
    std::size_t idx(int x, int y, int z) const {
        return (std::size_t)x + (std::size_t)nx * ((std::size_t)y + (std::size_t)ny * z);
    }
    int dim(int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    double spacing(int axis) const { return axis == 0 ? dx : (axis == 1 ? dy : dz); }
    std::size_t stride(int axis) const {
        return axis == 0 ? 1 : (axis == 1 ? (std::size_t)nx : (std::size_t)nx * ny);
    }
    bool same_shape(const Grid3& o) const;
};

struct ScalarField {
    Grid3 grid;
    std::vector<double> a;

    ScalarField() = default;
    explicit ScalarField(const Grid3& g, double fill = 0.0)
        : grid(g), a(g.size(), fill) {}

    double& at(int x, int y, int z) { return a[grid.idx(x, y, z)]; }
    double at(int x, int y, int z) const { return a[grid.idx(x, y, z)]; }
    double& operator[](std::size_t i) { return a[i]; }
    double operator[](std::size_t i) const { return a[i]; }
    std::size_t size() const { return a.size(); }
    void fill(double v);
};

// Component fields share one grid.
struct VectorField {
    ScalarField x, y, z;

    VectorField() = default;
    explicit VectorField(const Grid3& g) : x(g), y(g), z(g) {}
    const Grid3& grid() const { return x.grid; }
    ScalarField& comp(int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
    const ScalarField& comp(int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

enum class VoxelClass : uint8_t {
    Outside = 0,
    Interior = 1,
    DirichletSlab = 2,
    NeumannContour = 3,
};

// Voxel partition of the computational domain. Inside voxels on the first and
// last z slice may be pinned to measured values (DirichletSlab); inside voxels
// touching the domain contour get mirrored neighbors (NeumannContour).
struct DomainMask {
    Grid3 grid;
    std::vector<uint8_t> inside;  // 0/1 per voxel
    std::vector<VoxelClass> cls;  // classification per voxel
    std::size_t n_inside = 0;

    bool is_inside(std::size_t i) const { return inside[i] != 0; }

    // Classify an inside/outside map. With dirichlet_slabs, inside voxels on
    // z = 0 and z = nz-1 are DirichletSlab. Face neighbors out of the array
    // count as outside, except along axes of size 1 where stencils are inert.
    static DomainMask classify(const Grid3& g, std::vector<uint8_t> inside_map,
                               bool dirichlet_slabs);
    static DomainMask full(const Grid3& g, bool dirichlet_slabs);

    std::size_t count(VoxelClass c) const;
};

// Central differences, one-sided at array edges, zero along size-1 axes.
VectorField gradient(const ScalarField& f);

// Exact transpose of the gradient stencil, serial scatter so that results are
// reproducible. <gradient(f), w> == <f, gradient_adjoint(w)>.
ScalarField gradient_adjoint(const VectorField& w);

// Divergence with the same stencil family as gradient.
ScalarField divergence(const VectorField& v);

// Separable Gaussian blur, sigma in voxels, truncated at ceil(3*sigma) taps,
// reflected at array edges so that total mass and constants are preserved.
ScalarField gaussian_smooth(const ScalarField& f, double sigma_voxels);

} // namespace pdeflow
