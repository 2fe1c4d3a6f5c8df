#include "grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pdeflow {

Grid3::Grid3(int nx_, int ny_, int nz_, double dx_, double dy_, double dz_)
    : nx(nx_), ny(ny_), nz(nz_), dx(dx_), dy(dy_), dz(dz_) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw std::invalid_argument("grid dims must be at least 1");
    if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0) ||
        !std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(dz))
        throw std::invalid_argument("grid spacing must be positive and finite");
}

bool Grid3::same_shape(const Grid3& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz &&
           dx == o.dx && dy == o.dy && dz == o.dz;
}

void ScalarField::fill(double v) {
    for (auto& e : a) e = v;
}

DomainMask DomainMask::classify(const Grid3& g, std::vector<uint8_t> inside_map,
                                bool dirichlet_slabs) {
    if (inside_map.size() != g.size())
        throw std::invalid_argument("mask size does not match grid");
    DomainMask m;
    m.grid = g;
    m.inside = std::move(inside_map);
    m.cls.assign(g.size(), VoxelClass::Outside);
    m.n_inside = 0;
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const std::size_t i = g.idx(x, y, z);
                if (m.inside[i] > 1)
                    throw std::invalid_argument("mask values must be 0 or 1");
                if (!m.inside[i]) continue;
                ++m.n_inside;
                if (dirichlet_slabs && (z == 0 || z == g.nz - 1)) {
                    m.cls[i] = VoxelClass::DirichletSlab;
                    continue;
                }
                bool contour = false;
                const int c[3] = {x, y, z};
                for (int ax = 0; ax < 3 && !contour; ++ax) {
                    const int n = g.dim(ax);
                    if (n == 1) continue;
                    const std::size_t s = g.stride(ax);
                    if (c[ax] == 0 || !m.inside[i - s]) contour = true;
                    else if (c[ax] == n - 1 || !m.inside[i + s]) contour = true;
                }
                m.cls[i] = contour ? VoxelClass::NeumannContour : VoxelClass::Interior;
            }
    return m;
}

DomainMask DomainMask::full(const Grid3& g, bool dirichlet_slabs) {
    return classify(g, std::vector<uint8_t>(g.size(), 1), dirichlet_slabs);
}

std::size_t DomainMask::count(VoxelClass c) const {
    std::size_t n = 0;
    for (auto v : cls)
        if (v == c) ++n;
    return n;
}

// d/d(axis) of f into out, central in the interior, one-sided at the two
// array edges, zero along size-1 axes.
static void derivative_axis(const ScalarField& f, int ax, ScalarField& out) {
    const Grid3& g = f.grid;
    const int n = g.dim(ax);
    if (n == 1) {
        out.fill(0.0);
        return;
    }
    const std::size_t s = g.stride(ax);
    const double h = g.spacing(ax);
    const double inv_h = 1.0 / h;
    const double inv_2h = 0.5 / h;
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const std::size_t i = g.idx(x, y, z);
                const int c = ax == 0 ? x : (ax == 1 ? y : z);
                if (c == 0)
                    out[i] = (f[i + s] - f[i]) * inv_h;
                else if (c == n - 1)
                    out[i] = (f[i] - f[i - s]) * inv_h;
                else
                    out[i] = (f[i + s] - f[i - s]) * inv_2h;
            }
}

VectorField gradient(const ScalarField& f) {
    VectorField g(f.grid);
    for (int ax = 0; ax < 3; ++ax)
        derivative_axis(f, ax, g.comp(ax));
    return g;
}

ScalarField gradient_adjoint(const VectorField& w) {
    if (!w.x.grid.same_shape(w.y.grid) || !w.x.grid.same_shape(w.z.grid))
        throw std::invalid_argument("vector field components do not share one grid");
    const Grid3& g = w.grid();
    ScalarField out(g);
    for (int ax = 0; ax < 3; ++ax) {
        const int n = g.dim(ax);
        if (n == 1) continue;
        const std::size_t s = g.stride(ax);
        const double inv_h = 1.0 / g.spacing(ax);
        const double inv_2h = 0.5 * inv_h;
        const ScalarField& wa = w.comp(ax);
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    const std::size_t i = g.idx(x, y, z);
                    const int c = ax == 0 ? x : (ax == 1 ? y : z);
                    if (c == 0) {
                        out[i] -= wa[i] * inv_h;
                        out[i + s] += wa[i] * inv_h;
                    } else if (c == n - 1) {
                        out[i] += wa[i] * inv_h;
                        out[i - s] -= wa[i] * inv_h;
                    } else {
                        out[i + s] += wa[i] * inv_2h;
                        out[i - s] -= wa[i] * inv_2h;
                    }
                }
    }
    return out;
}

ScalarField divergence(const VectorField& v) {
    if (!v.x.grid.same_shape(v.y.grid) || !v.x.grid.same_shape(v.z.grid))
        throw std::invalid_argument("vector field components do not share one grid");
    ScalarField out(v.grid());
    ScalarField tmp(v.grid());
    for (int ax = 0; ax < 3; ++ax) {
        derivative_axis(v.comp(ax), ax, tmp);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
    }
    return out;
}

// Fold an index into [0, n) by half-sample reflection.
static inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        else i = 2 * n - 1 - i;
    }
    return i;
}

ScalarField gaussian_smooth(const ScalarField& f, double sigma_voxels) {
    if (!(sigma_voxels >= 0.0) || !std::isfinite(sigma_voxels))
        throw std::invalid_argument("sigma must be finite and non-negative");
    if (sigma_voxels == 0.0) return f;

    const int r = (int)std::ceil(3.0 * sigma_voxels);
    std::vector<double> w(2 * r + 1);
    double sum = 0.0;
    for (int j = -r; j <= r; ++j) {
        w[j + r] = std::exp(-0.5 * (double)j * (double)j / (sigma_voxels * sigma_voxels));
        sum += w[j + r];
    }
    for (auto& e : w) e /= sum;

    ScalarField cur = f;
    ScalarField nxt(f.grid);
    const Grid3& g = f.grid;
    std::vector<double> line;
    for (int ax = 0; ax < 3; ++ax) {
        const int n = g.dim(ax);
        if (n == 1) continue;
        const std::size_t s = g.stride(ax);
        // iterate over all 1D lines along ax
        const int n0 = g.dim((ax + 1) % 3);
        const int n1 = g.dim((ax + 2) % 3);
        const std::size_t s0 = g.stride((ax + 1) % 3);
        const std::size_t s1 = g.stride((ax + 2) % 3);
        line.assign(n, 0.0);
        for (int b = 0; b < n1; ++b)
            for (int a = 0; a < n0; ++a) {
                const std::size_t base = (std::size_t)a * s0 + (std::size_t)b * s1;
                for (int c = 0; c < n; ++c) line[c] = cur[base + (std::size_t)c * s];
                for (int c = 0; c < n; ++c) {
                    double acc = 0.0;
                    for (int j = -r; j <= r; ++j)
                        acc += w[j + r] * line[reflect_index(c + j, n)];
                    nxt[base + (std::size_t)c * s] = acc;
                }
            }
        std::swap(cur, nxt);
    }
    return cur;
}

} // namespace pdeflow
