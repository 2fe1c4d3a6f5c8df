#include "field_param.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdeflow {

VectorField velocity_from_potentials(const Potentials& p) {
    if (!p.gamma1.grid.same_shape(p.gamma2.grid))
        throw std::invalid_argument("potentials do not share one grid");
    const VectorField g1 = gradient(p.gamma1);
    const VectorField g2 = gradient(p.gamma2);
    VectorField v(p.gamma1.grid);
    for (std::size_t i = 0; i < v.x.size(); ++i) {
        v.x[i] = g1.y[i] * g2.z[i] - g1.z[i] * g2.y[i];
        v.y[i] = g1.z[i] * g2.x[i] - g1.x[i] * g2.z[i];
        v.z[i] = g1.x[i] * g2.y[i] - g1.y[i] * g2.x[i];
    }
    return v;
}

ScalarField diffusivity_iso(const IsoDiffusivity& p) {
    ScalarField d(p.l.grid);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.l[i] * p.l[i];
    return d;
}

SymTensorField diffusion_tensor_from_cholesky(const CholeskyField& c) {
    const Grid3& g = c.l11.grid;
    for (const ScalarField* f : {&c.l12, &c.l13, &c.l22, &c.l23, &c.l33})
        if (!f->grid.same_shape(g))
            throw std::invalid_argument("cholesky fields do not share one grid");
    SymTensorField d(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = c.l11[i], b = c.l12[i], e = c.l13[i];
        const double f = c.l22[i], h = c.l23[i], k = c.l33[i];
        // D = L^T L with L upper triangular (rows (a,b,e), (0,f,h), (0,0,k))
        d.d11[i] = a * a;
        d.d12[i] = a * b;
        d.d13[i] = a * e;
        d.d22[i] = b * b + f * f;
        d.d23[i] = b * e + f * h;
        d.d33[i] = e * e + h * h + k * k;
    }
    return d;
}

FeatureMaps feature_maps(const VectorField& v, const ScalarField& d, double char_len) {
    if (!(char_len > 0.0) || !std::isfinite(char_len))
        throw std::invalid_argument("char_len must be positive and finite");
    if (!v.grid().same_shape(d.grid))
        throw std::invalid_argument("velocity and diffusivity grids differ");
    const Grid3& g = d.grid;
    const double inf = std::numeric_limits<double>::infinity();
    FeatureMaps m;
    m.v_mag = ScalarField(g);
    for (auto& ch : m.v_rgb) ch = ScalarField(g);
    m.d = d;
    m.peclet = ScalarField(g);
    m.inv_peclet = ScalarField(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double mag = std::sqrt(v.x[i] * v.x[i] + v.y[i] * v.y[i] + v.z[i] * v.z[i]);
        m.v_mag[i] = mag;
        if (mag > 0.0) {
            m.v_rgb[0][i] = std::abs(v.x[i]) / mag;
            m.v_rgb[1][i] = std::abs(v.y[i]) / mag;
            m.v_rgb[2][i] = std::abs(v.z[i]) / mag;
        }
        m.peclet[i] = d[i] == 0.0 ? inf : char_len * mag / d[i];
        m.inv_peclet[i] = mag == 0.0 ? inf : d[i] / (char_len * mag);
    }
    return m;
}

} // namespace pdeflow
