#include "pde_forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace pdeflow {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

bool near_integer(double x, double* rounded) {
    double r = std::round(x);
    *rounded = r;
    return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x));
}

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t n = y.size();
    const double* xp = x.data();
    double* yp = y.data();
    for (std::size_t i = 0; i < n; ++i) yp[i] += a * xp[i];
}

// Fehlberg 4(5). The 4th order row advances the state, the 5th order row only
// feeds the embedded error diagnostic.
constexpr double kFehlbergC[6] = {0.0, 1.0 / 4, 3.0 / 8, 12.0 / 13, 1.0, 1.0 / 2};
constexpr double kFehlbergA[15] = {
    1.0 / 4,
    3.0 / 32,       9.0 / 32,
    1932.0 / 2197,  -7200.0 / 2197, 7296.0 / 2197,
    439.0 / 216,    -8.0,           3680.0 / 513,    -845.0 / 4104,
    -8.0 / 27,      2.0,            -3544.0 / 2565,  1859.0 / 4104,  -11.0 / 40,
};
constexpr double kFehlbergB4[6] = {25.0 / 216, 0.0, 1408.0 / 2565, 2197.0 / 4104, -1.0 / 5, 0.0};
constexpr double kFehlbergB5[6] = {16.0 / 135, 0.0, 6656.0 / 12825, 28561.0 / 56430, -9.0 / 50, 2.0 / 55};

constexpr double kRk4C[4] = {0.0, 0.5, 0.5, 1.0};
constexpr double kRk4A[6] = {0.5, 0.0, 0.5, 0.0, 0.0, 1.0};
constexpr double kRk4B[4] = {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6};

} // namespace

void SolverConfig::validate() const {
    require(dt > 0.0, "SolverConfig: dt must be positive");
    require(cfl_safety > 0.0 && cfl_safety <= 1.0, "SolverConfig: cfl_safety must be in (0, 1]");
}

BoundaryData BoundaryData::from_series(const VolumeSeries& s, const DomainMask& m,
                                       bool interp) {
    s.validate();
    require(s.grid.same_shape(m.grid), "BoundaryData: series and mask grids differ");
    BoundaryData bd;
    bd.frame_dt = s.dt_s;
    bd.interpolate = interp;
    for (std::size_t i = 0; i < m.cls.size(); ++i)
        if (m.cls[i] == VoxelClass::DirichletSlab) bd.voxels.push_back(i);
    bd.values.reserve(s.frames.size());
    for (const ScalarField& f : s.frames) {
        std::vector<double> row(bd.voxels.size());
        for (std::size_t k = 0; k < bd.voxels.size(); ++k) row[k] = f[bd.voxels[k]];
        bd.values.push_back(std::move(row));
    }
    return bd;
}

double BoundaryData::t_max() const {
    if (values.size() <= 1) return std::numeric_limits<double>::infinity();
    return (double)(values.size() - 1) * frame_dt;
}

void BoundaryData::row_at(double t, std::vector<double>& out) const {
    out.resize(voxels.size());
    if (values.empty()) return;
    if (values.size() == 1) {
        std::copy(values[0].begin(), values[0].end(), out.begin());
        return;
    }
    double s = std::max(0.0, t / frame_dt);
    if (interpolate) {
        std::size_t i0 = std::min((std::size_t)s, values.size() - 2);
        double w = std::clamp(s - (double)i0, 0.0, 1.0);
        const double* lo = values[i0].data();
        const double* hi = values[i0 + 1].data();
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = (1.0 - w) * lo[k] + w * hi[k];
    } else {
        std::size_t i0 = std::min((std::size_t)(s + 1e-9), values.size() - 1);
        std::copy(values[i0].begin(), values[i0].end(), out.begin());
    }
}

// ---- masked right-hand side ------------------------------------------------

MaskedRhs::MaskedRhs(const DomainMask& mask, const VectorField& v, const ScalarField& d,
                     FaceDiffusivity face)
    : mask_(&mask), v_(&v), d_(&d), face_(face) {
    const Grid3& g = mask.grid;
    require(v.grid().same_shape(g), "MaskedRhs: velocity grid differs from mask");
    require(d.grid.same_shape(g), "MaskedRhs: diffusivity grid differs from mask");
    const std::size_t n = g.size();
    nb_.assign(n, 0);
    evolve_.assign(n, 0);
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const std::size_t i = g.idx(x, y, z);
                if (!mask.is_inside(i)) continue;
                evolve_[i] = mask.cls[i] != VoxelClass::DirichletSlab;
                const int c[3] = {x, y, z};
                uint8_t bits = 0;
                for (int axis = 0; axis < 3; ++axis) {
                    if (g.dim(axis) <= 1) continue;
                    const std::size_t s = g.stride(axis);
                    if (c[axis] > 0 && mask.is_inside(i - s)) bits |= (uint8_t)(1u << (2 * axis));
                    if (c[axis] < g.dim(axis) - 1 && mask.is_inside(i + s))
                        bits |= (uint8_t)(1u << (2 * axis + 1));
                }
                nb_[i] = bits;
            }
}

template <bool Arith>
void MaskedRhs::eval_impl(const double* u, double* rate) const {
    const Grid3& g = mask_->grid;
    const std::size_t n = g.size();
    const double* vc[3] = {v_->x.a.data(), v_->y.a.data(), v_->z.a.data()};
    const double* dd = d_->a.data();
    int axes[3], na = 0;
    for (int a = 0; a < 3; ++a)
        if (g.dim(a) > 1) axes[na++] = a;
    std::size_t stride[3];
    double inv_d[3], inv_d2[3];
    for (int q = 0; q < na; ++q) {
        stride[q] = g.stride(axes[q]);
        inv_d[q] = 1.0 / g.spacing(axes[q]);
        inv_d2[q] = inv_d[q] * inv_d[q];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!evolve_[i]) {
            rate[i] = 0.0;
            continue;
        }
        const uint8_t bits = nb_[i];
        double acc = 0.0;
        for (int q = 0; q < na; ++q) {
            const int a = axes[q];
            const std::size_t s = stride[q];
            const bool left = bits & (1u << (2 * a));
            const bool right = bits & (1u << (2 * a + 1));
            const double va = vc[a][i];
            if (va > 0.0) {
                if (left) acc -= va * (u[i] - u[i - s]) * inv_d[q];
            } else if (va < 0.0) {
                if (right) acc -= va * (u[i + s] - u[i]) * inv_d[q];
            }
            if (left) {
                const double df = Arith ? 0.5 * (dd[i - s] + dd[i]) : dd[i - s];
                acc -= df * (u[i] - u[i - s]) * inv_d2[q];
            }
            if (right) {
                const double df = Arith ? 0.5 * (dd[i] + dd[i + s]) : dd[i];
                acc += df * (u[i + s] - u[i]) * inv_d2[q];
            }
        }
        rate[i] = acc;
    }
}

void MaskedRhs::eval(const std::vector<double>& u, std::vector<double>& rate) const {
    require(u.size() == mask_->grid.size(), "MaskedRhs: state size mismatch");
    rate.resize(u.size());
    if (face_ == FaceDiffusivity::ArithmeticMean)
        eval_impl<true>(u.data(), rate.data());
    else
        eval_impl<false>(u.data(), rate.data());
}

template <bool Arith>
void MaskedRhs::adjoint_state_impl(const double* u, const double* kbar, double* ubar) const {
    (void)u; // state adjoint of a bilinear form does not need the state
    const Grid3& g = mask_->grid;
    const std::size_t n = g.size();
    const double* vc[3] = {v_->x.a.data(), v_->y.a.data(), v_->z.a.data()};
    const double* dd = d_->a.data();
    int axes[3], na = 0;
    for (int a = 0; a < 3; ++a)
        if (g.dim(a) > 1) axes[na++] = a;
    std::size_t stride[3];
    double inv_d[3], inv_d2[3];
    for (int q = 0; q < na; ++q) {
        stride[q] = g.stride(axes[q]);
        inv_d[q] = 1.0 / g.spacing(axes[q]);
        inv_d2[q] = inv_d[q] * inv_d[q];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask_->is_inside(i)) continue;
        const uint8_t bits = nb_[i];
        double acc = 0.0;
        const double ki = evolve_[i] ? kbar[i] : 0.0;
        for (int q = 0; q < na; ++q) {
            const int a = axes[q];
            const std::size_t s = stride[q];
            const bool left = bits & (1u << (2 * a));
            const bool right = bits & (1u << (2 * a + 1));
            if (ki != 0.0) {
                const double va = vc[a][i];
                if (va > 0.0) {
                    if (left) acc -= va * inv_d[q] * ki;
                } else if (va < 0.0) {
                    if (right) acc += va * inv_d[q] * ki;
                }
                if (left) {
                    const double df = Arith ? 0.5 * (dd[i - s] + dd[i]) : dd[i - s];
                    acc -= df * inv_d2[q] * ki;
                }
                if (right) {
                    const double df = Arith ? 0.5 * (dd[i] + dd[i + s]) : dd[i];
                    acc -= df * inv_d2[q] * ki;
                }
            }
            if (right) { // this voxel is the left stencil arm of i + s
                const double kj = evolve_[i + s] ? kbar[i + s] : 0.0;
                if (kj != 0.0) {
                    const double vj = vc[a][i + s];
                    if (vj > 0.0) acc += vj * inv_d[q] * kj;
                    const double df = Arith ? 0.5 * (dd[i] + dd[i + s]) : dd[i];
                    acc += df * inv_d2[q] * kj;
                }
            }
            if (left) { // this voxel is the right stencil arm of i - s
                const double kj = evolve_[i - s] ? kbar[i - s] : 0.0;
                if (kj != 0.0) {
                    const double vj = vc[a][i - s];
                    if (vj < 0.0) acc -= vj * inv_d[q] * kj;
                    const double df = Arith ? 0.5 * (dd[i - s] + dd[i]) : dd[i - s];
                    acc += df * inv_d2[q] * kj;
                }
            }
        }
        ubar[i] += acc;
    }
}

void MaskedRhs::adjoint_state(const std::vector<double>& u, const std::vector<double>& kbar,
                              std::vector<double>& ubar) const {
    require(u.size() == mask_->grid.size() && kbar.size() == u.size() && ubar.size() == u.size(),
            "MaskedRhs: adjoint size mismatch");
    if (face_ == FaceDiffusivity::ArithmeticMean)
        adjoint_state_impl<true>(u.data(), kbar.data(), ubar.data());
    else
        adjoint_state_impl<false>(u.data(), kbar.data(), ubar.data());
}

void MaskedRhs::adjoint_coeff(const std::vector<double>& u, const std::vector<double>& kbar,
                              VectorField& vbar, ScalarField& dbar) const {
    const Grid3& g = mask_->grid;
    require(u.size() == g.size() && kbar.size() == g.size(), "MaskedRhs: adjoint size mismatch");
    require(vbar.grid().same_shape(g) && dbar.grid.same_shape(g),
            "MaskedRhs: adjoint field grid mismatch");
    const double* up = u.data();
    const double* kb = kbar.data();
    double* vb[3] = {vbar.x.a.data(), vbar.y.a.data(), vbar.z.a.data()};
    double* db = dbar.a.data();
    const double* vc[3] = {v_->x.a.data(), v_->y.a.data(), v_->z.a.data()};
    const bool arith = face_ == FaceDiffusivity::ArithmeticMean;
    for (int axis = 0; axis < 3; ++axis) {
        if (g.dim(axis) <= 1) continue;
        const std::size_t s = g.stride(axis);
        const double inv_d = 1.0 / g.spacing(axis);
        const double inv_d2 = inv_d * inv_d;
        const uint8_t lbit = (uint8_t)(1u << (2 * axis));
        const uint8_t rbit = (uint8_t)(1u << (2 * axis + 1));
        const std::size_t n = g.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask_->is_inside(i)) continue;
            const uint8_t bits = nb_[i];
            const double ki = evolve_[i] ? kb[i] : 0.0;
            if (ki != 0.0) {
                const double va = vc[axis][i];
                if (va > 0.0) {
                    if (bits & lbit) vb[axis][i] -= (up[i] - up[i - s]) * inv_d * ki;
                } else if (va < 0.0) {
                    if (bits & rbit) vb[axis][i] -= (up[i + s] - up[i]) * inv_d * ki;
                }
            }
            // diffusivity adjoint, keyed on the faces this voxel value feeds
            if (bits & rbit) {
                const double kj = evolve_[i + s] ? kb[i + s] : 0.0;
                const double jump = (up[i + s] - up[i]) * inv_d2;
                const double w = arith ? 0.5 : 1.0;
                db[i] += w * jump * (ki - kj);
            }
            if (arith && (bits & lbit)) {
                const double kj = evolve_[i - s] ? kb[i - s] : 0.0;
                const double jump = (up[i] - up[i - s]) * inv_d2;
                db[i] += 0.5 * jump * (kj - ki);
            }
        }
    }
}

// ---- public stencil operators ----------------------------------------------

ScalarField advect_upwind(const ScalarField& c, const VectorField& v) {
    require(v.grid().same_shape(c.grid), "advect_upwind: grid mismatch");
    DomainMask full = DomainMask::full(c.grid, false);
    ScalarField zero_d(c.grid);
    MaskedRhs rhs(full, v, zero_d, FaceDiffusivity::ArithmeticMean);
    ScalarField out(c.grid);
    rhs.eval(c.a, out.a);
    return out;
}

ScalarField diffuse(const ScalarField& c, const ScalarField& d, FaceDiffusivity face) {
    require(d.grid.same_shape(c.grid), "diffuse: grid mismatch");
    DomainMask full = DomainMask::full(c.grid, false);
    VectorField zero_v(c.grid);
    MaskedRhs rhs(full, zero_v, d, face);
    ScalarField out(c.grid);
    rhs.eval(c.a, out.a);
    return out;
}

ScalarField apply_bc(const ScalarField& rate, ScalarField& state, const DomainMask& m,
                     const BoundaryData& bd, double t) {
    require(rate.grid.same_shape(m.grid) && state.grid.same_shape(m.grid),
            "apply_bc: grid mismatch");
    ScalarField out = rate;
    std::vector<double> row;
    bd.row_at(t, row);
    for (std::size_t k = 0; k < bd.voxels.size(); ++k) state[bd.voxels[k]] = row[k];
    for (std::size_t i = 0; i < m.cls.size(); ++i) {
        if (m.cls[i] == VoxelClass::Outside) {
            state[i] = 0.0;
            out[i] = 0.0;
        } else if (m.cls[i] == VoxelClass::DirichletSlab) {
            out[i] = 0.0;
        }
    }
    return out;
}

CflResult cfl_check(const VectorField& v, const ScalarField& d, const Grid3& g,
                    double dt, double safety) {
    require(v.grid().same_shape(g) && d.grid.same_shape(g), "cfl_check: grid mismatch");
    require(dt > 0.0, "cfl_check: dt must be positive");
    require(safety > 0.0 && safety <= 1.0, "cfl_check: safety must be in (0, 1]");
    const double* vc[3] = {v.x.a.data(), v.y.a.data(), v.z.a.data()};
    double inv_d[3], inv_d2[3];
    bool active[3];
    for (int a = 0; a < 3; ++a) {
        active[a] = g.dim(a) > 1; // stencils are inert along size-1 axes
        inv_d[a] = active[a] ? 1.0 / g.spacing(a) : 0.0;
        inv_d2[a] = inv_d[a] * inv_d[a];
    }
    double worst = 0.0;
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (int a = 0; a < 3; ++a)
            if (active[a]) r += std::abs(vc[a][i]) * inv_d[a] + 2.0 * std::abs(d[i]) * inv_d2[a];
        worst = std::max(worst, r);
    }
    CflResult res;
    res.max_stable_dt = worst > 0.0 ? safety / worst : std::numeric_limits<double>::infinity();
    res.ok = dt <= res.max_stable_dt;
    return res;
}

// ---- explicit stepper --------------------------------------------------------

ExplicitStepper::ExplicitStepper(const MaskedRhs& rhs, const BoundaryData& bd,
                                 Integrator kind, double dt)
    : rhs_(&rhs), bd_(&bd), dt_(dt) {
    require(dt > 0.0, "ExplicitStepper: dt must be positive");
    if (kind == Integrator::RK45FixedStep) {
        stages_ = 6;
        c_ = kFehlbergC;
        a_ = kFehlbergA;
        b_ = kFehlbergB4;
        berr_ = kFehlbergB5;
    } else {
        stages_ = 4;
        c_ = kRk4C;
        a_ = kRk4A;
        b_ = kRk4B;
        berr_ = nullptr;
    }
    const std::size_t n = rhs.mask().grid.size();
    k_.assign(stages_, std::vector<double>(n));
    us_.assign(stages_, std::vector<double>(n));
    kbar_.assign(stages_, std::vector<double>(n));
    tmp_.resize(n);
}

void ExplicitStepper::clamp(std::vector<double>& u, double t) const {
    bd_->row_at(t, row_);
    for (std::size_t k = 0; k < bd_->voxels.size(); ++k) u[bd_->voxels[k]] = row_[k];
}

void ExplicitStepper::zero_noneval(std::vector<double>& x) const {
    const DomainMask& m = rhs_->mask();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!m.is_inside(i) || m.cls[i] == VoxelClass::DirichletSlab) x[i] = 0.0;
}

void ExplicitStepper::forward_step(std::vector<double>& u, double t) {
    us_[0] = u;
    clamp(us_[0], t);
    rhs_->eval(us_[0], k_[0]);
    const double* arow = a_;
    for (int j = 1; j < stages_; ++j) {
        us_[j] = us_[0];
        for (int l = 0; l < j; ++l)
            if (arow[l] != 0.0) axpy(dt_ * arow[l], k_[l], us_[j]);
        clamp(us_[j], t + c_[j] * dt_);
        rhs_->eval(us_[j], k_[j]);
        arow += j;
    }
    u = us_[0];
    for (int j = 0; j < stages_; ++j)
        if (b_[j] != 0.0) axpy(dt_ * b_[j], k_[j], u);
    if (berr_) {
        double worst = 0.0;
        const std::size_t n = u.size();
        for (std::size_t i = 0; i < n; ++i) {
            double e = 0.0;
            for (int j = 0; j < stages_; ++j) e += (berr_[j] - b_[j]) * k_[j][i];
            worst = std::max(worst, std::abs(dt_ * e));
        }
        max_embedded_error_ = std::max(max_embedded_error_, worst);
    }
    clamp(u, t + dt_);
}

void ExplicitStepper::adjoint_step(const std::vector<double>& u_in, double t,
                                   std::vector<double>& ybar, VectorField& vbar,
                                   ScalarField& dbar) {
    // recompute the stage states of the forward step
    us_[0] = u_in;
    clamp(us_[0], t);
    rhs_->eval(us_[0], k_[0]);
    {
        const double* arow = a_;
        for (int j = 1; j < stages_; ++j) {
            us_[j] = us_[0];
            for (int l = 0; l < j; ++l)
                if (arow[l] != 0.0) axpy(dt_ * arow[l], k_[l], us_[j]);
            clamp(us_[j], t + c_[j] * dt_);
            rhs_->eval(us_[j], k_[j]);
            arow += j;
        }
    }
    // the final clamp pins slab values, so their adjoints vanish
    zero_noneval(ybar);
    for (int j = 0; j < stages_; ++j) {
        kbar_[j].assign(ybar.size(), 0.0);
        if (b_[j] != 0.0) axpy(dt_ * b_[j], ybar, kbar_[j]);
    }
    for (int j = stages_ - 1; j >= 0; --j) {
        rhs_->adjoint_coeff(us_[j], kbar_[j], vbar, dbar);
        std::fill(tmp_.begin(), tmp_.end(), 0.0);
        rhs_->adjoint_state(us_[j], kbar_[j], tmp_);
        zero_noneval(tmp_); // stage clamp
        if (j > 0) {
            const double* arow = a_ + (std::size_t)j * (j - 1) / 2;
            for (int l = 0; l < j; ++l)
                if (arow[l] != 0.0) axpy(dt_ * arow[l], tmp_, kbar_[l]);
        }
        axpy(1.0, tmp_, ybar);
    }
}

// ---- driver ------------------------------------------------------------------

VolumeSeries integrate(const ScalarField& c0, const VectorField& v, const ScalarField& d,
                       const DomainMask& mask, const BoundaryData& bd,
                       const SolverConfig& cfg, double t_span, double record_every) {
    cfg.validate();
    const Grid3& g = mask.grid;
    require(c0.grid.same_shape(g), "integrate: state grid differs from mask");
    require(v.grid().same_shape(g), "integrate: velocity grid differs from mask");
    require(d.grid.same_shape(g), "integrate: diffusivity grid differs from mask");
    require(t_span > 0.0, "integrate: t_span must be positive");
    require(record_every > 0.0, "integrate: record_every must be positive");
    double m_real, f_real;
    require(near_integer(record_every / cfg.dt, &m_real) && m_real >= 1.0,
            "integrate: record_every must be an integer multiple of dt");
    require(near_integer(t_span / record_every, &f_real) && f_real >= 1.0,
            "integrate: t_span must be an integer multiple of record_every");
    const long long m = (long long)m_real;
    const long long nframes = (long long)f_real;
    require(bd.voxels.size() == mask.count(VoxelClass::DirichletSlab),
            "integrate: boundary data does not match the mask slab voxels");
    if (!bd.voxels.empty()) {
        require(!bd.values.empty(), "integrate: boundary data has no frames");
        if (bd.interpolate)
            require(t_span <= bd.t_max() + 1e-9 * cfg.dt,
                    "integrate: boundary data does not cover the integration window");
    }

    // mode reductions run the same path with the inactive coefficient zeroed
    VectorField vzero;
    ScalarField dzero;
    const VectorField* pv = &v;
    const ScalarField* pd = &d;
    if (cfg.mode == Mode::AdvectionOnly) {
        dzero = ScalarField(g);
        pd = &dzero;
    } else if (cfg.mode == Mode::DiffusionOnly) {
        vzero = VectorField(g);
        pv = &vzero;
    }

    CflResult cfl = cfl_check(*pv, *pd, g, cfg.dt, cfg.cfl_safety);
    if (!cfl.ok) throw CflError(cfl.max_stable_dt);

    MaskedRhs rhs(mask, *pv, *pd, cfg.face_d);
    ExplicitStepper stepper(rhs, bd, cfg.integrator, cfg.dt);

    std::vector<double> state = c0.a;
    for (std::size_t i = 0; i < state.size(); ++i)
        if (!mask.is_inside(i)) state[i] = 0.0;
    stepper.clamp(state, 0.0);

    VolumeSeries out;
    out.grid = g;
    out.dt_s = record_every;
    out.frames.reserve((std::size_t)nframes + 1);
    ScalarField frame(g);
    frame.a = state;
    out.frames.push_back(frame);

    long long step = 0;
    for (long long f = 0; f < nframes; ++f) {
        for (long long q = 0; q < m; ++q, ++step) stepper.forward_step(state, (double)step * cfg.dt);
        frame.a = state;
        out.frames.push_back(frame);
    }
    if (cfg.integrator == Integrator::RK45FixedStep)
        out.meta["embedded_error_max"] = format_g9(stepper.max_embedded_error());
    return out;
}

} // namespace pdeflow
