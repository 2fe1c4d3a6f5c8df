#include "loss_grad.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <stdexcept>

namespace pdeflow {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double edge_g(double s, double k) { return std::exp(-s / k); }

// coefficient fields active for the solver mode; inactive ones are replaced by
// constants so their parameter gradients vanish identically
struct EffectiveFields {
    VectorField v;
    ScalarField d;
    bool use_v = true;
    bool use_d = true;
};

EffectiveFields effective_fields(const Potentials& pots, const IsoDiffusivity& diff,
                                 Mode mode) {
    EffectiveFields eff;
    eff.use_v = mode != Mode::DiffusionOnly;
    eff.use_d = mode != Mode::AdvectionOnly;
    eff.v = eff.use_v ? velocity_from_potentials(pots) : VectorField(pots.gamma1.grid);
    eff.d = eff.use_d ? diffusivity_iso(diff) : ScalarField(diff.l.grid);
    return eff;
}

struct Rollout {
    long long steps_per_frame = 0;
    long long frames = 0; // collocation frames past frame 0
    std::vector<std::vector<double>> states;
    VolumeSeries predicted;
};

Rollout roll_forward(const TrainingSample& sample, const EffectiveFields& eff,
                     const DomainMask& mask, const SolverConfig& cfg, BoundaryData& bd) {
    sample.window.validate();
    const Grid3& g = mask.grid;
    require(sample.window.grid.same_shape(g), "loss: sample grid differs from mask");
    require(sample.window.frame_count() >= 2, "loss: sample needs at least two frames");
    cfg.validate();
    const double frame_dt = sample.window.dt_s;
    double m_real = std::round(frame_dt / cfg.dt);
    require(std::abs(frame_dt / cfg.dt - m_real) <= 1e-9 * std::max(1.0, m_real) && m_real >= 1.0,
            "loss: frame spacing must be an integer multiple of dt");
    Rollout r;
    r.steps_per_frame = (long long)m_real;
    r.frames = (long long)sample.window.frame_count() - 1;

    CflResult cfl = cfl_check(eff.v, eff.d, g, cfg.dt, cfg.cfl_safety);
    if (!cfl.ok) throw CflError(cfl.max_stable_dt);

    bd = BoundaryData::from_series(sample.window, mask, cfg.dirichlet_interp);
    MaskedRhs rhs(mask, eff.v, eff.d, cfg.face_d);
    ExplicitStepper stepper(rhs, bd, cfg.integrator, cfg.dt);

    std::vector<double> state = sample.window.frames[0].a;
    for (std::size_t i = 0; i < state.size(); ++i)
        if (!mask.is_inside(i)) state[i] = 0.0;
    stepper.clamp(state, 0.0);

    const long long total = r.frames * r.steps_per_frame;
    r.states.reserve((std::size_t)total + 1);
    r.states.push_back(state);
    for (long long s = 0; s < total; ++s) {
        stepper.forward_step(state, (double)s * cfg.dt);
        r.states.push_back(state);
    }

    r.predicted.grid = g;
    r.predicted.dt_s = frame_dt;
    ScalarField frame(g);
    for (long long q = 0; q <= r.frames; ++q) {
        frame.a = r.states[(std::size_t)(q * r.steps_per_frame)];
        r.predicted.frames.push_back(frame);
    }
    return r;
}

double smoothness_value(const VectorField& v, const ScalarField& d,
                        const ScalarField& alpha_v, const ScalarField& alpha_d,
                        const DomainMask& mask, double* l_as_d_out) {
    const Grid3& g = mask.grid;
    const double inv_n = 1.0 / (double)mask.n_inside;
    double l_as_v = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
        VectorField gr = gradient(v.comp(ax));
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!mask.is_inside(i)) continue;
            double s = gr.x[i] * gr.x[i] + gr.y[i] * gr.y[i] + gr.z[i] * gr.z[i];
            acc += alpha_v[i] * s;
        }
        l_as_v += acc * inv_n;
    }
    VectorField gd = gradient(d);
    double accd = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!mask.is_inside(i)) continue;
        double s = gd.x[i] * gd.x[i] + gd.y[i] * gd.y[i] + gd.z[i] * gd.z[i];
        accd += alpha_d[i] * s;
    }
    *l_as_d_out = accd * inv_n;
    return l_as_v;
}

LossBreakdown assemble(double l_cc, double l_as_v, double l_as_d, const LossConfig& cfg) {
    LossBreakdown b;
    b.l_cc = l_cc;
    b.l_as_v = l_as_v;
    b.l_as_d = l_as_d;
    b.lambda_v = cfg.lambda_v;
    b.lambda_d = cfg.lambda_d;
    b.total = l_cc + cfg.lambda_v * l_as_v + cfg.lambda_d * l_as_d;
    return b;
}

// adjoint of the elementwise cross product: abar = b x cbar, bbar = cbar x a
VectorField cross_fields(const VectorField& a, const VectorField& b) {
    VectorField out(a.grid());
    for (std::size_t i = 0; i < out.x.size(); ++i) {
        out.x[i] = a.y[i] * b.z[i] - a.z[i] * b.y[i];
        out.y[i] = a.z[i] * b.x[i] - a.x[i] * b.z[i];
        out.z[i] = a.x[i] * b.y[i] - a.y[i] * b.x[i];
    }
    return out;
}

// scatter the penalty adjoint of one field: weight * gradient_adjoint of the
// masked, alpha-weighted raw gradient
void add_seminorm_adjoint(const ScalarField& f, const ScalarField& alpha,
                          const DomainMask& mask, double weight, ScalarField& fbar) {
    VectorField gr = gradient(f);
    const double inv_n = 1.0 / (double)mask.n_inside;
    for (int ax = 0; ax < 3; ++ax)
        for (std::size_t i = 0; i < gr.x.size(); ++i)
            gr.comp(ax)[i] = mask.is_inside(i)
                                 ? weight * 2.0 * alpha[i] * gr.comp(ax)[i] * inv_n
                                 : 0.0;
    ScalarField adj = gradient_adjoint(gr);
    for (std::size_t i = 0; i < fbar.size(); ++i) fbar[i] += adj[i];
}

} // namespace

double loss_cc(const VolumeSeries& predicted, const VolumeSeries& measured,
               const DomainMask& mask) {
    predicted.validate();
    measured.validate();
    require(predicted.grid.same_shape(measured.grid) && predicted.grid.same_shape(mask.grid),
            "loss_cc: grid mismatch");
    require(predicted.frame_count() == measured.frame_count(), "loss_cc: frame count mismatch");
    require(predicted.frame_count() >= 2, "loss_cc: need at least two frames");
    require(mask.n_inside > 0, "loss_cc: empty mask");
    const std::size_t n = mask.grid.size();
    double sum_frames = 0.0;
    for (std::size_t q = 1; q < predicted.frame_count(); ++q) {
        const ScalarField& p = predicted.frames[q];
        const ScalarField& m = measured.frames[q];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask.is_inside(i)) continue;
            double r = p[i] - m[i];
            acc += r * r;
        }
        sum_frames += acc / (double)mask.n_inside;
    }
    return sum_frames / (double)(predicted.frame_count() - 1);
}

double pm_k(const ScalarField& f, const DomainMask& mask, int bins) {
    require(f.grid.same_shape(mask.grid), "pm_k: grid mismatch");
    require(bins >= 1, "pm_k: bins must be positive");
    require(mask.n_inside > 0, "pm_k: empty mask");
    VectorField gr = gradient(f);
    std::vector<double> mag;
    mag.reserve(mask.n_inside);
    double mx = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!mask.is_inside(i)) continue;
        double m = std::sqrt(gr.x[i] * gr.x[i] + gr.y[i] * gr.y[i] + gr.z[i] * gr.z[i]);
        mag.push_back(m);
        mx = std::max(mx, m);
    }
    if (mx == 0.0) return DBL_EPSILON;
    std::vector<std::size_t> hist((std::size_t)bins, 0);
    for (double m : mag) {
        auto b = (std::size_t)(m / mx * (double)bins);
        if (b >= (std::size_t)bins) b = (std::size_t)bins - 1;
        ++hist[b];
    }
    std::size_t cum = 0;
    for (std::size_t b = 0; b < (std::size_t)bins; ++b) {
        cum += hist[b];
        if (cum * 10 >= mag.size() * 9) // cumulative mass >= 0.9, exact in integers
            return mx * (double)(b + 1) / (double)bins;
    }
    return mx;
}

SmoothnessTerms smoothness_terms(const VectorField& v, const ScalarField& d,
                                 double sigma, double k_v, double k_d,
                                 const DomainMask& mask) {
    const Grid3& g = mask.grid;
    require(v.grid().same_shape(g) && d.grid.same_shape(g), "smoothness_terms: grid mismatch");
    require(k_v > 0.0 && k_d > 0.0, "smoothness_terms: thresholds must be positive");
    SmoothnessTerms out;
    out.alpha_v = ScalarField(g);
    out.alpha_d = ScalarField(g);
    VectorField sg[3] = {VectorField(g), VectorField(g), VectorField(g)};
    for (int ax = 0; ax < 3; ++ax)
        sg[ax] = gradient(gaussian_smooth(v.comp(ax), sigma));
    for (std::size_t i = 0; i < g.size(); ++i) {
        double acc = 0.0;
        for (int ax = 0; ax < 3; ++ax) {
            double s = sg[ax].x[i] * sg[ax].x[i] + sg[ax].y[i] * sg[ax].y[i] +
                       sg[ax].z[i] * sg[ax].z[i];
            acc += edge_g(s, k_v);
        }
        out.alpha_v[i] = acc / 3.0;
    }
    VectorField sd = gradient(gaussian_smooth(d, sigma));
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = sd.x[i] * sd.x[i] + sd.y[i] * sd.y[i] + sd.z[i] * sd.z[i];
        out.alpha_d[i] = edge_g(s, k_d);
    }
    out.l_as_v = smoothness_value(v, d, out.alpha_v, out.alpha_d, mask, &out.l_as_d);
    return out;
}

PmCoeffs pm_coeffs(const VectorField& v, const ScalarField& d, double sigma, int bins,
                   const DomainMask& mask) {
    // classic edge-stopping rule: the threshold seen by g(s) with s a squared
    // magnitude is the square of the 90% histogram edge
    double kv_lin = 0.0;
    for (int ax = 0; ax < 3; ++ax) kv_lin += pm_k(gaussian_smooth(v.comp(ax), sigma), mask, bins);
    kv_lin /= 3.0;
    double kd_lin = pm_k(gaussian_smooth(d, sigma), mask, bins);
    PmCoeffs c;
    c.k_v = std::max(kv_lin * kv_lin, DBL_EPSILON);
    c.k_d = std::max(kd_lin * kd_lin, DBL_EPSILON);
    SmoothnessTerms st = smoothness_terms(v, d, sigma, c.k_v, c.k_d, mask);
    c.alpha_v = std::move(st.alpha_v);
    c.alpha_d = std::move(st.alpha_d);
    return c;
}

LossBreakdown total_loss(const TrainingSample& sample, const Potentials& pots,
                         const IsoDiffusivity& diff, const DomainMask& mask,
                         const LossConfig& cfg) {
    EffectiveFields eff = effective_fields(pots, diff, cfg.solver.mode);
    BoundaryData bd;
    Rollout r = roll_forward(sample, eff, mask, cfg.solver, bd);
    double lcc = loss_cc(r.predicted, sample.window, mask);
    PmCoeffs coeffs = pm_coeffs(eff.v, eff.d, cfg.sigma, cfg.pm_bins, mask);
    double l_as_d = 0.0;
    double l_as_v = smoothness_value(eff.v, eff.d, coeffs.alpha_v, coeffs.alpha_d, mask, &l_as_d);
    return assemble(lcc, l_as_v, l_as_d, cfg);
}

LossBreakdown total_loss_frozen(const TrainingSample& sample, const Potentials& pots,
                                const IsoDiffusivity& diff, const DomainMask& mask,
                                const LossConfig& cfg, const PmCoeffs& coeffs) {
    EffectiveFields eff = effective_fields(pots, diff, cfg.solver.mode);
    BoundaryData bd;
    Rollout r = roll_forward(sample, eff, mask, cfg.solver, bd);
    double lcc = loss_cc(r.predicted, sample.window, mask);
    double l_as_d = 0.0;
    double l_as_v = smoothness_value(eff.v, eff.d, coeffs.alpha_v, coeffs.alpha_d, mask, &l_as_d);
    return assemble(lcc, l_as_v, l_as_d, cfg);
}

std::pair<LossBreakdown, ParamGradients> loss_gradients(const TrainingSample& sample,
                                                        const Potentials& pots,
                                                        const IsoDiffusivity& diff,
                                                        const DomainMask& mask,
                                                        const LossConfig& cfg) {
    const Grid3& g = mask.grid;
    EffectiveFields eff = effective_fields(pots, diff, cfg.solver.mode);
    BoundaryData bd;
    Rollout r = roll_forward(sample, eff, mask, cfg.solver, bd);
    double lcc = loss_cc(r.predicted, sample.window, mask);
    PmCoeffs coeffs = pm_coeffs(eff.v, eff.d, cfg.sigma, cfg.pm_bins, mask);
    double l_as_d = 0.0;
    double l_as_v = smoothness_value(eff.v, eff.d, coeffs.alpha_v, coeffs.alpha_d, mask, &l_as_d);
    LossBreakdown breakdown = assemble(lcc, l_as_v, l_as_d, cfg);

    // backward sweep over the checkpointed steps, seeding the collocation
    // residuals as each recorded frame is passed
    MaskedRhs rhs(mask, eff.v, eff.d, cfg.solver.face_d);
    ExplicitStepper stepper(rhs, bd, cfg.solver.integrator, cfg.solver.dt);
    VectorField vbar(g);
    ScalarField dbar(g);
    std::vector<double> ybar(g.size(), 0.0);
    const long long total = r.frames * r.steps_per_frame;
    const double seed_scale = 2.0 / ((double)mask.n_inside * (double)r.frames);
    for (long long s = total - 1; s >= 0; --s) {
        if ((s + 1) % r.steps_per_frame == 0) {
            const long long q = (s + 1) / r.steps_per_frame;
            const std::vector<double>& pred = r.states[(std::size_t)(s + 1)];
            const ScalarField& meas = sample.window.frames[(std::size_t)q];
            for (std::size_t i = 0; i < ybar.size(); ++i)
                if (mask.is_inside(i)) ybar[i] += seed_scale * (pred[i] - meas[i]);
        }
        stepper.adjoint_step(r.states[(std::size_t)s], (double)s * cfg.solver.dt, ybar, vbar,
                             dbar);
    }

    // frozen-coefficient regularizer adjoints
    if (eff.use_v)
        for (int ax = 0; ax < 3; ++ax)
            add_seminorm_adjoint(eff.v.comp(ax), coeffs.alpha_v, mask, cfg.lambda_v,
                                 vbar.comp(ax));
    if (eff.use_d) add_seminorm_adjoint(eff.d, coeffs.alpha_d, mask, cfg.lambda_d, dbar);

    // pull back through the parameterization maps
    ParamGradients pg;
    pg.d_gamma1 = ScalarField(g);
    pg.d_gamma2 = ScalarField(g);
    pg.d_l = ScalarField(g);
    if (eff.use_v) {
        VectorField g1 = gradient(pots.gamma1);
        VectorField g2 = gradient(pots.gamma2);
        pg.d_gamma1 = gradient_adjoint(cross_fields(g2, vbar));
        pg.d_gamma2 = gradient_adjoint(cross_fields(vbar, g1));
    }
    if (eff.use_d)
        for (std::size_t i = 0; i < g.size(); ++i) pg.d_l[i] = 2.0 * diff.l[i] * dbar[i];

    // parameters live on the mask; the estimator never moves outside voxels
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!mask.is_inside(i)) {
            pg.d_gamma1[i] = 0.0;
            pg.d_gamma2[i] = 0.0;
            pg.d_l[i] = 0.0;
        }
    return {breakdown, std::move(pg)};
}

} // namespace pdeflow
