#include "estimator.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace pdeflow {

const char* mode_name(Mode m) {
    switch (m) {
    case Mode::AdvectionOnly: return "advection_only";
    case Mode::DiffusionOnly: return "diffusion_only";
    default: return "advection_diffusion";
    }
}

const char* integrator_name(Integrator i) {
    return i == Integrator::RK4 ? "rk4" : "rk45_fixed";
}

const char* face_name(FaceDiffusivity f) {
    return f == FaceDiffusivity::NestedForwardBackward ? "nested_forward_backward"
                                                       : "arithmetic_mean";
}

Mode mode_from_name(const std::string& s) {
    if (s == "advection_only") return Mode::AdvectionOnly;
    if (s == "diffusion_only") return Mode::DiffusionOnly;
    if (s == "advection_diffusion") return Mode::AdvectionDiffusion;
    throw std::invalid_argument("unknown mode: " + s);
}

Integrator integrator_from_name(const std::string& s) {
    if (s == "rk4") return Integrator::RK4;
    if (s == "rk45_fixed") return Integrator::RK45FixedStep;
    throw std::invalid_argument("unknown integrator: " + s);
}

FaceDiffusivity face_from_name(const std::string& s) {
    if (s == "arithmetic_mean") return FaceDiffusivity::ArithmeticMean;
    if (s == "nested_forward_backward") return FaceDiffusivity::NestedForwardBackward;
    throw std::invalid_argument("unknown face diffusivity: " + s);
}

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// u <- momentum * u + g; theta <- theta - lr * u
void momentum_step(ScalarField& theta, ScalarField& u, const ScalarField& g, double momentum,
                   double lr) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        u[i] = momentum * u[i] + g[i];
        theta[i] -= lr * u[i];
    }
}

} // namespace

void EstimatorConfig::validate() const {
    require(lambda_v >= 0.0 && lambda_d >= 0.0, "smoothness weights must be nonnegative");
    require(sigma >= 0.0, "sigma must be nonnegative");
    require(dt > 0.0, "dt must be positive");
    require(t_pd >= 0, "t_pd must be nonnegative");
    require(lr >= 0.0, "learning rate must be nonnegative");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
    require(init_scale >= 0.0, "init_scale must be nonnegative");
    require(conv_rel_tol > 0.0, "conv_rel_tol must be positive");
    require(conv_patience >= 1, "conv_patience must be at least 1");
    require(max_iters >= 1, "max_iters must be at least 1");
    require(pm_bins >= 1, "pm_bins must be at least 1");
}

LossConfig EstimatorConfig::loss_config() const {
    LossConfig lc;
    lc.lambda_v = lambda_v;
    lc.lambda_d = lambda_d;
    lc.sigma = sigma;
    lc.pm_bins = pm_bins;
    lc.solver.dt = dt;
    lc.solver.mode = mode;
    lc.solver.integrator = integrator;
    lc.solver.face_d = face_d;
    lc.solver.dirichlet_interp = dirichlet_interp;
    return lc;
}

int EstimatorConfig::resolve_t_pd(int t_total) const {
    require(t_total >= 1, "need at least two frames");
    int horizon = t_pd > 0 ? t_pd : std::max(1, t_total / 3);
    require(horizon <= t_total, "prediction horizon exceeds the series");
    return horizon;
}

std::pair<Potentials, IsoDiffusivity> init_params(const Grid3& g, const DomainMask& mask,
                                                  uint64_t seed, double scale) {
    require(g.same_shape(mask.grid), "mask grid mismatch");
    Rng rng(seed);
    Potentials p(g);
    IsoDiffusivity d(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (mask.is_inside(i)) {
            p.gamma1[i] = scale * rng.normal();
            p.gamma2[i] = scale * rng.normal();
            d.l[i] = scale * rng.normal();
        }
    return {std::move(p), std::move(d)};
}

TrainingSample select_sample(const VolumeSeries& series, int t_pd, Rng& rng) {
    series.validate();
    require(t_pd >= 1, "t_pd must be at least 1");
    int t_total = (int)series.frame_count() - 1;
    require(t_total >= t_pd, "series shorter than the sample window");
    std::size_t start = rng.below((uint64_t)(t_total - t_pd + 1));
    TrainingSample s;
    s.start_frame = start;
    s.window.grid = series.grid;
    s.window.dt_s = series.dt_s;
    s.window.frames.assign(series.frames.begin() + (std::ptrdiff_t)start,
                           series.frames.begin() + (std::ptrdiff_t)(start + (std::size_t)t_pd + 1));
    return s;
}

FitResult fit(const VolumeSeries& series, const DomainMask& mask, const EstimatorConfig& cfg) {
    cfg.validate();
    series.validate();
    require(series.grid.same_shape(mask.grid), "mask grid mismatch");
    int t_total = (int)series.frame_count() - 1;
    int horizon = cfg.resolve_t_pd(t_total);
    LossConfig lc = cfg.loss_config();

    FitResult r;
    auto [pots, diffp] = init_params(series.grid, mask, Rng::mix(cfg.rng_seed, 0x1d), cfg.init_scale);
    // a disabled term's parameters never influence the model; keep the
    // reported fields consistent with what the solver actually used
    if (cfg.mode == Mode::DiffusionOnly) {
        pots.gamma1.fill(0.0);
        pots.gamma2.fill(0.0);
    }
    if (cfg.mode == Mode::AdvectionOnly) diffp.l.fill(0.0);

    ScalarField u1(series.grid), u2(series.grid), ul(series.grid);
    Rng sampler(Rng::mix(cfg.rng_seed, 0x5e));

    double prev_total = std::numeric_limits<double>::quiet_NaN();
    int streak = 0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        TrainingSample s = select_sample(series, horizon, sampler);
        LossBreakdown b;
        ParamGradients g;
        try {
            std::tie(b, g) = loss_gradients(s, pots, diffp, mask, lc);
        } catch (const CflError& e) {
            throw CflError("fit aborted at iteration " + std::to_string(iter) + ": " + e.what(),
                           e.max_stable_dt);
        }
        momentum_step(pots.gamma1, u1, g.d_gamma1, cfg.momentum, cfg.lr);
        momentum_step(pots.gamma2, u2, g.d_gamma2, cfg.momentum, cfg.lr);
        momentum_step(diffp.l, ul, g.d_l, cfg.momentum, cfg.lr);
        r.loss_history.push_back(b);
        r.iterations = iter + 1;

        if (iter > 0) {
            double delta = std::abs(b.total - prev_total);
            double rel = delta == 0.0 ? 0.0
                                      : delta / std::max(std::abs(prev_total),
                                                         std::numeric_limits<double>::min());
            streak = rel < cfg.conv_rel_tol ? streak + 1 : 0;
            if (streak >= cfg.conv_patience) {
                r.converged = true;
                break;
            }
        }
        prev_total = b.total;
    }

    r.v = velocity_from_potentials(pots);
    r.d = diffusivity_iso(diffp);
    r.potentials = std::move(pots);
    r.diffus_param = std::move(diffp);
    return r;
}

VolumeSeries predict_series(const FitResult& fit, const ScalarField& c0, const DomainMask& mask,
                            const BoundaryData& bd, const EstimatorConfig& cfg, double frame_dt,
                            int t_total) {
    cfg.validate();
    require(c0.grid.same_shape(mask.grid), "initial frame grid mismatch");
    require(frame_dt > 0.0, "frame_dt must be positive");
    require(t_total >= 0, "horizon must be nonnegative");
    SolverConfig sc = cfg.loss_config().solver;
    if (t_total == 0) {
        VolumeSeries out;
        out.grid = c0.grid;
        out.dt_s = frame_dt;
        ScalarField state = c0;
        ScalarField rate(c0.grid);
        apply_bc(rate, state, mask, bd, 0.0);
        out.frames.push_back(std::move(state));
        return out;
    }
    return integrate(c0, fit.v, fit.d, mask, bd, sc, frame_dt * t_total, frame_dt);
}

nlohmann::json estimator_config_json(const EstimatorConfig& c) {
    return nlohmann::json{{"lambda_v", c.lambda_v},
                          {"lambda_d", c.lambda_d},
                          {"sigma", c.sigma},
                          {"dt", c.dt},
                          {"t_pd", c.t_pd},
                          {"lr", c.lr},
                          {"momentum", c.momentum},
                          {"init_scale", c.init_scale},
                          {"conv_rel_tol", c.conv_rel_tol},
                          {"conv_patience", c.conv_patience},
                          {"max_iters", c.max_iters},
                          {"rng_seed", c.rng_seed},
                          {"mode", mode_name(c.mode)},
                          {"integrator", integrator_name(c.integrator)},
                          {"face_diffusivity", face_name(c.face_d)},
                          {"dirichlet_interp", c.dirichlet_interp},
                          {"pm_bins", c.pm_bins}};
}

EstimatorConfig estimator_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{
        "lambda_v", "lambda_d", "sigma", "dt", "t_pd", "lr", "momentum",
        "init_scale", "conv_rel_tol", "conv_patience", "max_iters", "rng_seed",
        "mode", "integrator", "face_diffusivity", "dirichlet_interp", "pm_bins"};
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw std::invalid_argument("unknown estimator config key: " + item.key());
    EstimatorConfig c;
    c.lambda_v = j.value("lambda_v", c.lambda_v);
    c.lambda_d = j.value("lambda_d", c.lambda_d);
    c.sigma = j.value("sigma", c.sigma);
    c.dt = j.value("dt", c.dt);
    c.t_pd = j.value("t_pd", c.t_pd);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.conv_rel_tol = j.value("conv_rel_tol", c.conv_rel_tol);
    c.conv_patience = j.value("conv_patience", c.conv_patience);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    if (j.contains("mode")) c.mode = mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("integrator"))
        c.integrator = integrator_from_name(j.at("integrator").get<std::string>());
    if (j.contains("face_diffusivity"))
        c.face_d = face_from_name(j.at("face_diffusivity").get<std::string>());
    c.dirichlet_interp = j.value("dirichlet_interp", c.dirichlet_interp);
    c.pm_bins = j.value("pm_bins", c.pm_bins);
    return c;
}

std::string fit_manifest_json(const EstimatorConfig& cfg, const FitResult& r,
                              const std::vector<std::pair<std::string, std::string>>& extra) {
    nlohmann::json j;
    j["config"] = estimator_config_json(cfg);
    j["seed"] = cfg.rng_seed;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& b : r.loss_history)
        hist.push_back({{"l_cc", b.l_cc},
                        {"l_as_v", b.l_as_v},
                        {"l_as_d", b.l_as_d},
                        {"total", b.total}});
    j["loss_history"] = std::move(hist);
    for (const auto& [k, v] : extra) j["context"][k] = v;
    return j.dump(2);
}

} // namespace pdeflow
