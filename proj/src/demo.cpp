#include "demo.hpp"

#include "data_io.hpp"
#include "experiments.hpp"
#include "metrics.hpp"
#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

namespace fs = std::filesystem;

namespace pdeflow {

namespace {

VolumeSeries wrap_map(const ScalarField& f, const std::string& name) {
    VolumeSeries s;
    s.grid = f.grid;
    s.dt_s = 1.0;
    s.frames = {f};
    s.meta["content"] = name;
    return s;
}

} // namespace

void Demo2dConfig::validate() const {
    if (nx < 4 || ny < 4 || nz < 2) throw std::invalid_argument("demo grid too small");
    if (sx <= 0 || sy <= 0 || sz <= 0) throw std::invalid_argument("spacing must be positive");
    if (frames < 2) throw std::invalid_argument("need at least two transitions");
    if (frame_dt <= 0 || sim_dt <= 0 || sim_dt > frame_dt)
        throw std::invalid_argument("need 0 < sim_dt <= frame_dt");
    if (fit_dt <= 0 || fit_dt > frame_dt)
        throw std::invalid_argument("need 0 < fit_dt <= frame_dt");
    if (d < 0) throw std::invalid_argument("diffusivity must be non-negative");
    if (amp <= 0) throw std::invalid_argument("amp must be positive");
    est.validate();
}

nlohmann::json demo2d_config_json(const Demo2dConfig& cfg) {
    return nlohmann::json{{"nx", cfg.nx},
                          {"ny", cfg.ny},
                          {"nz", cfg.nz},
                          {"sx", cfg.sx},
                          {"sy", cfg.sy},
                          {"sz", cfg.sz},
                          {"frames", cfg.frames},
                          {"frame_dt", cfg.frame_dt},
                          {"sim_dt", cfg.sim_dt},
                          {"fit_dt", cfg.fit_dt},
                          {"vx", cfg.vx},
                          {"vy", cfg.vy},
                          {"d", cfg.d},
                          {"amp", cfg.amp},
                          {"seed", cfg.seed},
                          {"estimator", estimator_config_json(cfg.est)}};
}

Demo2dConfig demo2d_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"nx", "ny", "nz", "sx", "sy", "sz",
                                             "frames", "frame_dt", "sim_dt", "fit_dt", "vx", "vy",
                                             "d", "amp", "seed", "estimator"};
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw std::invalid_argument("unknown demo config key: " + item.key());
    Demo2dConfig c;
    c.nx = j.value("nx", c.nx);
    c.ny = j.value("ny", c.ny);
    c.nz = j.value("nz", c.nz);
    c.sx = j.value("sx", c.sx);
    c.sy = j.value("sy", c.sy);
    c.sz = j.value("sz", c.sz);
    c.frames = j.value("frames", c.frames);
    c.frame_dt = j.value("frame_dt", c.frame_dt);
    c.sim_dt = j.value("sim_dt", c.sim_dt);
    c.fit_dt = j.value("fit_dt", c.fit_dt);
    c.vx = j.value("vx", c.vx);
    c.vy = j.value("vy", c.vy);
    c.d = j.value("d", c.d);
    c.amp = j.value("amp", c.amp);
    c.seed = j.value("seed", c.seed);
    if (j.contains("estimator")) c.est = estimator_config_from_json(j.at("estimator"));
    return c;
}

Demo2dResult run_demo2d(const Demo2dConfig& cfg) {
    cfg.validate();
    Demo2dResult res;
    res.cfg = cfg;

    Grid3 g(cfg.nx, cfg.ny, cfg.nz, cfg.sx, cfg.sy, cfg.sz);
    DomainMask mask = DomainMask::full(g, false);
    ScalarField c0 = synth_initial(g, mask, Rng::mix(cfg.seed, 0x61), cfg.amp);

    VectorField v(g);
    v.x.fill(cfg.vx);
    v.y.fill(cfg.vy);
    ScalarField d(g, cfg.d);

    SolverConfig sc;
    sc.dt = cfg.sim_dt;
    sc.integrator = cfg.est.integrator;
    sc.face_d = cfg.est.face_d;
    sc.dirichlet_interp = cfg.est.dirichlet_interp;
    VolumeSeries c0_series = wrap_map(c0, "c0");
    BoundaryData bd = BoundaryData::from_series(c0_series, mask, sc.dirichlet_interp);
    res.measured = integrate(c0, v, d, mask, bd, sc, cfg.frame_dt * cfg.frames, cfg.frame_dt);

    EstimatorConfig est = cfg.est;
    est.dt = cfg.fit_dt;
    est.rng_seed = Rng::mix(cfg.seed, 0x62);
    res.fit = fit(res.measured, mask, est);

    BoundaryData fit_bd = BoundaryData::from_series(res.measured, mask, est.dirichlet_interp);
    res.predicted = predict_series(res.fit, res.measured.frames.at(0), mask, fit_bd, est,
                                   cfg.frame_dt, cfg.frames);

    res.mae_v = mae_maxnorm(speed_map(res.fit.v), speed_map(v), mask);
    res.mae_d = cfg.d > 0 ? mae_maxnorm(res.fit.d, d, mask) : 0.0;
    return res;
}

void write_demo2d(const Demo2dResult& r, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto under = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    std::vector<std::string> artifacts;

    write_series(r.measured, under("measured.json"));
    write_series(r.predicted, under("predicted.json"));
    write_series(wrap_map(speed_map(r.fit.v), "est_speed"), under("est_speed.json"));
    write_series(wrap_map(r.fit.d, "est_d"), under("est_d.json"));
    artifacts.insert(artifacts.end(),
                     {"measured.json", "measured.raw", "predicted.json", "predicted.raw",
                      "est_speed.json", "est_speed.raw", "est_d.json", "est_d.raw"});

    // Shared gray range so the two strips are directly comparable.
    double hi = 0.0;
    for (const VolumeSeries* s : {&r.measured, &r.predicted})
        for (const ScalarField& f : s->frames)
            for (double x : f.a) hi = std::max(hi, x);
    int mid = r.cfg.nz / 2;
    for (std::size_t i = 0; i < r.measured.frame_count(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%02zu", i);
        export_slice_pgm(r.measured.frames[i], 2, mid, 0.0, hi,
                         under(std::string("measured_f") + buf + ".pgm"));
        export_slice_pgm(r.predicted.frames[i], 2, mid, 0.0, hi,
                         under(std::string("predicted_f") + buf + ".pgm"));
        artifacts.push_back(std::string("measured_f") + buf + ".pgm");
        artifacts.push_back(std::string("predicted_f") + buf + ".pgm");
    }

    std::vector<std::vector<CsvCell>> loss_rows;
    for (std::size_t i = 0; i < r.fit.loss_history.size(); ++i) {
        const LossBreakdown& b = r.fit.loss_history[i];
        loss_rows.push_back({(double)i, b.l_cc, b.l_as_v, b.l_as_d, b.total});
    }
    export_csv(under("loss.csv"), {"iter", "l_cc", "l_as_v", "l_as_d", "total"}, loss_rows);
    artifacts.push_back("loss.csv");

    nlohmann::json manifest{{"demo", "constant-field slab"},
                            {"config", demo2d_config_json(r.cfg)},
                            {"mae_v", r.mae_v},
                            {"mae_d", r.mae_d},
                            {"iterations", r.fit.iterations},
                            {"converged", r.fit.converged},
                            {"artifacts", artifacts}};
    std::ofstream f(under("manifest.json"));
    if (!f) throw std::runtime_error("cannot write manifest under " + out_dir);
    f << manifest.dump(2) << "\n";
    if (!f) throw std::runtime_error("short write on manifest under " + out_dir);
}

} // namespace pdeflow
