#include "experiments.hpp"

#include "data_io.hpp"
#include "metrics.hpp"
#include "rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace pdeflow {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double median_in_mask(const ScalarField& f, const DomainMask& m) {
    std::vector<double> v;
    v.reserve(m.n_inside);
    for (std::size_t i = 0; i < f.size(); ++i)
        if (m.is_inside(i)) v.push_back(f[i]);
    if (v.empty()) throw std::invalid_argument("median_in_mask: empty mask");
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

double max_in_mask(const ScalarField& f, const DomainMask& m) {
    double mx = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (m.is_inside(i)) mx = std::max(mx, f[i]);
    return mx;
}

double scale_ratio(double numer, double denom) {
    if (denom > 0.0) return numer / denom;
    return numer > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

Mode fit_mode(Recipe r) {
    switch (r) {
    case Recipe::AdvViaAdv:
    case Recipe::NoiseLadder: return Mode::AdvectionOnly;
    case Recipe::DiffViaDiff: return Mode::DiffusionOnly;
    default: return Mode::AdvectionDiffusion;
    }
}

bool advection_data(Recipe r) { return r != Recipe::DiffViaDiff && r != Recipe::DiffViaAdvDiff; }

std::string level_tag(double level) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "l%02d", (int)std::lround(level * 100.0));
    return buf;
}

ScalarField single_frame(const VolumeSeries& s) { return s.frames.at(0); }

VolumeSeries wrap_frame(const ScalarField& f, const std::string& name) {
    VolumeSeries s;
    s.grid = f.grid;
    s.dt_s = 1.0;
    s.frames = {f};
    s.meta["content"] = name;
    return s;
}

} // namespace

Recipe recipe_from_name(const std::string& name) {
    if (name == "adv-via-adv") return Recipe::AdvViaAdv;
    if (name == "diff-via-diff") return Recipe::DiffViaDiff;
    if (name == "adv-via-advdiff") return Recipe::AdvViaAdvDiff;
    if (name == "diff-via-advdiff") return Recipe::DiffViaAdvDiff;
    if (name == "noise-ladder") return Recipe::NoiseLadder;
    throw std::invalid_argument("unknown recipe: " + name);
}

std::string recipe_name(Recipe r) {
    switch (r) {
    case Recipe::AdvViaAdv: return "adv-via-adv";
    case Recipe::DiffViaDiff: return "diff-via-diff";
    case Recipe::AdvViaAdvDiff: return "adv-via-advdiff";
    case Recipe::DiffViaAdvDiff: return "diff-via-advdiff";
    default: return "noise-ladder";
    }
}

void ExperimentConfig::validate() const {
    require(nx >= 4 && ny >= 4 && nz >= 1, "experiment: grid too small");
    require(sx > 0 && sy > 0 && sz > 0, "experiment: spacing must be positive");
    require(frames >= 2, "experiment: need at least two transitions");
    require(frame_dt > 0 && sim_dt > 0, "experiment: time steps must be positive");
    require(sim_dt <= frame_dt, "experiment: sim_dt above frame_dt");
    require(v_max >= 0 && d_max > 0, "experiment: bad truth scales");
    require(modes >= 1 && freq_max >= 1, "experiment: bad band limit");
    require(amp > 0, "experiment: amp must be positive");
    require(workers >= 1, "experiment: workers must be positive");
    if (recipe == Recipe::NoiseLadder) {
        require(!noise_levels.empty(), "experiment: empty noise ladder");
        for (double l : noise_levels)
            require(l >= 0 && l <= 0.5, "experiment: noise level out of range");
    }
    est.validate();
}

ExperimentConfig recipe_defaults(Recipe r) {
    ExperimentConfig c;
    c.recipe = r;
    c.est.momentum = 0.5;
    c.est.integrator = Integrator::RK4;
    bool adv = advection_data(r);
    if (adv) {
        c.frame_dt = 0.2;
        c.sim_dt = 0.05;
        c.est.init_scale = 0.1;
        c.est.max_iters = 2000;
    } else {
        c.frame_dt = 15.0;
        c.sim_dt = 2.5;
        c.est.init_scale = 0.01;
        c.est.max_iters = 1200;
    }
    if (r == Recipe::AdvViaAdvDiff || r == Recipe::DiffViaAdvDiff)
        c.est.max_iters = 800; // only the scale ratios matter, not full recovery
    if (r == Recipe::NoiseLadder) {
        c.nx = c.ny = c.nz = 16; // the ladder repeats the fit per level
        c.freq_max = 2;
        c.est.max_iters = 1200;
    }
    return c;
}

nlohmann::json experiment_config_json(const ExperimentConfig& cfg) {
    return nlohmann::json{{"recipe", recipe_name(cfg.recipe)},
                          {"nx", cfg.nx},
                          {"ny", cfg.ny},
                          {"nz", cfg.nz},
                          {"sx", cfg.sx},
                          {"sy", cfg.sy},
                          {"sz", cfg.sz},
                          {"frames", cfg.frames},
                          {"frame_dt", cfg.frame_dt},
                          {"sim_dt", cfg.sim_dt},
                          {"v_max", cfg.v_max},
                          {"d_max", cfg.d_max},
                          {"modes", cfg.modes},
                          {"freq_max", cfg.freq_max},
                          {"amp", cfg.amp},
                          {"noise_levels", cfg.noise_levels},
                          {"workers", cfg.workers},
                          {"seed", cfg.seed},
                          {"estimator", estimator_config_json(cfg.est)}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{
        "recipe", "nx", "ny", "nz", "sx", "sy", "sz", "frames", "frame_dt",
        "sim_dt", "v_max", "d_max", "modes", "freq_max", "amp",
        "noise_levels", "workers", "seed", "estimator"};
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw std::invalid_argument("unknown experiment config key: " + item.key());
    ExperimentConfig c;
    if (j.contains("recipe")) c.recipe = recipe_from_name(j.at("recipe").get<std::string>());
    c.nx = j.value("nx", c.nx);
    c.ny = j.value("ny", c.ny);
    c.nz = j.value("nz", c.nz);
    c.sx = j.value("sx", c.sx);
    c.sy = j.value("sy", c.sy);
    c.sz = j.value("sz", c.sz);
    c.frames = j.value("frames", c.frames);
    c.frame_dt = j.value("frame_dt", c.frame_dt);
    c.sim_dt = j.value("sim_dt", c.sim_dt);
    c.v_max = j.value("v_max", c.v_max);
    c.d_max = j.value("d_max", c.d_max);
    c.modes = j.value("modes", c.modes);
    c.freq_max = j.value("freq_max", c.freq_max);
    c.amp = j.value("amp", c.amp);
    c.noise_levels = j.value("noise_levels", c.noise_levels);
    c.workers = j.value("workers", c.workers);
    c.seed = j.value("seed", c.seed);
    if (j.contains("estimator")) c.est = estimator_config_from_json(j.at("estimator"));
    return c;
}

ScalarField speed_map(const VectorField& v) {
    ScalarField s(v.grid());
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = std::sqrt(v.x[i] * v.x[i] + v.y[i] * v.y[i] + v.z[i] * v.z[i]);
    return s;
}

SimulatedSeries simulate_series(const ExperimentConfig& cfg, bool with_advection,
                                bool with_diffusion) {
    cfg.validate();
    SimulatedSeries out;
    Grid3 g(cfg.nx, cfg.ny, cfg.nz, cfg.sx, cfg.sy, cfg.sz);
    DomainMask mask = DomainMask::full(g, false);
    out.truth = synth_truth(g, mask, Rng::mix(cfg.seed, 0x71), cfg.v_max, cfg.d_max,
                            cfg.modes, cfg.freq_max);
    out.c0 = synth_initial(g, mask, Rng::mix(cfg.seed, 0x72), cfg.amp);

    VectorField v_sim(g);
    ScalarField d_sim(g);
    if (with_advection) v_sim = out.truth.v;
    if (with_diffusion) d_sim = out.truth.d;

    SolverConfig sc;
    sc.dt = cfg.sim_dt;
    sc.integrator = cfg.est.integrator;
    sc.face_d = cfg.est.face_d;
    sc.dirichlet_interp = cfg.est.dirichlet_interp;
    BoundaryData bd =
        BoundaryData::from_series(wrap_frame(out.c0, "c0"), mask, sc.dirichlet_interp);
    out.clean = integrate(out.c0, v_sim, d_sim, mask, bd, sc,
                          cfg.frame_dt * cfg.frames, cfg.frame_dt);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult res;
    res.cfg = cfg;

    Grid3 g(cfg.nx, cfg.ny, cfg.nz, cfg.sx, cfg.sy, cfg.sz);
    DomainMask mask = DomainMask::full(g, false);
    bool adv = advection_data(cfg.recipe);
    SimulatedSeries sim = simulate_series(cfg, adv, !adv);
    res.truth = sim.truth;
    VolumeSeries& clean = sim.clean;

    std::vector<double> levels =
        cfg.recipe == Recipe::NoiseLadder ? cfg.noise_levels : std::vector<double>{0.0};

    EstimatorConfig est = cfg.est;
    est.mode = fit_mode(cfg.recipe);
    est.dt = cfg.sim_dt;
    est.rng_seed = Rng::mix(cfg.seed, 0x80);

    ScalarField truth_speed = speed_map(res.truth.v);

    res.runs.resize(levels.size());
    std::vector<std::exception_ptr> errors(levels.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= levels.size()) return;
            try {
                RecoveryOutcome& out = res.runs[i];
                out.noise_level = levels[i];
                out.measured = levels[i] > 0.0
                                   ? add_rician_noise(clean, levels[i], Rng::mix(cfg.seed, 0x90 + i))
                                   : clean;
                out.fit = fit(out.measured, mask, est);
                out.mae_v = mae_maxnorm(speed_map(out.fit.v), truth_speed, mask);
                out.mae_d = mae_maxnorm(out.fit.d, res.truth.d, mask);
                ScalarField est_speed = speed_map(out.fit.v);
                out.ratio_d_over_v = scale_ratio(median_in_mask(out.fit.d, mask),
                                                 kCharLenMm * max_in_mask(est_speed, mask));
                out.ratio_v_over_d = scale_ratio(median_in_mask(est_speed, mask) * kCharLenMm,
                                                 max_in_mask(out.fit.d, mask));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    int n_workers = std::min<int>(cfg.workers, (int)levels.size());
    if (n_workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return res;
}

void write_simulation(const SimulatedSeries& s, const ExperimentConfig& cfg,
                      const std::string& mode_tag, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto under = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    write_series(s.clean, under("measured.json"));
    write_series(wrap_frame(speed_map(s.truth.v), "truth_speed"), under("truth_speed.json"));
    write_series(wrap_frame(s.truth.d, "truth_d"), under("truth_d.json"));
    nlohmann::json manifest{{"simulate", mode_tag},
                            {"config", experiment_config_json(cfg)},
                            {"artifacts",
                             {"measured.json", "measured.raw", "truth_speed.json",
                              "truth_speed.raw", "truth_d.json", "truth_d.raw"}}};
    std::ofstream f(under("manifest.json"));
    if (!f) throw std::runtime_error("cannot write manifest under " + out_dir);
    f << manifest.dump(2) << "\n";
    if (!f) throw std::runtime_error("short write on manifest under " + out_dir);
}

void write_feature_maps(const VectorField& v, const ScalarField& d, double char_len,
                        const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto under = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    FeatureMaps maps = feature_maps(v, d, char_len);

    long long missing_pe = 0, missing_inv = 0;
    double pe_max = 0.0;
    ScalarField pe = maps.peclet, inv = maps.inv_peclet;
    for (std::size_t i = 0; i < pe.size(); ++i) {
        if (std::isfinite(pe[i])) pe_max = std::max(pe_max, pe[i]);
        else { pe[i] = 0.0; ++missing_pe; }
        if (!std::isfinite(inv[i])) { inv[i] = 0.0; ++missing_inv; }
    }

    auto emit = [&](const ScalarField& f, const std::string& name, long long missing) {
        VolumeSeries s = wrap_frame(f, name);
        if (missing > 0) s.meta["missing"] = std::to_string(missing);
        write_series(s, under(name + ".json"));
    };
    emit(maps.v_mag, "v_mag", 0);
    emit(maps.v_rgb[0], "v_rgb_x", 0);
    emit(maps.v_rgb[1], "v_rgb_y", 0);
    emit(maps.v_rgb[2], "v_rgb_z", 0);
    emit(d, "d", 0);
    emit(pe, "peclet", missing_pe);
    emit(inv, "inv_peclet", missing_inv);

    int mid = v.grid().nz / 2;
    double vm_max = *std::max_element(maps.v_mag.a.begin(), maps.v_mag.a.end());
    export_slice_pgm(maps.v_mag, 2, mid, 0.0, vm_max > 0 ? vm_max : 1.0, under("v_mag.pgm"));
    export_slice_pgm(pe, 2, mid, 0.0, pe_max > 0 ? pe_max : 1.0, under("peclet.pgm"));

    // Histogram over the finite Peclet values, 64 equal bins up to the max.
    const int n_bins = 64;
    std::vector<long long> counts(n_bins, 0);
    double width = pe_max > 0 ? pe_max / n_bins : 1.0;
    for (std::size_t i = 0; i < maps.peclet.size(); ++i) {
        double x = maps.peclet[i];
        if (!std::isfinite(x)) continue;
        int b = std::min(n_bins - 1, (int)(x / width));
        ++counts[b];
    }
    std::vector<std::vector<CsvCell>> rows;
    for (int b = 0; b < n_bins; ++b)
        rows.push_back({b * width, (b + 1) * width, (double)counts[b], (double)missing_pe});
    export_csv(under("peclet_hist.csv"), {"bin_lo", "bin_hi", "count", "n_infinite"}, rows);
}

void write_experiment(const ExperimentResult& r, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto under = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    std::vector<std::string> artifacts;

    write_series(wrap_frame(speed_map(r.truth.v), "truth_speed"), under("truth_speed.json"));
    write_series(wrap_frame(r.truth.d, "truth_d"), under("truth_d.json"));
    artifacts.insert(artifacts.end(), {"truth_speed.json", "truth_speed.raw",
                                       "truth_d.json", "truth_d.raw"});

    nlohmann::json scores = nlohmann::json::array();
    std::vector<std::vector<CsvCell>> score_rows;
    for (const RecoveryOutcome& run : r.runs) {
        const std::string tag = level_tag(run.noise_level);
        write_series(run.measured, under("measured_" + tag + ".json"));
        write_series(wrap_frame(speed_map(run.fit.v), "est_speed"),
                     under("est_speed_" + tag + ".json"));
        write_series(wrap_frame(run.fit.d, "est_d"), under("est_d_" + tag + ".json"));
        for (const char* stem : {"measured_", "est_speed_", "est_d_"}) {
            artifacts.push_back(stem + tag + ".json");
            artifacts.push_back(stem + tag + ".raw");
        }

        std::vector<std::vector<CsvCell>> loss_rows;
        for (std::size_t i = 0; i < run.fit.loss_history.size(); ++i) {
            const LossBreakdown& b = run.fit.loss_history[i];
            loss_rows.push_back({(double)i, b.l_cc, b.l_as_v, b.l_as_d, b.total});
        }
        export_csv(under("loss_" + tag + ".csv"),
                   {"iter", "l_cc", "l_as_v", "l_as_d", "total"}, loss_rows);
        artifacts.push_back("loss_" + tag + ".csv");

        nlohmann::json s{{"noise_level", run.noise_level},
                         {"mae_v", run.mae_v},
                         {"mae_d", run.mae_d},
                         {"iterations", run.fit.iterations},
                         {"converged", run.fit.converged}};
        if (std::isfinite(run.ratio_d_over_v)) s["ratio_d_over_v"] = run.ratio_d_over_v;
        if (std::isfinite(run.ratio_v_over_d)) s["ratio_v_over_d"] = run.ratio_v_over_d;
        scores.push_back(s);
        score_rows.push_back({run.noise_level, run.mae_v, run.mae_d});
    }
    export_csv(under("scores.csv"), {"noise_level", "mae_v", "mae_d"}, score_rows);
    artifacts.push_back("scores.csv");

    nlohmann::json manifest{{"experiment", recipe_name(r.cfg.recipe)},
                            {"config", experiment_config_json(r.cfg)},
                            {"scores", scores},
                            {"artifacts", artifacts}};
    std::ofstream f(under("manifest.json"));
    if (!f) throw std::runtime_error("cannot write manifest under " + out_dir);
    f << manifest.dump(2) << "\n";
    if (!f) throw std::runtime_error("short write on manifest under " + out_dir);
}

ExperimentResult rerun_manifest(const std::string& manifest_path, const std::string& out_dir) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("cannot read manifest: " + manifest_path);
    nlohmann::json j = nlohmann::json::parse(f);
    ExperimentResult res = run_experiment(experiment_config_from_json(j.at("config")));
    write_experiment(res, out_dir);
    return res;
}

} // namespace pdeflow
