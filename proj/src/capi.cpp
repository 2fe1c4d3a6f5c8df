#include "pdeflow/pdeflow.h"

#include "data_io.hpp"
#include "demo.hpp"
#include "estimator.hpp"
#include "experiments.hpp"
#include "metrics.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

struct pdeflow_series {
    pdeflow::VolumeSeries s;
};
struct pdeflow_mask {
    pdeflow::DomainMask m;
};
struct pdeflow_fit {
    pdeflow::EstimatorConfig cfg;
    pdeflow::FitResult r;
};

namespace {

thread_local std::string g_last_error;

// Exceptions cross no further than this boundary. io decides whether a
// plain runtime_error means a file problem or an internal bug.
template <typename F>
pdeflow_status guard(bool io, F&& body) {
    try {
        body();
        g_last_error.clear();
        return PDEFLOW_OK;
    } catch (const pdeflow::CflError& e) {
        g_last_error = e.what();
        return PDEFLOW_ERR_NUMERIC;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return PDEFLOW_ERR_INVALID;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return PDEFLOW_ERR_INVALID;
    } catch (const std::domain_error& e) {
        g_last_error = e.what();
        return PDEFLOW_ERR_INVALID;
    } catch (const std::runtime_error& e) {
        g_last_error = e.what();
        return io ? PDEFLOW_ERR_IO : PDEFLOW_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PDEFLOW_ERR_INTERNAL;
    }
}

pdeflow_status invalid(const char* msg) {
    g_last_error = msg;
    return PDEFLOW_ERR_INVALID;
}

char* copy_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

pdeflow::EstimatorConfig parse_estimator_config(const char* config_json) {
    if (!config_json || !*config_json) return pdeflow::EstimatorConfig{};
    return pdeflow::estimator_config_from_json(nlohmann::json::parse(config_json));
}

} // namespace

extern "C" {

const char* pdeflow_version(void) { return "1.0.0"; }

const char* pdeflow_last_error(void) { return g_last_error.c_str(); }

pdeflow_status pdeflow_series_create(int nx, int ny, int nz, double dx, double dy,
                                     double dz, int frames, double dt_s,
                                     const float* data, pdeflow_series** out) {
    if (!data || !out) return invalid("null argument");
    return guard(false, [&] {
        pdeflow::Grid3 g(nx, ny, nz, dx, dy, dz);
        pdeflow::VolumeSeries s;
        s.grid = g;
        s.dt_s = dt_s;
        if (frames < 1) throw std::invalid_argument("frames must be >= 1");
        s.frames.reserve(frames);
        for (int f = 0; f < frames; ++f) {
            pdeflow::ScalarField frame(g);
            const float* src = data + (std::size_t)f * g.size();
            for (std::size_t i = 0; i < g.size(); ++i) frame[i] = src[i];
            s.frames.push_back(std::move(frame));
        }
        s.validate();
        *out = new pdeflow_series{std::move(s)};
    });
}

pdeflow_status pdeflow_series_read(const char* path, pdeflow_series** out) {
    if (!path || !out) return invalid("null argument");
    return guard(true, [&] { *out = new pdeflow_series{pdeflow::read_series(path)}; });
}

pdeflow_status pdeflow_series_write(const pdeflow_series* s, const char* path) {
    if (!s || !path) return invalid("null argument");
    return guard(true, [&] { pdeflow::write_series(s->s, path); });
}

pdeflow_status pdeflow_series_info(const pdeflow_series* s, int* nx, int* ny, int* nz,
                                   double* dx, double* dy, double* dz, int* frames,
                                   double* dt_s) {
    if (!s) return invalid("null argument");
    const pdeflow::Grid3& g = s->s.grid;
    if (nx) *nx = g.nx;
    if (ny) *ny = g.ny;
    if (nz) *nz = g.nz;
    if (dx) *dx = g.dx;
    if (dy) *dy = g.dy;
    if (dz) *dz = g.dz;
    if (frames) *frames = (int)s->s.frame_count();
    if (dt_s) *dt_s = s->s.dt_s;
    g_last_error.clear();
    return PDEFLOW_OK;
}

pdeflow_status pdeflow_series_frame(const pdeflow_series* s, int i, float* out) {
    if (!s || !out) return invalid("null argument");
    if (i < 0 || (std::size_t)i >= s->s.frame_count()) return invalid("frame index out of range");
    const pdeflow::ScalarField& f = s->s.frames[i];
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = (float)f[k];
    g_last_error.clear();
    return PDEFLOW_OK;
}

void pdeflow_series_free(pdeflow_series* s) { delete s; }

pdeflow_status pdeflow_signal_to_concentration(const pdeflow_series* s,
                                               int baseline_frames, double kappa,
                                               pdeflow_series** out) {
    if (!s || !out) return invalid("null argument");
    return guard(false, [&] {
        *out = new pdeflow_series{
            pdeflow::signal_to_concentration(s->s, baseline_frames, kappa)};
    });
}

pdeflow_status pdeflow_add_rician_noise(const pdeflow_series* s, double level,
                                        uint64_t seed, pdeflow_series** out) {
    if (!s || !out) return invalid("null argument");
    return guard(false, [&] {
        *out = new pdeflow_series{pdeflow::add_rician_noise(s->s, level, seed)};
    });
}

pdeflow_status pdeflow_mask_full(int nx, int ny, int nz, double dx, double dy,
                                 double dz, int dirichlet_slabs, pdeflow_mask** out) {
    if (!out) return invalid("null argument");
    return guard(false, [&] {
        pdeflow::Grid3 g(nx, ny, nz, dx, dy, dz);
        *out = new pdeflow_mask{pdeflow::DomainMask::full(g, dirichlet_slabs != 0)};
    });
}

pdeflow_status pdeflow_mask_read(const char* path, pdeflow_mask** out) {
    if (!path || !out) return invalid("null argument");
    return guard(true, [&] { *out = new pdeflow_mask{pdeflow::read_mask(path, true)}; });
}

void pdeflow_mask_free(pdeflow_mask* m) { delete m; }

pdeflow_status pdeflow_fit_run(const pdeflow_series* s, const pdeflow_mask* m,
                               const char* config_json, pdeflow_fit** out) {
    if (!s || !m || !out) return invalid("null argument");
    return guard(false, [&] {
        pdeflow::EstimatorConfig cfg = parse_estimator_config(config_json);
        pdeflow::FitResult r = pdeflow::fit(s->s, m->m, cfg);
        *out = new pdeflow_fit{cfg, std::move(r)};
    });
}

pdeflow_status pdeflow_fit_info(const pdeflow_fit* f, int* nx, int* ny, int* nz,
                                int* iterations, int* converged) {
    if (!f) return invalid("null argument");
    const pdeflow::Grid3& g = f->r.v.grid();
    if (nx) *nx = g.nx;
    if (ny) *ny = g.ny;
    if (nz) *nz = g.nz;
    if (iterations) *iterations = f->r.iterations;
    if (converged) *converged = f->r.converged ? 1 : 0;
    g_last_error.clear();
    return PDEFLOW_OK;
}

pdeflow_status pdeflow_fit_velocity(const pdeflow_fit* f, int axis, double* out) {
    if (!f || !out) return invalid("null argument");
    if (axis < 0 || axis > 2) return invalid("axis must be 0, 1, or 2");
    const pdeflow::ScalarField& c = f->r.v.comp(axis);
    std::memcpy(out, c.a.data(), c.size() * sizeof(double));
    g_last_error.clear();
    return PDEFLOW_OK;
}

pdeflow_status pdeflow_fit_speed(const pdeflow_fit* f, double* out) {
    if (!f || !out) return invalid("null argument");
    return guard(false, [&] {
        pdeflow::ScalarField sp = pdeflow::speed_map(f->r.v);
        std::memcpy(out, sp.a.data(), sp.size() * sizeof(double));
    });
}

pdeflow_status pdeflow_fit_diffusivity(const pdeflow_fit* f, double* out) {
    if (!f || !out) return invalid("null argument");
    std::memcpy(out, f->r.d.a.data(), f->r.d.size() * sizeof(double));
    g_last_error.clear();
    return PDEFLOW_OK;
}

pdeflow_status pdeflow_fit_manifest(const pdeflow_fit* f, char** out) {
    if (!f || !out) return invalid("null argument");
    return guard(false, [&] {
        std::string js = pdeflow::fit_manifest_json(f->cfg, f->r, {});
        char* p = copy_string(js);
        if (!p) throw std::runtime_error("out of memory");
        *out = p;
    });
}

void pdeflow_fit_free(pdeflow_fit* f) { delete f; }

pdeflow_status pdeflow_simulate(const char* mode, const char* config_json,
                                const char* out_dir) {
    if (!mode || !out_dir) return invalid("null argument");
    return guard(false, [&] {
        std::string m = mode;
        bool with_v = m == "advection" || m == "advdiff";
        bool with_d = m == "diffusion" || m == "advdiff";
        if (!with_v && !with_d)
            throw std::invalid_argument("mode must be advection, diffusion, or advdiff");
        pdeflow::Recipe base_recipe =
            with_v ? pdeflow::Recipe::AdvViaAdv : pdeflow::Recipe::DiffViaDiff;
        nlohmann::json base =
            pdeflow::experiment_config_json(pdeflow::recipe_defaults(base_recipe));
        if (config_json && *config_json) base.update(nlohmann::json::parse(config_json), true);
        pdeflow::ExperimentConfig cfg = pdeflow::experiment_config_from_json(base);
        pdeflow::write_simulation(pdeflow::simulate_series(cfg, with_v, with_d), cfg, m,
                                  out_dir);
    });
}

pdeflow_status pdeflow_demo2d(const char* config_json, const char* out_dir) {
    if (!out_dir) return invalid("null argument");
    return guard(false, [&] {
        pdeflow::Demo2dConfig cfg;
        if (config_json && *config_json)
            cfg = pdeflow::demo2d_config_from_json(nlohmann::json::parse(config_json));
        pdeflow::write_demo2d(pdeflow::run_demo2d(cfg), out_dir);
    });
}

pdeflow_status pdeflow_region_metrics_csv(const pdeflow_series* const* maps,
                                          const char* const* names, int n_maps,
                                          const pdeflow_mask* lesion,
                                          const pdeflow_mask* domain, int midline_axis,
                                          int midline_index, int welch,
                                          const char* csv_path) {
    if (!maps || !names || !lesion || !domain || !csv_path) return invalid("null argument");
    if (n_maps < 1) return invalid("need at least one map");
    return guard(true, [&] {
        pdeflow::RegionPair rp = pdeflow::mirror_mask(lesion->m.inside, midline_axis,
                                                      midline_index, domain->m);
        std::vector<pdeflow::MetricRow> rows;
        for (int i = 0; i < n_maps; ++i) {
            if (!maps[i] || !names[i]) throw std::invalid_argument("null map or name");
            rows.push_back(pdeflow::region_metrics(names[i], maps[i]->s.frames.at(0), rp,
                                                   welch != 0));
        }
        pdeflow::write_metric_csv(csv_path, rows);
    });
}

pdeflow_status pdeflow_feature_maps(const pdeflow_series* vx, const pdeflow_series* vy,
                                    const pdeflow_series* vz, const pdeflow_series* d,
                                    double char_len, const char* out_dir) {
    if (!vx || !vy || !vz || !d || !out_dir) return invalid("null argument");
    return guard(true, [&] {
        pdeflow::VectorField v(vx->s.grid);
        v.x = vx->s.frames.at(0);
        v.y = vy->s.frames.at(0);
        v.z = vz->s.frames.at(0);
        if (!v.x.grid.same_shape(v.y.grid) || !v.x.grid.same_shape(v.z.grid) ||
            !v.x.grid.same_shape(d->s.grid))
            throw std::invalid_argument("component grids do not match");
        pdeflow::write_feature_maps(v, d->s.frames.at(0), char_len, out_dir);
    });
}

pdeflow_status pdeflow_experiment_run(const char* recipe_name, const char* config_json,
                                      const char* out_dir) {
    if (!out_dir) return invalid("null argument");
    return guard(false, [&] {
        nlohmann::json user = nlohmann::json::object();
        if (config_json && *config_json) user = nlohmann::json::parse(config_json);
        std::string name;
        if (recipe_name && *recipe_name)
            name = recipe_name;
        else if (user.contains("recipe"))
            name = user.at("recipe").get<std::string>();
        else
            throw std::invalid_argument("no recipe named");
        nlohmann::json base =
            pdeflow::experiment_config_json(pdeflow::recipe_defaults(pdeflow::recipe_from_name(name)));
        base.update(user, true);
        base["recipe"] = name;
        pdeflow::ExperimentConfig cfg = pdeflow::experiment_config_from_json(base);
        cfg.validate();
        pdeflow::write_experiment(pdeflow::run_experiment(cfg), out_dir);
    });
}

pdeflow_status pdeflow_experiment_rerun(const char* manifest_path, const char* out_dir) {
    if (!manifest_path || !out_dir) return invalid("null argument");
    return guard(true, [&] { pdeflow::rerun_manifest(manifest_path, out_dir); });
}

void pdeflow_string_free(char* s) { std::free(s); }

} // extern "C"
