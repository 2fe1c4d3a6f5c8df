#include <pdeflow/pdeflow.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(pdeflow_status st) {
    if (st == PDEFLOW_OK) return 0;
    std::fprintf(stderr, "pdeflow: %s\n", pdeflow_last_error());
    return st == PDEFLOW_ERR_NUMERIC ? 3 : 2;
}

struct SeriesDeleter {
    void operator()(pdeflow_series* s) const { pdeflow_series_free(s); }
};
struct MaskDeleter {
    void operator()(pdeflow_mask* m) const { pdeflow_mask_free(m); }
};
struct FitDeleter {
    void operator()(pdeflow_fit* f) const { pdeflow_fit_free(f); }
};
using SeriesPtr = std::unique_ptr<pdeflow_series, SeriesDeleter>;
using MaskPtr = std::unique_ptr<pdeflow_mask, MaskDeleter>;
using FitPtr = std::unique_ptr<pdeflow_fit, FitDeleter>;

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw CLI::ValidationError("--config", "cannot open " + path);
    try {
        return json::parse(f);
    } catch (const std::exception& e) {
        throw CLI::ValidationError("--config", e.what());
    }
}

// key=value with dotted paths; the value is JSON when it parses as JSON
// (numbers, arrays, booleans) and a bare string otherwise.
void apply_sets(json& cfg, const std::vector<std::string>& sets) {
    for (const std::string& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw CLI::ValidationError("--set", "expected key=value, got " + kv);
        std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        json parsed;
        try {
            parsed = json::parse(val);
        } catch (const std::exception&) {
            parsed = val;
        }
        json* node = &cfg;
        std::size_t pos = 0;
        for (;;) {
            auto dot = key.find('.', pos);
            std::string part = key.substr(pos, dot - pos);
            if (part.empty()) throw CLI::ValidationError("--set", "empty path element in " + kv);
            if (dot == std::string::npos) {
                (*node)[part] = parsed;
                break;
            }
            node = &(*node)[part];
            pos = dot + 1;
        }
    }
}

int read_series(const std::string& path, SeriesPtr& out) {
    pdeflow_series* raw = nullptr;
    pdeflow_status st = pdeflow_series_read(path.c_str(), &raw);
    out.reset(raw);
    return exit_code(st);
}

std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

int write_map(const pdeflow_series* like, const std::vector<double>& values,
              const std::string& path) {
    int nx, ny, nz, frames;
    double dx, dy, dz, dt;
    pdeflow_status st = pdeflow_series_info(like, &nx, &ny, &nz, &dx, &dy, &dz, &frames, &dt);
    if (st != PDEFLOW_OK) return exit_code(st);
    std::vector<float> f32(values.begin(), values.end());
    pdeflow_series* map = nullptr;
    st = pdeflow_series_create(nx, ny, nz, dx, dy, dz, 1, 1.0, f32.data(), &map);
    if (st != PDEFLOW_OK) return exit_code(st);
    SeriesPtr holder(map);
    return exit_code(pdeflow_series_write(map, path.c_str()));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"advection-diffusion field estimation from concentration time series"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    long long seed = -1;
    std::vector<std::string> sets;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed, "override the config seed");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--set", sets, "override a config key, e.g. estimator.lr=0.002");
    };

    auto* c_demo = app.add_subcommand("demo2d", "constant-field slab demo with PGM strips");
    add_common(c_demo);

    auto* c_sim = app.add_subcommand("simulate", "generate a synthetic series from random truth");
    std::string sim_mode = "advection";
    c_sim->add_option("--mode", sim_mode, "advection, diffusion, or advdiff");
    add_common(c_sim);

    auto* c_noise = app.add_subcommand("noise", "apply a Rician noise ladder to a series");
    std::string in_path;
    c_noise->add_option("--in", in_path, "input series header")->required();
    add_common(c_noise);

    auto* c_est = app.add_subcommand("estimate", "fit velocity and diffusivity to a series");
    std::string mask_path, est_mode;
    c_est->add_option("--in", in_path, "input series header")->required();
    c_est->add_option("--mask", mask_path, "domain mask header (default: whole grid)");
    c_est->add_option("--mode", est_mode,
                      "advection_only, diffusion_only, or advection_diffusion");
    add_common(c_est);

    auto* c_metrics = app.add_subcommand("metrics", "lesion vs mirrored-region statistics");
    std::vector<std::string> map_paths;
    std::string lesion_path, domain_path;
    int midline_axis = 0, midline_index = -1;
    bool welch = false;
    c_metrics->add_option("--map", map_paths, "map series (repeatable)")->required();
    c_metrics->add_option("--lesion", lesion_path, "lesion mask header")->required();
    c_metrics->add_option("--domain", domain_path, "domain mask header")->required();
    c_metrics->add_option("--axis", midline_axis, "midline axis, 0 or 1");
    c_metrics->add_option("--midline", midline_index, "midline plane index (default dim/2)");
    c_metrics->add_flag("--welch", welch, "Welch t instead of pooled");
    add_common(c_metrics);

    auto* c_conv = app.add_subcommand("convert", "scanner signal to concentration");
    int baseline_frames = 1;
    double kappa = 1.0;
    c_conv->add_option("--in", in_path, "input signal series header")->required();
    c_conv->add_option("--baseline", baseline_frames, "frames averaged into the baseline");
    c_conv->add_option("--kappa", kappa, "proportionality constant");
    add_common(c_conv);

    auto* c_feat = app.add_subcommand("featuremaps", "speed, orientation, and Peclet maps");
    std::string vx_path, vy_path, vz_path, d_path, from_dir;
    double char_len = 1.0;
    c_feat->add_option("--vx", vx_path, "x velocity map");
    c_feat->add_option("--vy", vy_path, "y velocity map");
    c_feat->add_option("--vz", vz_path, "z velocity map");
    c_feat->add_option("--d", d_path, "diffusivity map");
    c_feat->add_option("--from", from_dir, "directory holding est_v*.json and est_d.json");
    c_feat->add_option("--char-len", char_len, "characteristic length in mm");
    add_common(c_feat);

    auto* c_exp = app.add_subcommand("experiment", "run a named synthetic protocol");
    std::string recipe, rerun_manifest;
    c_exp->add_option("--recipe", recipe,
                      "adv-via-adv, diff-via-diff, adv-via-advdiff, diff-via-advdiff, "
                      "or noise-ladder");
    c_exp->add_option("--rerun", rerun_manifest, "re-execute a written manifest");
    add_common(c_exp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        json cfg = load_config_file(config_path);
        apply_sets(cfg, sets);

        if (app.got_subcommand(c_demo)) {
            if (seed >= 0) cfg["seed"] = (uint64_t)seed;
            return exit_code(pdeflow_demo2d(cfg.dump().c_str(), out_dir.c_str()));
        }

        if (app.got_subcommand(c_sim)) {
            if (seed >= 0) cfg["seed"] = (uint64_t)seed;
            return exit_code(pdeflow_simulate(sim_mode.c_str(), cfg.dump().c_str(),
                                              out_dir.c_str()));
        }

        if (app.got_subcommand(c_noise)) {
            SeriesPtr in;
            if (int rc = read_series(in_path, in)) return rc;
            std::vector<double> levels = {0.02, 0.04, 0.06, 0.08, 0.10};
            if (cfg.contains("levels")) levels = cfg.at("levels").get<std::vector<double>>();
            uint64_t s = seed >= 0 ? (uint64_t)seed : cfg.value("seed", (uint64_t)1);
            fs::create_directories(out_dir);
            for (double level : levels) {
                pdeflow_series* noisy = nullptr;
                pdeflow_status st = pdeflow_add_rician_noise(in.get(), level, s, &noisy);
                if (st != PDEFLOW_OK) return exit_code(st);
                SeriesPtr holder(noisy);
                char tag[16];
                std::snprintf(tag, sizeof tag, "l%02d", (int)std::lround(level * 100));
                std::string path = (fs::path(out_dir) / (std::string("noisy_") + tag + ".json")).string();
                st = pdeflow_series_write(noisy, path.c_str());
                if (st != PDEFLOW_OK) return exit_code(st);
                std::printf("%s\n", path.c_str());
            }
            return 0;
        }

        if (app.got_subcommand(c_est)) {
            SeriesPtr in;
            if (int rc = read_series(in_path, in)) return rc;
            int nx, ny, nz, frames;
            double dx, dy, dz, dt;
            exit_code(pdeflow_series_info(in.get(), &nx, &ny, &nz, &dx, &dy, &dz, &frames, &dt));
            MaskPtr mask;
            {
                pdeflow_mask* raw = nullptr;
                pdeflow_status st =
                    mask_path.empty()
                        ? pdeflow_mask_full(nx, ny, nz, dx, dy, dz, 0, &raw)
                        : pdeflow_mask_read(mask_path.c_str(), &raw);
                mask.reset(raw);
                if (st != PDEFLOW_OK) return exit_code(st);
            }
            if (!est_mode.empty()) cfg["mode"] = est_mode;
            if (seed >= 0) cfg["rng_seed"] = (uint64_t)seed;
            pdeflow_fit* raw_fit = nullptr;
            pdeflow_status st =
                pdeflow_fit_run(in.get(), mask.get(), cfg.dump().c_str(), &raw_fit);
            if (st != PDEFLOW_OK) return exit_code(st);
            FitPtr fit(raw_fit);

            std::size_t n = (std::size_t)nx * ny * nz;
            std::vector<double> buf(n);
            fs::create_directories(out_dir);
            auto under = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
            const char* comp_names[3] = {"est_vx.json", "est_vy.json", "est_vz.json"};
            for (int axis = 0; axis < 3; ++axis) {
                st = pdeflow_fit_velocity(fit.get(), axis, buf.data());
                if (st != PDEFLOW_OK) return exit_code(st);
                if (int rc = write_map(in.get(), buf, under(comp_names[axis]))) return rc;
            }
            st = pdeflow_fit_speed(fit.get(), buf.data());
            if (st != PDEFLOW_OK) return exit_code(st);
            if (int rc = write_map(in.get(), buf, under("est_speed.json"))) return rc;
            st = pdeflow_fit_diffusivity(fit.get(), buf.data());
            if (st != PDEFLOW_OK) return exit_code(st);
            if (int rc = write_map(in.get(), buf, under("est_d.json"))) return rc;

            char* manifest = nullptr;
            st = pdeflow_fit_manifest(fit.get(), &manifest);
            if (st != PDEFLOW_OK) return exit_code(st);
            std::string mtext = manifest;
            pdeflow_string_free(manifest);
            std::ofstream mf(under("manifest.json"));
            mf << mtext << "\n";
            if (!mf) {
                std::fprintf(stderr, "pdeflow: cannot write manifest\n");
                return 2;
            }

            json mj = json::parse(mtext);
            std::ofstream lf(under("loss.csv"));
            lf << "iter,l_cc,l_as_v,l_as_d,total\n";
            const json& hist = mj.at("loss_history");
            for (std::size_t i = 0; i < hist.size(); ++i)
                lf << i << ',' << g9(hist[i].at("l_cc").get<double>()) << ','
                   << g9(hist[i].at("l_as_v").get<double>()) << ','
                   << g9(hist[i].at("l_as_d").get<double>()) << ','
                   << g9(hist[i].at("total").get<double>()) << '\n';
            if (!lf) {
                std::fprintf(stderr, "pdeflow: cannot write loss.csv\n");
                return 2;
            }
            std::printf("iterations=%d converged=%d\n", mj.at("iterations").get<int>(),
                        (int)mj.at("converged").get<bool>());
            return 0;
        }

        if (app.got_subcommand(c_metrics)) {
            std::vector<SeriesPtr> maps;
            std::vector<pdeflow_series*> raw_maps;
            std::vector<std::string> names;
            for (const std::string& p : map_paths) {
                SeriesPtr s;
                if (int rc = read_series(p, s)) return rc;
                raw_maps.push_back(s.get());
                maps.push_back(std::move(s));
                names.push_back(fs::path(p).stem().string());
            }
            MaskPtr lesion, domain;
            {
                pdeflow_mask* raw = nullptr;
                pdeflow_status st = pdeflow_mask_read(lesion_path.c_str(), &raw);
                lesion.reset(raw);
                if (st != PDEFLOW_OK) return exit_code(st);
                raw = nullptr;
                st = pdeflow_mask_read(domain_path.c_str(), &raw);
                domain.reset(raw);
                if (st != PDEFLOW_OK) return exit_code(st);
            }
            if (midline_index < 0) {
                int nx, ny, nz, frames;
                double dx, dy, dz, dt;
                exit_code(pdeflow_series_info(raw_maps[0], &nx, &ny, &nz, &dx, &dy, &dz,
                                              &frames, &dt));
                midline_index = (midline_axis == 0 ? nx : ny) / 2;
            }
            std::vector<const char*> cnames;
            for (const std::string& n : names) cnames.push_back(n.c_str());
            fs::create_directories(out_dir);
            std::string csv = (fs::path(out_dir) / "metrics.csv").string();
            pdeflow_status st = pdeflow_region_metrics_csv(
                raw_maps.data(), cnames.data(), (int)raw_maps.size(), lesion.get(),
                domain.get(), midline_axis, midline_index, welch ? 1 : 0, csv.c_str());
            if (st != PDEFLOW_OK) return exit_code(st);
            std::printf("%s\n", csv.c_str());
            return 0;
        }

        if (app.got_subcommand(c_conv)) {
            SeriesPtr in;
            if (int rc = read_series(in_path, in)) return rc;
            pdeflow_series* conc = nullptr;
            pdeflow_status st =
                pdeflow_signal_to_concentration(in.get(), baseline_frames, kappa, &conc);
            if (st != PDEFLOW_OK) return exit_code(st);
            SeriesPtr holder(conc);
            fs::create_directories(out_dir);
            std::string path = (fs::path(out_dir) / "concentration.json").string();
            st = pdeflow_series_write(conc, path.c_str());
            if (st != PDEFLOW_OK) return exit_code(st);
            std::printf("%s\n", path.c_str());
            return 0;
        }

        if (app.got_subcommand(c_feat)) {
            if (!from_dir.empty()) {
                if (vx_path.empty()) vx_path = (fs::path(from_dir) / "est_vx.json").string();
                if (vy_path.empty()) vy_path = (fs::path(from_dir) / "est_vy.json").string();
                if (vz_path.empty()) vz_path = (fs::path(from_dir) / "est_vz.json").string();
                if (d_path.empty()) d_path = (fs::path(from_dir) / "est_d.json").string();
            }
            if (vx_path.empty() || vy_path.empty() || vz_path.empty() || d_path.empty()) {
                std::fprintf(stderr, "pdeflow: featuremaps needs --vx/--vy/--vz/--d or --from\n");
                return 2;
            }
            SeriesPtr vx, vy, vz, d;
            if (int rc = read_series(vx_path, vx)) return rc;
            if (int rc = read_series(vy_path, vy)) return rc;
            if (int rc = read_series(vz_path, vz)) return rc;
            if (int rc = read_series(d_path, d)) return rc;
            return exit_code(pdeflow_feature_maps(vx.get(), vy.get(), vz.get(), d.get(),
                                                  char_len, out_dir.c_str()));
        }

        if (app.got_subcommand(c_exp)) {
            if (!rerun_manifest.empty())
                return exit_code(
                    pdeflow_experiment_rerun(rerun_manifest.c_str(), out_dir.c_str()));
            if (seed >= 0) cfg["seed"] = (uint64_t)seed;
            return exit_code(pdeflow_experiment_run(recipe.empty() ? nullptr : recipe.c_str(),
                                                    cfg.dump().c_str(), out_dir.c_str()));
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pdeflow: %s\n", e.what());
        return 2;
    }
    return 2;
}
