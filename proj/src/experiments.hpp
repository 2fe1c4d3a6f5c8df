#pragma once

#include "estimator.hpp"
#include "synth.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pdeflow {

// End-to-end synthetic protocols. Each recipe generates ground truth, runs
// the forward model to produce a measured series, fits the named estimator
// mode, and scores the estimate against the truth.
enum class Recipe {
    AdvViaAdv,      // advection data, AdvectionOnly fit
    DiffViaDiff,    // diffusion data, DiffusionOnly fit
    AdvViaAdvDiff,  // advection data, joint fit; diffusion should stay small
    DiffViaAdvDiff, // diffusion data, joint fit; velocity should stay small
    NoiseLadder,    // advection protocol repeated across noise levels
};

Recipe recipe_from_name(const std::string& name);
std::string recipe_name(Recipe r);

struct ExperimentConfig {
    Recipe recipe = Recipe::AdvViaAdv;
    int nx = 32, ny = 32, nz = 32;
    double sx = 1.2, sy = 1.2, sz = 1.3; // mm
    int frames = 10;        // measured frames beyond the initial one
    double frame_dt = 0.2;  // s between frames
    double sim_dt = 0.05;   // forward-generation step, also the fit step
    double v_max = 6.0;     // mm/s, ground-truth speed scale
    double d_max = 0.02;    // mm^2/s, ground-truth diffusivity scale
    int modes = 6, freq_max = 4;
    double amp = 5000.0;    // initial-concentration peak
    std::vector<double> noise_levels = {0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
    int workers = 2;        // ladder fan-out
    uint64_t seed = 1;
    EstimatorConfig est;    // mode is overridden by the recipe

    void validate() const;
};

nlohmann::json experiment_config_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Calibrated starting config for a recipe. Advection protocols use short
// frames (0.2 s) and a 0.05 s step; diffusion protocols need long frames
// (15 s, the voxel diffusion time is ~72 s) and a 2.5 s step. The larger
// init_scale shortens the multiplicative saddle at the start of a fit; the
// diffusion variants keep it smaller so the initial L^2 field respects the
// CFL bound of the coarser step.
ExperimentConfig recipe_defaults(Recipe r);

// Scale ratios use a 1 mm characteristic length so D/char and |V| share
// units; "spurious over signal" stays well below 1 when the unused channel
// of a joint fit remains near its initialization.
constexpr double kCharLenMm = 1.0;

struct RecoveryOutcome {
    double noise_level = 0.0;
    double mae_v = 0.0;          // max-normalized MAE of |V| against truth
    double mae_d = 0.0;          // same for D
    double ratio_d_over_v = 0.0; // median(D) / (char * max|V|)
    double ratio_v_over_d = 0.0; // median(|V|) * char / max(D)
    VolumeSeries measured;       // the series the fit saw (noise applied)
    FitResult fit;
};

struct ExperimentResult {
    ExperimentConfig cfg;
    SynthTruth truth;
    std::vector<RecoveryOutcome> runs; // one per noise level; single for recovery recipes
};

// Forward-only generation: truth fields and the clean series, with each
// transport channel switched on independently of the recipe's fit mode.
struct SimulatedSeries {
    SynthTruth truth;
    ScalarField c0;
    VolumeSeries clean;
};
SimulatedSeries simulate_series(const ExperimentConfig& cfg, bool with_advection,
                                bool with_diffusion);

// Artifact writers behind the simulate and featuremaps commands. Feature
// maps export the speed, orientation, diffusivity, and Peclet fields; the
// +inf Peclet sentinel is written as 0 with the count recorded in the
// header meta and the histogram CSV.
void write_simulation(const SimulatedSeries& s, const ExperimentConfig& cfg,
                      const std::string& mode_tag, const std::string& out_dir);
void write_feature_maps(const VectorField& v, const ScalarField& d, double char_len,
                        const std::string& out_dir);

// Deterministic in-memory pipeline; no files touched.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes manifest.json, measured series, truth and estimate maps, the loss
// history, and the score table under out_dir (created if missing).
void write_experiment(const ExperimentResult& r, const std::string& out_dir);

// Reads a manifest, re-executes its config, writes artifacts to out_dir.
ExperimentResult rerun_manifest(const std::string& manifest_path, const std::string& out_dir);

// |V| map of a vector field, shared by scoring and artifact export.
ScalarField speed_map(const VectorField& v);

} // namespace pdeflow
