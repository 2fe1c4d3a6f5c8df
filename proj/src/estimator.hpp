#pragma once

#include "loss_grad.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pdeflow {

// Everything a fit depends on besides the data. Defaults are the calibrated
// settings used by the bundled experiments.
struct EstimatorConfig {
    double lambda_v = 0.1;
    double lambda_d = 0.1;
    double sigma = 0.6;     // mm, pre-smoothing for the edge weights
    double dt = 0.02;       // s, solver step
    int t_pd = 0;           // prediction horizon in frames; 0 means floor(T/3)
    double lr = 1e-3;
    double momentum = 0.9;
    double init_scale = 0.001;
    double conv_rel_tol = 0.001;
    int conv_patience = 10;
    int max_iters = 2000;
    uint64_t rng_seed = 0;
    Mode mode = Mode::AdvectionDiffusion;
    Integrator integrator = Integrator::RK45FixedStep;
    FaceDiffusivity face_d = FaceDiffusivity::ArithmeticMean;
    bool dirichlet_interp = true;
    int pm_bins = 256;

    void validate() const;
    LossConfig loss_config() const;
    // T is the number of measured transitions (frames - 1)
    int resolve_t_pd(int t_total) const;
};

struct FitResult {
    Potentials potentials;
    IsoDiffusivity diffus_param;
    VectorField v;       // velocity_from_potentials at the final iterate
    ScalarField d;       // diffusivity_iso at the final iterate
    std::vector<LossBreakdown> loss_history;
    int iterations = 0;
    bool converged = false;
};

// In-mask voxels of both potentials and the diffusivity parameter drawn
// i.i.d. from scale * N(0,1), one stream, voxel-major draw order. Voxels
// outside the mask stay zero.
std::pair<Potentials, IsoDiffusivity> init_params(const Grid3& g, const DomainMask& mask,
                                                  uint64_t seed, double scale = 0.001);

// Uniform random window of t_pd + 1 consecutive frames.
TrainingSample select_sample(const VolumeSeries& series, int t_pd, Rng& rng);

// Momentum SGD on the sampled loss until the relative total-loss change
// stays below conv_rel_tol for conv_patience consecutive iterations.
// A CFL violation mid-run aborts with the offending iteration in the message.
FitResult fit(const VolumeSeries& series, const DomainMask& mask, const EstimatorConfig& cfg);

// Integrate the fitted fields from c0 over T transitions of length frame_dt,
// recording every frame_dt. T = 0 returns just the clamped initial frame.
VolumeSeries predict_series(const FitResult& fit, const ScalarField& c0, const DomainMask& mask,
                            const BoundaryData& bd, const EstimatorConfig& cfg, double frame_dt,
                            int t_total);

// JSON run manifest: config, seed, loss history, convergence flag, plus any
// caller-provided context entries.
std::string fit_manifest_json(const EstimatorConfig& cfg, const FitResult& r,
                              const std::vector<std::pair<std::string, std::string>>& extra = {});

// Stable names used in manifests and CLI flags; parsers throw on unknown input.
const char* mode_name(Mode m);
const char* integrator_name(Integrator i);
const char* face_name(FaceDiffusivity f);
Mode mode_from_name(const std::string& s);
Integrator integrator_from_name(const std::string& s);
FaceDiffusivity face_from_name(const std::string& s);

// Config as JSON. Parsing fills missing keys from the defaults and rejects
// unknown keys, so partial override files stay typo-safe.
nlohmann::json estimator_config_json(const EstimatorConfig& c);
EstimatorConfig estimator_config_from_json(const nlohmann::json& j);

} // namespace pdeflow
