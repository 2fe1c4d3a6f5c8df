#pragma once

#include "field_param.hpp"
#include "pde_forward.hpp"

#include <utility>

namespace pdeflow {

// Window of measured frames handed to one optimization iteration. Frame 0 is
// the initial condition, the remaining frames are collocation targets.
struct TrainingSample {
    VolumeSeries window;
    std::size_t start_frame = 0;
};

struct LossConfig {
    double lambda_v = 0.1;
    double lambda_d = 0.1;
    double sigma = 0.6; // voxels, blur feeding the edge coefficients
    int pm_bins = 256;
    SolverConfig solver;
};

struct LossBreakdown {
    double l_cc = 0.0;
    double l_as_v = 0.0;
    double l_as_d = 0.0;
    double total = 0.0;
    double lambda_v = 0.0;
    double lambda_d = 0.0;
};

struct ParamGradients {
    ScalarField d_gamma1, d_gamma2, d_l;
};

// Mean over collocation frames 1..end of the in-mask mean squared mismatch.
double loss_cc(const VolumeSeries& predicted, const VolumeSeries& measured,
               const DomainMask& mask);

// Edge threshold: histogram of in-mask gradient magnitudes of f over [0, max],
// smallest bin upper edge whose cumulative mass reaches 90%. Machine-epsilon
// floor when the field is flat.
double pm_k(const ScalarField& f, const DomainMask& mask, int bins = 256);

struct SmoothnessTerms {
    double l_as_v = 0.0;
    double l_as_d = 0.0;
    ScalarField alpha_v, alpha_d;
};

// Edge-aware smoothness penalties. The coefficients look at blurred fields,
// the penalty itself at raw gradients; g(s) = exp(-s / k).
SmoothnessTerms smoothness_terms(const VectorField& v, const ScalarField& d,
                                 double sigma, double k_v, double k_d,
                                 const DomainMask& mask);

// Per-iteration constants of the regularizer: thresholds and coefficient
// fields. Gradients never flow through these.
struct PmCoeffs {
    double k_v = 0.0;
    double k_d = 0.0;
    ScalarField alpha_v, alpha_d;
};

PmCoeffs pm_coeffs(const VectorField& v, const ScalarField& d, double sigma, int bins,
                   const DomainMask& mask);

LossBreakdown total_loss(const TrainingSample& sample, const Potentials& pots,
                         const IsoDiffusivity& diff, const DomainMask& mask,
                         const LossConfig& cfg);

// Same loss with the coefficient fields pinned; this is the function the
// gradient differentiates, so finite-difference probes must use it.
LossBreakdown total_loss_frozen(const TrainingSample& sample, const Potentials& pots,
                                const IsoDiffusivity& diff, const DomainMask& mask,
                                const LossConfig& cfg, const PmCoeffs& coeffs);

// Reverse-mode gradients of the frozen-coefficient total loss with respect to
// both potentials and the diffusivity root, checkpointing every solver step.
std::pair<LossBreakdown, ParamGradients> loss_gradients(const TrainingSample& sample,
                                                        const Potentials& pots,
                                                        const IsoDiffusivity& diff,
                                                        const DomainMask& mask,
                                                        const LossConfig& cfg);

} // namespace pdeflow
