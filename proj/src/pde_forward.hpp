#pragma once

#include "data_io.hpp"
#include "grid.hpp"

#include <stdexcept>
#include <vector>

namespace pdeflow {

enum class Mode { AdvectionDiffusion, AdvectionOnly, DiffusionOnly };
enum class Integrator { RK45FixedStep, RK4 };
enum class FaceDiffusivity {
    ArithmeticMean,       // symmetric face value, conservative
    NestedForwardBackward // literal nested scheme, face takes the lower voxel
};

struct SolverConfig {
    double dt = 0.02;          // s
    double cfl_safety = 0.8;   // in (0, 1]
    Mode mode = Mode::AdvectionDiffusion;
    Integrator integrator = Integrator::RK45FixedStep;
    FaceDiffusivity face_d = FaceDiffusivity::ArithmeticMean;
    bool dirichlet_interp = true; // interpolate slab values between frames

    void validate() const;
};

// Measured values on DirichletSlab voxels over the integration window.
struct BoundaryData {
    double frame_dt = 0.0;
    bool interpolate = true;
    std::vector<std::size_t> voxels;          // slab voxel indices
    std::vector<std::vector<double>> values;  // one row per frame

    static BoundaryData from_series(const VolumeSeries& s, const DomainMask& m,
                                    bool interpolate);
    // covers [0, t_max]; a single frame covers any t
    double t_max() const;
    void row_at(double t, std::vector<double>& out) const;
};

struct CflResult {
    bool ok = false;
    double max_stable_dt = 0.0; // safety already applied
};

// Thrown by integrate when the step size violates the CFL bound.
struct CflError : std::runtime_error {
    double max_stable_dt;
    explicit CflError(double stable)
        : std::runtime_error("dt violates the CFL bound; maximal stable dt = " +
                             std::to_string(stable)),
          max_stable_dt(stable) {}
    CflError(const std::string& what, double stable)
        : std::runtime_error(what), max_stable_dt(stable) {}
};

// -V . grad(C), first-order upwind per axis, mirrored at array edges.
ScalarField advect_upwind(const ScalarField& c, const VectorField& v);

// div(D grad C) in flux form; faces at array edges carry zero flux.
ScalarField diffuse(const ScalarField& c, const ScalarField& d,
                    FaceDiffusivity face = FaceDiffusivity::ArithmeticMean);

// Zero the rate on DirichletSlab and Outside voxels and clamp the state to the
// interpolated measurements. Returns the adjusted rate.
ScalarField apply_bc(const ScalarField& rate, ScalarField& state, const DomainMask& m,
                     const BoundaryData& bd, double t);

CflResult cfl_check(const VectorField& v, const ScalarField& d, const Grid3& g,
                    double dt, double safety);

// Fixed-step explicit integration of the masked semi-discrete system.
// Frames are recorded every record_every seconds, frame 0 is the clamped c0.
VolumeSeries integrate(const ScalarField& c0, const VectorField& v, const ScalarField& d,
                       const DomainMask& mask, const BoundaryData& bd,
                       const SolverConfig& cfg, double t_span, double record_every);

// ---- integration engine, shared with the gradient module ------------------

// Semi-discrete right-hand side on a masked domain. Stencil neighbors outside
// the domain are mirrored; slab and outside voxels carry rate 0.
class MaskedRhs {
public:
    MaskedRhs(const DomainMask& mask, const VectorField& v, const ScalarField& d,
              FaceDiffusivity face);

    void eval(const std::vector<double>& u, std::vector<double>& rate) const;

    // Gather-form transposes. ubar accumulates dL/du given kbar = dL/drate;
    // vbar and dbar accumulate parameter adjoints at the linearization point u.
    void adjoint_state(const std::vector<double>& u, const std::vector<double>& kbar,
                       std::vector<double>& ubar) const;
    void adjoint_coeff(const std::vector<double>& u, const std::vector<double>& kbar,
                       VectorField& vbar, ScalarField& dbar) const;

    const DomainMask& mask() const { return *mask_; }

private:
    const DomainMask* mask_;
    const VectorField* v_;
    const ScalarField* d_;
    FaceDiffusivity face_;
    // per voxel: bit 2a = minus neighbor inside, bit 2a+1 = plus neighbor inside
    std::vector<uint8_t> nb_;
    std::vector<uint8_t> evolve_;

    template <bool Arith>
    void eval_impl(const double* u, double* rate) const;
    template <bool Arith>
    void adjoint_state_impl(const double* u, const double* kbar, double* ubar) const;
};

// One explicit Runge-Kutta tableau step with Dirichlet clamping, plus its
// exact adjoint (stages are recomputed from the step entry state).
class ExplicitStepper {
public:
    ExplicitStepper(const MaskedRhs& rhs, const BoundaryData& bd, Integrator kind,
                    double dt);

    void forward_step(std::vector<double>& u, double t);

    // ybar is the adjoint of the step output; on return it holds the adjoint
    // of the step input. vbar/dbar accumulate.
    void adjoint_step(const std::vector<double>& u_in, double t, std::vector<double>& ybar,
                      VectorField& vbar, ScalarField& dbar);

    double max_embedded_error() const { return max_embedded_error_; }

    // clamp slab values to measurements at time t (outside voxels are assumed 0)
    void clamp(std::vector<double>& u, double t) const;

private:
    const MaskedRhs* rhs_;
    const BoundaryData* bd_;
    double dt_;
    int stages_;
    const double* c_;
    const double* a_; // row-major, row j holds j entries
    const double* b_;
    const double* berr_;
    double max_embedded_error_ = 0.0;
    std::vector<std::vector<double>> k_, us_, kbar_;
    mutable std::vector<double> row_;
    std::vector<double> tmp_;

    void zero_noneval(std::vector<double>& x) const; // zero slab and outside entries
};

} // namespace pdeflow
