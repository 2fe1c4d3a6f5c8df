#include "synth.hpp"

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdeflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Mode {
    double kx, ky, kz, phase, amp;
};

} // namespace

ScalarField band_limited_field(const Grid3& g, uint64_t seed, int modes, int freq_max) {
    if (modes < 1 || freq_max < 1) throw std::invalid_argument("band_limited_field: modes and freq_max must be positive");
    Rng rng(seed);
    const double lx = g.nx * g.dx, ly = g.ny * g.dy, lz = g.nz * g.dz;
    std::vector<Mode> ms;
    ms.reserve((std::size_t)modes);
    const int span = 2 * freq_max + 1;
    while ((int)ms.size() < modes) {
        int ix = (int)rng.below((uint64_t)span) - freq_max;
        int iy = (int)rng.below((uint64_t)span) - freq_max;
        int iz = (int)rng.below((uint64_t)span) - freq_max;
        if (ix == 0 && iy == 0 && iz == 0) continue;
        Mode m;
        m.kx = kTwoPi * ix / lx;
        m.ky = kTwoPi * iy / ly;
        m.kz = kTwoPi * iz / lz;
        m.phase = kTwoPi * rng.uniform01();
        m.amp = rng.normal();
        ms.push_back(m);
    }
    ScalarField f(g);
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const double px = x * g.dx, py = y * g.dy, pz = z * g.dz;
                double s = 0.0;
                for (const Mode& m : ms)
                    s += m.amp * std::cos(m.kx * px + m.ky * py + m.kz * pz + m.phase);
                f.at(x, y, z) = s;
            }
    return f;
}

SynthTruth synth_truth(const Grid3& g, const DomainMask& m, uint64_t seed,
                       double v_max, double d_max, int modes, int freq_max) {
    if (v_max < 0.0 || d_max <= 0.0) throw std::invalid_argument("synth_truth: bad field scales");
    SynthTruth t{Potentials(g), IsoDiffusivity(g), VectorField(g), ScalarField(g)};

    t.pot.gamma1 = band_limited_field(g, Rng::mix(seed, 0x11), modes, freq_max);
    t.pot.gamma2 = band_limited_field(g, Rng::mix(seed, 0x22), modes, freq_max);
    VectorField raw = velocity_from_potentials(t.pot);
    double mx = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!m.is_inside(i)) continue;
        double s2 = raw.x[i] * raw.x[i] + raw.y[i] * raw.y[i] + raw.z[i] * raw.z[i];
        mx = std::max(mx, s2);
    }
    mx = std::sqrt(mx);
    if (mx <= 0.0) throw std::runtime_error("synth_truth: degenerate potentials");
    // V is bilinear in the potentials, so scaling each by sqrt(r) scales V by r.
    const double r = std::sqrt(v_max / mx);
    for (auto& x : t.pot.gamma1.a) x *= r;
    for (auto& x : t.pot.gamma2.a) x *= r;
    t.v = velocity_from_potentials(t.pot);

    ScalarField draw = band_limited_field(g, Rng::mix(seed, 0x33), modes, freq_max);
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!m.is_inside(i)) continue;
        if (first) { lo = hi = draw[i]; first = false; }
        lo = std::min(lo, draw[i]);
        hi = std::max(hi, draw[i]);
    }
    if (first || hi <= lo) throw std::runtime_error("synth_truth: degenerate diffusivity draw");
    const double d_floor = 0.1 * d_max;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double u = (draw[i] - lo) / (hi - lo);
        double d = d_floor + (d_max - d_floor) * u;
        if (!m.is_inside(i)) d = d_floor;
        t.diff.l[i] = std::sqrt(d);
    }
    t.d = diffusivity_iso(t.diff);
    return t;
}

ScalarField synth_initial(const Grid3& g, const DomainMask& m, uint64_t seed, double amp) {
    if (amp <= 0.0) throw std::invalid_argument("synth_initial: amp must be positive");
    Rng rng(Rng::mix(seed, 0x44));
    const double lx = g.nx * g.dx, ly = g.ny * g.dy, lz = g.nz * g.dz;

    // structure lives at fixed physical scales so the transport signal per
    // millimeter does not dilute on larger boxes
    struct Blob {
        double cx, cy, cz, inv2s2, w;
    };
    const double volume = lx * ly * lz;
    const int n_blobs = (int)std::clamp(std::lround(volume / 1500.0), 6L, 48L);
    std::vector<Blob> blobs((std::size_t)n_blobs);
    for (auto& b : blobs) {
        b.cx = lx * rng.uniform01();
        b.cy = ly * rng.uniform01();
        b.cz = lz * rng.uniform01();
        double sigma = 2.5 + 3.5 * rng.uniform01(); // mm
        b.inv2s2 = 1.0 / (2.0 * sigma * sigma);
        b.w = 0.5 + 0.5 * rng.uniform01();
    }
    const double min_side = std::min({lx, ly, lz});
    const int ripple_freq = std::max(1, (int)std::lround(min_side / 9.6));
    ScalarField ripple = band_limited_field(g, Rng::mix(seed, 0x55), 6, ripple_freq);
    double rscale = 0.0;
    for (double x : ripple.a) rscale = std::max(rscale, std::abs(x));
    if (rscale <= 0.0) rscale = 1.0;

    ScalarField c(g);
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const double px = x * g.dx, py = y * g.dy, pz = z * g.dz;
                double s = 0.2 + 0.35 * (1.0 + ripple.at(x, y, z) / rscale);
                for (const Blob& b : blobs) {
                    double ex = px - b.cx, ey = py - b.cy, ez = pz - b.cz;
                    s += b.w * std::exp(-(ex * ex + ey * ey + ez * ez) * b.inv2s2);
                }
                c.at(x, y, z) = s;
            }
    double mx = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (m.is_inside(i)) mx = std::max(mx, c[i]);
    if (mx <= 0.0) throw std::runtime_error("synth_initial: empty mask");
    const double r = amp / mx;
    for (auto& x : c.a) x *= r;
    return c;
}

} // namespace pdeflow
