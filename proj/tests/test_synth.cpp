#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "synth.hpp"
#include "rng.hpp"

#include <cmath>
#include <stdexcept>

using namespace pdeflow;

TEST_CASE("band_limited_field is seeded and mean-free over the box") {
    Grid3 g(12, 10, 8, 1.2, 1.2, 1.3);
    ScalarField a = band_limited_field(g, 7, 6, 2);
    ScalarField b = band_limited_field(g, 7, 6, 2);
    CHECK(a.a == b.a);
    ScalarField c = band_limited_field(g, 8, 6, 2);
    bool differs = false;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] != c[i]) differs = true;
    CHECK(differs);

    // integer wavenumbers are orthogonal to the constant over the lattice,
    // so the discrete mean vanishes to rounding
    double mean = 0.0, mx = 0.0;
    for (double x : a.a) {
        mean += x;
        mx = std::max(mx, std::abs(x));
    }
    mean /= (double)g.size();
    REQUIRE(mx > 0.0);
    CHECK(std::abs(mean) < 1e-12 * mx);

    CHECK_THROWS_AS(band_limited_field(g, 7, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(band_limited_field(g, 7, 4, 0), std::invalid_argument);
}

TEST_CASE("synth_truth hits the requested field scales exactly") {
    Grid3 g(16, 16, 12, 1.2, 1.2, 1.3);
    DomainMask m = DomainMask::full(g, false);
    SynthTruth t = synth_truth(g, m, 3, 6.0, 0.02);

    double vmax = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = std::sqrt(t.v.x[i] * t.v.x[i] + t.v.y[i] * t.v.y[i] + t.v.z[i] * t.v.z[i]);
        vmax = std::max(vmax, s);
    }
    CHECK(vmax == doctest::Approx(6.0).epsilon(1e-12));

    double dmin = 1e300, dmax = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        dmin = std::min(dmin, t.d[i]);
        dmax = std::max(dmax, t.d[i]);
        CHECK(t.d[i] == t.diff.l[i] * t.diff.l[i]);
    }
    CHECK(dmax == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(dmin == doctest::Approx(0.002).epsilon(1e-12));

    // bilinearity: same seed at a different velocity scale is proportional
    SynthTruth t2 = synth_truth(g, m, 3, 1.5, 0.02);
    for (std::size_t i = 0; i < g.size(); i += 37) {
        CHECK(t2.v.x[i] == doctest::Approx(0.25 * t.v.x[i]).epsilon(1e-12));
        CHECK(t2.v.z[i] == doctest::Approx(0.25 * t.v.z[i]).epsilon(1e-12));
    }

    SynthTruth t3 = synth_truth(g, m, 3, 6.0, 0.02);
    CHECK(t3.v.x.a == t.v.x.a);
    CHECK(t3.d.a == t.d.a);
    CHECK_THROWS_AS(synth_truth(g, m, 3, -1.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(synth_truth(g, m, 3, 6.0, 0.0), std::invalid_argument);
}

TEST_CASE("synth_initial is positive with in-mask max equal to amp") {
    Grid3 g(14, 12, 10, 1.2, 1.2, 1.3);
    DomainMask m = DomainMask::full(g, false);
    ScalarField c = synth_initial(g, m, 11, 250.0);
    double mx = 0.0;
    for (double x : c.a) {
        CHECK(x > 0.0);
        mx = std::max(mx, x);
    }
    CHECK(mx == doctest::Approx(250.0).epsilon(1e-12));

    ScalarField c2 = synth_initial(g, m, 11, 250.0);
    CHECK(c2.a == c.a);

    // max is taken over the mask: hide the global peak and the in-mask max
    // must still land on amp
    std::size_t peak = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (c[i] > c[peak]) peak = i;
    std::vector<uint8_t> inside(g.size(), 1);
    inside[peak] = 0;
    DomainMask holey = DomainMask::classify(g, inside, false);
    ScalarField ch = synth_initial(g, holey, 11, 250.0);
    double mxh = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (holey.is_inside(i)) mxh = std::max(mxh, ch[i]);
    CHECK(mxh == doctest::Approx(250.0).epsilon(1e-12));
    CHECK(ch[peak] > 250.0);

    CHECK_THROWS_AS(synth_initial(g, m, 11, 0.0), std::invalid_argument);
}
