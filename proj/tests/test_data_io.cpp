#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "data_io.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pdeflow;
namespace fs = std::filesystem;

static fs::path tmpdir() {
    auto d = fs::temp_directory_path() / "pdeflow_io_test";
    fs::create_directories(d);
    return d;
}

static VolumeSeries random_series(uint64_t seed, int frames = 3) {
    Grid3 g(6, 5, 4, 1.2, 1.2, 1.3);
    VolumeSeries s;
    s.grid = g;
    s.dt_s = 1.0;
    s.meta["subject"] = "synthetic";
    Rng rng(seed);
    for (int t = 0; t < frames; ++t) {
        ScalarField f(g);
        for (auto& e : f.a) e = rng.uniform01() * 7.0;
        s.frames.push_back(std::move(f));
    }
    return s;
}

static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

TEST_CASE("series round trip is value-exact at 32-bit storage") {
    auto d = tmpdir();
    VolumeSeries s = random_series(42);
    write_series(s, (d / "s.pfvs").string());
    VolumeSeries r = read_series((d / "s.pfvs").string());

    CHECK(r.grid.same_shape(s.grid));
    CHECK(r.dt_s == s.dt_s);
    CHECK(r.frame_count() == s.frame_count());
    CHECK(r.meta.at("subject") == "synthetic");
    for (std::size_t t = 0; t < s.frame_count(); ++t)
        for (std::size_t i = 0; i < s.grid.size(); ++i)
            CHECK(r.frames[t][i] == (double)(float)s.frames[t][i]);

    // a second trip is bit-stable
    write_series(r, (d / "s2.pfvs").string());
    CHECK(slurp(d / "s.raw") == slurp(d / "s2.raw"));
    VolumeSeries r2 = read_series((d / "s2.pfvs").string());
    for (std::size_t t = 0; t < r.frame_count(); ++t)
        CHECK(r2.frames[t].a == r.frames[t].a);
}

TEST_CASE("header carries the documented fields") {
    auto d = tmpdir();
    write_series(random_series(1), (d / "h.pfvs").string());
    std::ifstream hf(d / "h.pfvs");
    nlohmann::json h;
    hf >> h;
    CHECK(h["magic"] == "PFVS");
    CHECK(h["version"] == 1);
    CHECK(h["dims"] == nlohmann::json({6, 5, 4}));
    CHECK(h["spacing_mm"][0] == 1.2);
    CHECK(h["dtype"] == "f32le");
    CHECK(h["frames"] == 3);
    CHECK(h["data_file"] == "h.raw");
    CHECK(h["meta"]["subject"] == "synthetic");
}

TEST_CASE("payload byte mismatch and bad headers are rejected") {
    auto d = tmpdir();
    write_series(random_series(7), (d / "t.pfvs").string());

    // truncate the payload
    fs::resize_file(d / "t.raw", 10);
    CHECK_THROWS_WITH_AS(read_series((d / "t.pfvs").string()),
                         doctest::Contains("byte count mismatch"), std::runtime_error);

    // wrong magic
    std::ofstream bad(d / "bad.pfvs");
    bad << "{\"magic\":\"NOPE\"}";
    bad.close();
    CHECK_THROWS_WITH_AS(read_series((d / "bad.pfvs").string()),
                         doctest::Contains("bad magic"), std::runtime_error);
}

TEST_CASE("negative payload values are clamped and counted on read") {
    auto d = tmpdir();
    VolumeSeries s = random_series(9, 1);
    write_series(s, (d / "n.pfvs").string());
    // poke one negative float into the raw payload
    {
        std::fstream raw(d / "n.raw", std::ios::binary | std::ios::in | std::ios::out);
        float v = -2.5f;
        raw.write((const char*)&v, 4);
    }
    VolumeSeries r = read_series((d / "n.pfvs").string());
    CHECK(r.frames[0][0] == 0.0);
    CHECK(r.meta.at("clamped_negatives") == "1");
}

TEST_CASE("non-finite payload values are rejected") {
    auto d = tmpdir();
    write_series(random_series(10, 1), (d / "inf.pfvs").string());
    {
        std::fstream raw(d / "inf.raw", std::ios::binary | std::ios::in | std::ios::out);
        float v = std::numeric_limits<float>::quiet_NaN();
        raw.write((const char*)&v, 4);
    }
    CHECK_THROWS_WITH_AS(read_series((d / "inf.pfvs").string()),
                         doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("mask container round trip") {
    auto d = tmpdir();
    Grid3 g(5, 4, 3, 1, 1, 1);
    std::vector<uint8_t> in(g.size(), 1);
    in[g.idx(2, 2, 1)] = 0;
    DomainMask m = DomainMask::classify(g, in, true);
    write_mask(m, (d / "m.pfvs").string());
    DomainMask r = read_mask((d / "m.pfvs").string(), true);
    CHECK(r.inside == m.inside);
    CHECK(r.n_inside == m.n_inside);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(r.cls[i] == m.cls[i]);
}

TEST_CASE("signal conversion hits the closed-form values") {
    Grid3 g(4, 3, 2, 1, 1, 1);
    SignalSeries s;
    s.grid = g;
    s.dt_s = 1.0;
    const double s0 = 1234.5;
    const double kappa = 0.23;
    // two baseline frames at S0, then one frame at S0*exp(-1)
    for (int t = 0; t < 3; ++t) s.frames.emplace_back(g, t < 2 ? s0 : s0 * std::exp(-1.0));

    ConversionReport rep;
    VolumeSeries c = signal_to_concentration(s, 2, kappa, &rep);
    CHECK(rep.flagged == 0);
    CHECK(rep.clamped == 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(c.frames[0][i] == 0.0);
        CHECK(c.frames[1][i] == 0.0);
        CHECK(c.frames[2][i] == doctest::Approx(kappa).epsilon(1e-12));
    }

    // uniform scaling of the signal leaves concentrations unchanged
    SignalSeries s2 = s;
    for (auto& f : s2.frames)
        for (auto& e : f.a) e *= 37.25;
    VolumeSeries c2 = signal_to_concentration(s2, 2, kappa, nullptr);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(c2.frames[t][i] == doctest::Approx(c.frames[t][i]).epsilon(1e-12));
}

TEST_CASE("signal conversion flags invalid voxels and clamps negatives") {
    Grid3 g(2, 1, 1, 1, 1, 1);
    SignalSeries s;
    s.grid = g;
    s.dt_s = 1.0;
    s.frames.emplace_back(g, 100.0);
    s.frames.emplace_back(g, 100.0);
    s.frames[1].at(0, 0, 0) = 0.0;    // S <= 0, flagged
    s.frames[1].at(1, 0, 0) = 150.0;  // S > S0 gives C < 0, clamped
    ConversionReport rep;
    VolumeSeries c = signal_to_concentration(s, 1, 1.0, &rep);
    CHECK(rep.flagged == 1);
    CHECK(rep.clamped == 1);
    CHECK(c.frames[1].at(0, 0, 0) == 0.0);
    CHECK(c.frames[1].at(1, 0, 0) == 0.0);
}

TEST_CASE("rician noise level 0 is an exact copy") {
    VolumeSeries s = random_series(21);
    VolumeSeries n = add_rician_noise(s, 0.0, 555);
    for (std::size_t t = 0; t < s.frame_count(); ++t)
        CHECK(n.frames[t].a == s.frames[t].a);
}

TEST_CASE("rician noise is reproducible and frame substreams differ") {
    VolumeSeries s = random_series(22, 2);
    VolumeSeries a = add_rician_noise(s, 0.05, 99);
    VolumeSeries b = add_rician_noise(s, 0.05, 99);
    VolumeSeries c = add_rician_noise(s, 0.05, 100);
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(a.frames[t].a == b.frames[t].a);
        CHECK(a.frames[t].a != c.frames[t].a);
    }
    // same input values in both frames, still different noise per frame
    VolumeSeries flat = s;
    flat.frames[1] = flat.frames[0];
    VolumeSeries fn = add_rician_noise(flat, 0.05, 99);
    CHECK(fn.frames[0].a != fn.frames[1].a);
}

TEST_CASE("rician noise empirical mean matches the Rice mean") {
    // constant frame of 1e5 voxels, nu = 1, sigma = level * max = 0.2
    Grid3 g(50, 50, 40, 1, 1, 1);
    VolumeSeries s;
    s.grid = g;
    s.dt_s = 1.0;
    s.frames.emplace_back(g, 1.0);
    const double nu = 1.0, sigma = 0.2;
    VolumeSeries n = add_rician_noise(s, 0.2, 31337);

    double mean = 0.0;
    for (auto v : n.frames[0].a) mean += v;
    mean /= (double)g.size();

    // E[C'] = sigma*sqrt(pi/2)*L_{1/2}(-nu^2/(2 sigma^2)) via modified Bessel I0, I1
    const double x = -nu * nu / (2.0 * sigma * sigma);
    const double l12 = std::exp(x / 2.0) *
                       ((1.0 - x) * std::cyl_bessel_i(0.0, -x / 2.0) -
                        x * std::cyl_bessel_i(1.0, -x / 2.0));
    const double rice_mean = sigma * std::sqrt(M_PI / 2.0) * l12;
    CHECK(mean == doctest::Approx(rice_mean).epsilon(0.01));
}

TEST_CASE("pgm slice export writes the documented bytes") {
    auto d = tmpdir();
    Grid3 g(3, 2, 1, 1, 1, 1);
    ScalarField f(g);
    f.at(0, 0, 0) = 0.0;
    f.at(1, 0, 0) = 0.5;
    f.at(2, 0, 0) = 1.0;
    f.at(0, 1, 0) = -0.2; // clamps low
    f.at(1, 1, 0) = 0.25;
    f.at(2, 1, 0) = 2.0;  // clamps high
    export_slice_pgm(f, 2, 0, 0.0, 1.0, (d / "s.pgm").string());

    const std::string got = slurp(d / "s.pgm");
    const unsigned char pix[12] = {0x00, 0x00, 0x80, 0x00, 0xff, 0xff,
                                   0x00, 0x00, 0x40, 0x00, 0xff, 0xff};
    std::string expect = "P5\n3 2\n65535\n";
    expect.append((const char*)pix, 12);
    CHECK(got == expect);
}

TEST_CASE("csv export uses 9 significant digits and a header row") {
    auto d = tmpdir();
    export_csv((d / "t.csv").string(), {"name", "value"},
               {{std::string("adv"), 0.123456789123},
                {std::string("x,y"), 1.5},
                {std::string("tiny"), 1e-9}});
    CHECK(slurp(d / "t.csv") ==
          "name,value\nadv,0.123456789\n\"x,y\",1.5\ntiny,1e-09\n");
}

TEST_CASE("format_g9 standalone values") {
    CHECK(format_g9(1.5) == "1.5");
    CHECK(format_g9(0.123456789123) == "0.123456789");
    CHECK(format_g9(123456789.0) == "123456789");
}
