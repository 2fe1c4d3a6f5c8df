#include "data_io.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdeflow {

void VolumeSeries::validate() const {
    if (frames.empty())
        throw std::invalid_argument("series has no frames");
    if (!(dt_s >= 0.0) || !std::isfinite(dt_s))
        throw std::invalid_argument("series dt_s must be finite and non-negative");
    for (const auto& f : frames)
        if (!f.grid.same_shape(grid) || f.a.size() != grid.size())
            throw std::invalid_argument("series frames do not share the series grid");
}

VolumeSeries signal_to_concentration(const SignalSeries& s, int baseline_frames,
                                     double kappa, ConversionReport* report) {
    s.validate();
    if (baseline_frames < 1 || (std::size_t)baseline_frames > s.frame_count())
        throw std::invalid_argument("baseline_frames out of range");
    if (!(kappa > 0.0) || !std::isfinite(kappa))
        throw std::invalid_argument("kappa must be positive and finite");

    const std::size_t n = s.grid.size();
    std::vector<double> s0(n, 0.0);
    for (int t = 0; t < baseline_frames; ++t)
        for (std::size_t i = 0; i < n; ++i) s0[i] += s.frames[t][i];
    for (std::size_t i = 0; i < n; ++i) s0[i] /= baseline_frames;

    ConversionReport rep;
    VolumeSeries out;
    out.grid = s.grid;
    out.dt_s = s.dt_s;
    out.meta = s.meta;
    out.frames.assign(s.frame_count(), ScalarField(s.grid));
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
        const ScalarField& sig = s.frames[t];
        ScalarField& c = out.frames[t];
        for (std::size_t i = 0; i < n; ++i) {
            if (!(sig[i] > 0.0) || !(s0[i] > 0.0)) {
                c[i] = 0.0;
                ++rep.flagged;
                continue;
            }
            double v = -kappa * std::log(sig[i] / s0[i]);
            if (v < 0.0) {
                v = 0.0;
                ++rep.clamped;
            }
            c[i] = v;
        }
    }
    if (report) *report = rep;
    return out;
}

VolumeSeries add_rician_noise(const VolumeSeries& s, double level, uint64_t seed) {
    s.validate();
    if (!(level >= 0.0) || !std::isfinite(level))
        throw std::invalid_argument("noise level must be finite and non-negative");
    VolumeSeries out = s;
    if (level == 0.0) return out;
    const std::size_t n = s.grid.size();
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, s.frames[t][i]);
        const double sigma = level * mx;
        if (sigma == 0.0) continue;
        Rng rng(Rng::mix(seed, t));
        ScalarField& f = out.frames[t];
        for (std::size_t i = 0; i < n; ++i) {
            const double a = f[i] + sigma * rng.normal();
            const double b = sigma * rng.normal();
            f[i] = std::sqrt(a * a + b * b);
        }
    }
    return out;
}

// ---- container -------------------------------------------------------------

static std::string payload_name(const std::string& header_path) {
    fs::path p(header_path);
    p.replace_extension(".raw");
    return p.filename().string();
}

static void write_payload_f32(const std::string& path, const VolumeSeries& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open payload for writing: " + path);
    std::vector<unsigned char> buf;
    buf.reserve(s.grid.size() * 4);
    for (const auto& fr : s.frames) {
        buf.clear();
        for (double v : fr.a) {
            const float x = (float)v;
            uint32_t u;
            std::memcpy(&u, &x, 4);
            buf.push_back((unsigned char)(u & 0xff));
            buf.push_back((unsigned char)((u >> 8) & 0xff));
            buf.push_back((unsigned char)((u >> 16) & 0xff));
            buf.push_back((unsigned char)((u >> 24) & 0xff));
        }
        f.write((const char*)buf.data(), (std::streamsize)buf.size());
    }
    if (!f) throw std::runtime_error("short write on payload: " + path);
}

static json header_common(const Grid3& g, double dt_s, std::size_t frames,
                          const char* dtype, const std::string& data_file,
                          const std::map<std::string, std::string>& meta) {
    json h;
    h["magic"] = "PFVS";
    h["version"] = 1;
    h["dims"] = {g.nx, g.ny, g.nz};
    h["spacing_mm"] = {g.dx, g.dy, g.dz};
    h["dt_s"] = dt_s;
    h["frames"] = frames;
    h["dtype"] = dtype;
    h["data_file"] = data_file;
    h["meta"] = meta;
    return h;
}

void write_series(const VolumeSeries& s, const std::string& header_path) {
    s.validate();
    const std::string dname = payload_name(header_path);
    json h = header_common(s.grid, s.dt_s, s.frame_count(), "f32le", dname, s.meta);
    std::ofstream hf(header_path);
    if (!hf) throw std::runtime_error("cannot open header for writing: " + header_path);
    hf << h.dump(2) << "\n";
    if (!hf) throw std::runtime_error("short write on header: " + header_path);
    write_payload_f32((fs::path(header_path).parent_path() / dname).string(), s);
}

static json read_header(const std::string& header_path) {
    std::ifstream hf(header_path);
    if (!hf) throw std::runtime_error("cannot open header: " + header_path);
    json h;
    try {
        hf >> h;
    } catch (const std::exception& e) {
        throw std::runtime_error("malformed header " + header_path + ": " + e.what());
    }
    if (!h.contains("magic") || h["magic"] != "PFVS")
        throw std::runtime_error("bad magic in " + header_path);
    if (!h.contains("version") || h["version"] != 1)
        throw std::runtime_error("unsupported container version in " + header_path);
    for (const char* k : {"dims", "spacing_mm", "dt_s", "frames", "dtype", "data_file"})
        if (!h.contains(k))
            throw std::runtime_error(std::string("missing header key '") + k + "' in " + header_path);
    return h;
}

static std::vector<unsigned char> read_payload(const std::string& header_path,
                                               const json& h, std::size_t expected_bytes) {
    const std::string dname = h["data_file"].get<std::string>();
    const std::string dpath = (fs::path(header_path).parent_path() / dname).string();
    std::ifstream df(dpath, std::ios::binary | std::ios::ate);
    if (!df) throw std::runtime_error("cannot open payload: " + dpath);
    const std::size_t actual = (std::size_t)df.tellg();
    if (actual != expected_bytes)
        throw std::runtime_error("payload byte count mismatch in " + dpath + ": expected " +
                                 std::to_string(expected_bytes) + ", got " + std::to_string(actual));
    df.seekg(0);
    std::vector<unsigned char> buf(expected_bytes);
    df.read((char*)buf.data(), (std::streamsize)expected_bytes);
    if (!df) throw std::runtime_error("short read on payload: " + dpath);
    return buf;
}

static Grid3 grid_from_header(const json& h, const std::string& header_path) {
    const auto dims = h["dims"];
    const auto sp = h["spacing_mm"];
    if (!dims.is_array() || dims.size() != 3 || !sp.is_array() || sp.size() != 3)
        throw std::runtime_error("dims/spacing_mm must be length-3 arrays in " + header_path);
    try {
        return Grid3(dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>(),
                     sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("invalid grid in ") + header_path + ": " + e.what());
    }
}

VolumeSeries read_series(const std::string& header_path) {
    const json h = read_header(header_path);
    if (h["dtype"] != "f32le")
        throw std::runtime_error("expected dtype f32le in " + header_path);
    VolumeSeries s;
    s.grid = grid_from_header(h, header_path);
    s.dt_s = h["dt_s"].get<double>();
    if (!(s.dt_s >= 0.0) || !std::isfinite(s.dt_s))
        throw std::runtime_error("invalid dt_s in " + header_path);
    const std::size_t frames = h["frames"].get<std::size_t>();
    if (frames < 1) throw std::runtime_error("frames must be at least 1 in " + header_path);
    if (h.contains("meta"))
        for (auto& [k, v] : h["meta"].items()) s.meta[k] = v.get<std::string>();

    const std::size_t n = s.grid.size();
    const auto buf = read_payload(header_path, h, frames * n * 4);
    s.frames.assign(frames, ScalarField(s.grid));
    long long clamped = 0;
    std::size_t off = 0;
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t i = 0; i < n; ++i, off += 4) {
            uint32_t u = (uint32_t)buf[off] | ((uint32_t)buf[off + 1] << 8) |
                         ((uint32_t)buf[off + 2] << 16) | ((uint32_t)buf[off + 3] << 24);
            float x;
            std::memcpy(&x, &u, 4);
            if (!std::isfinite(x))
                throw std::runtime_error("non-finite payload value in " + header_path);
            double v = (double)x;
            if (v < 0.0) {
                v = 0.0;
                ++clamped;
            }
            s.frames[t][i] = v;
        }
    if (clamped > 0) s.meta["clamped_negatives"] = std::to_string(clamped);
    return s;
}

void write_mask(const DomainMask& m, const std::string& header_path) {
    const std::string dname = payload_name(header_path);
    json h = header_common(m.grid, 0.0, 1, "u8", dname, {});
    std::ofstream hf(header_path);
    if (!hf) throw std::runtime_error("cannot open header for writing: " + header_path);
    hf << h.dump(2) << "\n";
    const std::string dpath = (fs::path(header_path).parent_path() / dname).string();
    std::ofstream df(dpath, std::ios::binary);
    if (!df) throw std::runtime_error("cannot open payload for writing: " + dpath);
    df.write((const char*)m.inside.data(), (std::streamsize)m.inside.size());
    if (!df) throw std::runtime_error("short write on payload: " + dpath);
}

DomainMask read_mask(const std::string& header_path, bool dirichlet_slabs) {
    const json h = read_header(header_path);
    if (h["dtype"] != "u8")
        throw std::runtime_error("expected dtype u8 in " + header_path);
    const Grid3 g = grid_from_header(h, header_path);
    if (h["frames"].get<std::size_t>() != 1)
        throw std::runtime_error("mask container must hold exactly 1 frame: " + header_path);
    auto buf = read_payload(header_path, h, g.size());
    std::vector<uint8_t> inside(buf.begin(), buf.end());
    for (auto v : inside)
        if (v > 1) throw std::runtime_error("mask values must be 0 or 1 in " + header_path);
    return DomainMask::classify(g, std::move(inside), dirichlet_slabs);
}

// ---- exports ---------------------------------------------------------------

void export_slice_pgm(const ScalarField& f, int axis, int index,
                      double lo, double hi, const std::string& path) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("axis must be 0, 1 or 2");
    if (index < 0 || index >= f.grid.dim(axis))
        throw std::invalid_argument("slice index out of range");
    if (!(hi > lo)) throw std::invalid_argument("pgm range requires hi > lo");
    const int a0 = axis == 0 ? 1 : 0;          // in-plane axes, low first
    const int a1 = axis == 2 ? 1 : 2;
    const int w = f.grid.dim(a0);
    const int hgt = f.grid.dim(a1);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open pgm for writing: " + path);
    out << "P5\n" << w << " " << hgt << "\n65535\n";
    const double scale = 65535.0 / (hi - lo);
    std::vector<unsigned char> row((std::size_t)w * 2);
    int c[3];
    c[axis] = index;
    for (int b = 0; b < hgt; ++b) {
        c[a1] = b;
        for (int a = 0; a < w; ++a) {
            c[a0] = a;
            const double v = f.at(c[0], c[1], c[2]);
            long q = std::lround((v - lo) * scale);
            q = std::min(65535L, std::max(0L, q));
            row[(std::size_t)a * 2] = (unsigned char)((q >> 8) & 0xff);
            row[(std::size_t)a * 2 + 1] = (unsigned char)(q & 0xff);
        }
        out.write((const char*)row.data(), (std::streamsize)row.size());
    }
    if (!out) throw std::runtime_error("short write on pgm: " + path);
}

std::string format_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

static std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

void export_csv(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<CsvCell>>& rows) {
    if (header.empty()) throw std::invalid_argument("csv header row is required");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open csv for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << csv_escape(header[i]);
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("csv row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "");
            if (std::holds_alternative<double>(row[i]))
                out << format_g9(std::get<double>(row[i]));
            else
                out << csv_escape(std::get<std::string>(row[i]));
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("short write on csv: " + path);
}

} // namespace pdeflow
