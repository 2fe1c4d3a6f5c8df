#pragma once

#include "grid.hpp"

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace pdeflow {

// Time series of volumes on one grid. Frame 0 is t = 0, frames are dt_s apart.
// Concentration payloads are non-negative; readers clamp and count violations.
struct VolumeSeries {
    Grid3 grid;
    double dt_s = 0.0;
    std::vector<ScalarField> frames;
    std::map<std::string, std::string> meta;

    std::size_t frame_count() const { return frames.size(); }
    void validate() const; // shape/frame consistency, throws on structural errors
};

// Raw MR signal magnitudes use the same layout.
using SignalSeries = VolumeSeries;

struct ConversionReport {
    long long flagged = 0; // S <= 0 or S0 <= 0, output forced to 0
    long long clamped = 0; // negative concentration clamped to 0
};

// C = -kappa * ln(S / S0), S0 = per-voxel mean of the first baseline_frames.
VolumeSeries signal_to_concentration(const SignalSeries& s, int baseline_frames,
                                     double kappa, ConversionReport* report = nullptr);

// C' = sqrt((C + n1)^2 + n2^2), n1 and n2 zero-mean normal with sigma =
// level * frame max, one independent substream per frame. level 0 copies.
VolumeSeries add_rician_noise(const VolumeSeries& s, double level, uint64_t seed);

// Container: JSON header next to a raw little-endian payload file.
void write_series(const VolumeSeries& s, const std::string& header_path);
VolumeSeries read_series(const std::string& header_path);

void write_mask(const DomainMask& m, const std::string& header_path);
DomainMask read_mask(const std::string& header_path, bool dirichlet_slabs);

// 16-bit P5 slice export; values mapped linearly from [lo, hi] and clamped.
void export_slice_pgm(const ScalarField& f, int axis, int index,
                      double lo, double hi, const std::string& path);

// CSV with a fixed header row; numeric cells use 9 significant digits.
using CsvCell = std::variant<std::string, double>;
void export_csv(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<CsvCell>>& rows);

std::string format_g9(double v);

} // namespace pdeflow
