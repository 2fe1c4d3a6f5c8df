#pragma once

#include "grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pdeflow {

// Lesion region and its mirror image across a midline plane. Regions are
// boolean per-voxel maps on the same grid as the domain mask.
struct RegionPair {
    std::vector<uint8_t> lesion;
    std::vector<uint8_t> c_lesion;
    int midline_axis = 0; // 0 = X, 1 = Y
    int midline_index = 0;
    std::size_t dropped = 0; // reflections out of bounds or out of domain
};

// Reflect the lesion across the plane axis = index, keeping only voxels that
// land inside the domain. A reflection overlapping the lesion itself or an
// empty result is an error; dropped out-of-bounds/out-of-domain voxels are
// only counted.
RegionPair mirror_mask(const std::vector<uint8_t>& lesion, int midline_axis, int midline_index,
                       const DomainMask& domain);

// Values of a field over a boolean region, voxel-major order.
std::vector<double> region_values(const ScalarField& f, const std::vector<uint8_t>& region);

// min(m_l/m_c, m_c/m_l); both means must be positive.
double rel_mean(const std::vector<double>& lesion, const std::vector<double>& clesion);

// Same ratio over sample standard deviations (n-1 denominator).
double rel_std(const std::vector<double>& lesion, const std::vector<double>& clesion);

// Absolute two-sample t statistic. Pooled variance by default, Welch behind
// the flag. Identical samples give 0; distinct means with zero variance give
// +inf (degenerate separation).
double abs_t(const std::vector<double>& lesion, const std::vector<double>& clesion,
             bool welch = false);

// Mean absolute error normalized by the in-mask maximum of the ground truth.
double mae_maxnorm(const ScalarField& est, const ScalarField& gt, const DomainMask& mask);

struct MetricRow {
    std::string map_name;
    double rel_mean = 0.0;
    double rel_std = 0.0;
    double abs_t = 0.0;
    std::size_t n_lesion = 0;
    std::size_t n_clesion = 0;
};

MetricRow region_metrics(const std::string& map_name, const ScalarField& f, const RegionPair& rp,
                         bool welch = false);

// One CSV file, one row per map: name, rel_mean, rel_std, abs_t, counts.
void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows);

} // namespace pdeflow
