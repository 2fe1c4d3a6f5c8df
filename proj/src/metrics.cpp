#include "metrics.hpp"

#include "data_io.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdeflow {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

struct Moments {
    double mean = 0.0;
    double var = 0.0; // sample variance, n-1
    std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = v.size();
    if (m.n == 0) return m;
    double s = 0.0;
    for (double x : v) s += x;
    m.mean = s / (double)m.n;
    if (m.n >= 2) {
        double q = 0.0;
        for (double x : v) q += (x - m.mean) * (x - m.mean);
        m.var = q / (double)(m.n - 1);
    }
    return m;
}

double min_ratio(double a, double b) {
    return a < b ? a / b : b / a;
}

} // namespace

RegionPair mirror_mask(const std::vector<uint8_t>& lesion, int midline_axis, int midline_index,
                       const DomainMask& domain) {
    const Grid3& g = domain.grid;
    require(lesion.size() == g.size(), "lesion map size mismatch");
    require(midline_axis == 0 || midline_axis == 1, "midline axis must be X or Y");
    require(midline_index >= 0 && midline_index < g.dim(midline_axis),
            "midline index out of range");

    RegionPair rp;
    rp.lesion = lesion;
    rp.c_lesion.assign(g.size(), 0);
    rp.midline_axis = midline_axis;
    rp.midline_index = midline_index;

    std::size_t n_lesion = 0, n_mirror = 0;
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                std::size_t i = g.idx(x, y, z);
                if (!lesion[i]) continue;
                ++n_lesion;
                int rx = x, ry = y;
                if (midline_axis == 0)
                    rx = 2 * midline_index - x;
                else
                    ry = 2 * midline_index - y;
                if (rx < 0 || rx >= g.nx || ry < 0 || ry >= g.ny) {
                    ++rp.dropped;
                    continue;
                }
                std::size_t j = g.idx(rx, ry, z);
                if (!domain.is_inside(j)) {
                    ++rp.dropped;
                    continue;
                }
                if (lesion[j])
                    throw std::invalid_argument(
                        "mirrored region overlaps the lesion; midline is wrong or the "
                        "lesion crosses it");
                rp.c_lesion[j] = 1;
                ++n_mirror;
            }
    require(n_lesion > 0, "lesion region is empty");
    require(n_mirror > 0, "mirrored region is empty after dropping");
    return rp;
}

std::vector<double> region_values(const ScalarField& f, const std::vector<uint8_t>& region) {
    require(region.size() == f.size(), "region map size mismatch");
    std::vector<double> out;
    for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i]) out.push_back(f[i]);
    return out;
}

double rel_mean(const std::vector<double>& lesion, const std::vector<double>& clesion) {
    require(!lesion.empty() && !clesion.empty(), "empty region");
    double ml = moments(lesion).mean;
    double mc = moments(clesion).mean;
    if (ml <= 0.0 || mc <= 0.0)
        throw std::domain_error("rel_mean undefined: nonpositive region mean");
    return min_ratio(ml, mc);
}

double rel_std(const std::vector<double>& lesion, const std::vector<double>& clesion) {
    require(lesion.size() >= 2 && clesion.size() >= 2, "need at least two voxels per region");
    double sl = std::sqrt(moments(lesion).var);
    double sc = std::sqrt(moments(clesion).var);
    if (sl <= 0.0 || sc <= 0.0)
        throw std::domain_error("rel_std undefined: constant region");
    return min_ratio(sl, sc);
}

double abs_t(const std::vector<double>& lesion, const std::vector<double>& clesion, bool welch) {
    require(lesion.size() >= 2 && clesion.size() >= 2, "need at least two voxels per region");
    Moments a = moments(lesion);
    Moments b = moments(clesion);
    double dm = a.mean - b.mean;
    double denom;
    if (welch) {
        denom = std::sqrt(a.var / (double)a.n + b.var / (double)b.n);
    } else {
        double sp2 = ((double)(a.n - 1) * a.var + (double)(b.n - 1) * b.var) /
                     (double)(a.n + b.n - 2);
        denom = std::sqrt(sp2 * (1.0 / (double)a.n + 1.0 / (double)b.n));
    }
    if (denom == 0.0) {
        if (dm == 0.0) return 0.0;
        return std::numeric_limits<double>::infinity(); // degenerate separation
    }
    return std::abs(dm / denom);
}

double mae_maxnorm(const ScalarField& est, const ScalarField& gt, const DomainMask& mask) {
    require(est.grid.same_shape(gt.grid) && gt.grid.same_shape(mask.grid), "grid mismatch");
    double mx = -std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (mask.is_inside(i)) {
            mx = std::max(mx, gt[i]);
            ++n;
        }
    require(n > 0, "empty mask");
    if (!(mx > 0.0)) throw std::domain_error("mae_maxnorm undefined: ground-truth max is not positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (mask.is_inside(i)) acc += std::abs(est[i] - gt[i]);
    return acc / ((double)n * mx);
}

MetricRow region_metrics(const std::string& map_name, const ScalarField& f, const RegionPair& rp,
                         bool welch) {
    std::vector<double> vl = region_values(f, rp.lesion);
    std::vector<double> vc = region_values(f, rp.c_lesion);
    MetricRow row;
    row.map_name = map_name;
    row.rel_mean = rel_mean(vl, vc);
    row.rel_std = rel_std(vl, vc);
    row.abs_t = abs_t(vl, vc, welch);
    row.n_lesion = vl.size();
    row.n_clesion = vc.size();
    return row;
}

void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    std::vector<std::vector<CsvCell>> cells;
    for (const auto& r : rows)
        cells.push_back({r.map_name, r.rel_mean, r.rel_std, r.abs_t, (double)r.n_lesion,
                         (double)r.n_clesion});
    export_csv(path, {"map", "rel_mean", "rel_std", "abs_t", "n_lesion", "n_clesion"}, cells);
}

} // namespace pdeflow
