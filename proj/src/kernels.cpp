#include "ctfminer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctfminer::kernels {

namespace {

void score_row(const std::vector<PositionedEvent>& events, const WindowGeometry& g, double* row) {
    const std::size_t per_level = g.per_level();
    for (const auto& e : events) {
        for (std::size_t k = 0; k < per_level; ++k) {
            if (e.position >= g.starts[k] && e.position <= g.ends[k]) {
                row[e.level_slot * per_level + k] += e.weight;
            }
        }
    }
}

void normalize_column(const Matrix& raw, const std::vector<unsigned char>& mask, Normalization mode,
                      std::size_t col, Matrix& out) {
    std::vector<double> values;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < raw.rows; ++r) {
        if (mask[r * raw.cols + col]) {
            values.push_back(raw(r, col));
            rows.push_back(r);
        }
    }
    if (values.empty()) return;
    const auto norm = normalize_scores(values, mode);
    for (std::size_t i = 0; i < rows.size(); ++i) out(rows[i], col) = norm[i];
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Matrix accumulate_window_scores(std::span<const std::vector<PositionedEvent>> per_trainee,
                                const WindowGeometry& geometry, std::size_t level_count, ExecPolicy policy) {
    Matrix out(per_trainee.size(), level_count * geometry.per_level());
    const auto n = static_cast<std::ptrdiff_t>(per_trainee.size());
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t t = 0; t < n; ++t) {
            score_row(per_trainee[t], geometry, out.data.data() + t * out.cols);
        }
    } else {
        for (std::ptrdiff_t t = 0; t < n; ++t) {
            score_row(per_trainee[t], geometry, out.data.data() + t * out.cols);
        }
    }
    return out;
}

std::vector<double> normalize_scores(std::span<const double> raw, Normalization mode) {
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    std::vector<double> sorted(raw.begin(), raw.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[(sorted.size() - 1) / 2];
    double scale = 0.0;
    if (mode == Normalization::SymmetricMedian) {
        for (double x : raw) scale = std::max(scale, std::abs(x - median));
    } else {
        scale = sorted.back();
    }
    if (!(scale > 0.0)) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::clamp((raw[i] - median) / scale, -1.0, 1.0);
    }
    return out;
}

Matrix normalize_windows(const Matrix& raw, const std::vector<unsigned char>& mask, Normalization mode,
                         ExecPolicy policy) {
    if (mask.size() != raw.data.size()) throw std::invalid_argument("mask shape does not match score matrix");
    Matrix out(raw.rows, raw.cols);
    const auto cols = static_cast<std::ptrdiff_t>(raw.cols);
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < cols; ++c) normalize_column(raw, mask, mode, c, out);
    } else {
        for (std::ptrdiff_t c = 0; c < cols; ++c) normalize_column(raw, mask, mode, c, out);
    }
    return out;
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t dims,
                    std::span<int> assignment, std::span<double> distance2, ExecPolicy policy) {
    const std::size_t k = dims == 0 ? (centroids.empty() ? 0 : 1) : centroids.size() / dims;
    const auto n = static_cast<std::ptrdiff_t>(assignment.size());
    auto one = [&](std::ptrdiff_t i) {
        const auto p = points.subspan(i * dims, dims);
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double d = squared_distance(p, centroids.subspan(c * dims, dims));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignment[i] = best;
        distance2[i] = best_d;
    };
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
    }
}

}  // namespace ctfminer::kernels
