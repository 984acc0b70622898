#pragma once

// Data-parallel inner loops. Every kernel has a serial reference path and an
// OpenMP path; both write each output cell from exactly one loop iteration
// with a fixed summation order, so results are bit-identical across paths and
// thread counts.

#include <cstddef>
#include <span>
#include <vector>

namespace ctfminer::kernels {

enum class ExecPolicy { Serial, Parallel };

/// Default policy used by the analytics layer.
inline constexpr ExecPolicy kDefaultPolicy = ExecPolicy::Parallel;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// One scored event positioned inside its trainee's level span.
struct PositionedEvent {
    std::size_t level_slot = 0;  ///< index into the grid's level list
    double position = 0.0;       ///< fraction of the level span, [0,1] when inside it
    double weight = 0.0;
};

/// Relative window geometry shared by all levels, fractions of a level span.
struct WindowGeometry {
    std::vector<double> starts;
    std::vector<double> ends;

    std::size_t per_level() const { return starts.size(); }
};

/// raw(t, slot*K + k) = sum of weights of trainee t's events with
/// starts[k] <= position <= ends[k]. Events are summed in input order.
Matrix accumulate_window_scores(std::span<const std::vector<PositionedEvent>> per_trainee,
                                const WindowGeometry& geometry, std::size_t level_count,
                                ExecPolicy policy = kDefaultPolicy);

enum class Normalization {
    SymmetricMedian,  ///< (x - m) / max|x - m|
    Literal,          ///< (x - m) / max(x), degenerate when max(x) <= 0
};

/// Normalizes one window's raw scores to [-1, 1]. `m` is the lower median.
std::vector<double> normalize_scores(std::span<const double> raw, Normalization mode);

/// Column-wise normalize_scores over the cells where `mask` is non-zero;
/// masked-out cells come back as 0.
Matrix normalize_windows(const Matrix& raw, const std::vector<unsigned char>& mask, Normalization mode,
                         ExecPolicy policy = kDefaultPolicy);

/// Nearest centroid per point (ties to the lowest centroid index) and the
/// squared distance to it. Points and centroids are row-major, `dims` wide.
void assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t dims,
                    std::span<int> assignment, std::span<double> distance2,
                    ExecPolicy policy = kDefaultPolicy);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace ctfminer::kernels
