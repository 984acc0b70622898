#pragma once

#include "ctfminer/canonical_json.hpp"
#include "ctfminer/event.hpp"
#include "ctfminer/filter.hpp"
#include "ctfminer/kernels.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ctfminer {

/// Event kind used for weighting: the game type name for GAME events,
/// "bash" or "msf" for commands.
std::string event_kind(const Event& e);

struct SentimentConfig {
    std::map<std::string, double> weights;
    double window_pct = 50.0;
    double step_pct = 40.0;
    std::set<std::string> scored_kinds;
    kernels::Normalization normalization = kernels::Normalization::SymmetricMedian;
    /// Joint display points merge within this fraction (percent) of the chart extent.
    double merge_radius_pct = 1.0;

    /// Engagement defaults: hints -5, solutions -20, wrong answers -1, commands +1,
    /// 50% windows advanced in 40% steps.
    static SentimentConfig engagement_defaults();

    /// Throws InvalidConfig.
    void validate() const;

    bool operator==(const SentimentConfig&) const = default;
};

Json to_json(const SentimentConfig& cfg);
/// Missing keys take engagement defaults; scored_kinds defaults to the weight keys.
SentimentConfig sentiment_config_from_json(const Json& j);

struct GridWindow {
    std::size_t index = 0;
    int level = 0;
    double start_pct = 0.0;
    double end_pct = 0.0;
};

struct LevelSpan {
    Timestamp start{};
    Timestamp end{};
};

struct MissingBoundary {
    std::string trainee_id;
    int level = 0;
    std::string reason;
};

struct WindowGrid {
    std::vector<int> levels;
    kernels::WindowGeometry geometry;
    std::vector<GridWindow> windows;
    std::vector<std::string> trainees;  ///< sorted; row order of every score matrix
    std::map<std::pair<std::string, int>, LevelSpan> spans;
    std::vector<MissingBoundary> missing;

    std::size_t windows_per_level() const { return geometry.per_level(); }
    bool included(const std::string& trainee, int level) const { return spans.contains({trainee, level}); }
    std::optional<std::size_t> level_slot(int level) const;
    std::optional<std::size_t> trainee_row(const std::string& trainee) const;
};

/// Window starts 0, step, 2*step, ... below 100%, each ending at
/// min(start + window, 100%). Positions are relative to each trainee's own
/// span from LevelStarted to the last level exit (CorrectAnswerSubmitted or
/// TrainingFinished); trainees lacking either are recorded in `missing` and
/// left out of that level's windows.
WindowGrid build_window_grid(const ActivityLog& filtered, const SentimentConfig& cfg);
WindowGrid build_window_grid(const ActivityLog& log, const SentimentConfig& cfg, const FilterSpec& filter);

/// Global window indices an event falls into (empty when outside every window).
std::vector<std::size_t> event_windows(const WindowGrid& grid, const Event& e);

struct WindowScore {
    std::string trainee_id;
    std::size_t window = 0;
    double raw = 0.0;
    double normalized = 0.0;
};

/// Raw score matrix: rows follow grid.trainees, columns the global windows.
kernels::Matrix window_score_matrix(const ActivityLog& filtered, const WindowGrid& grid,
                                    const SentimentConfig& cfg,
                                    kernels::ExecPolicy policy = kernels::kDefaultPolicy);

/// Raw scores per (trainee, window); `normalized` left at 0.
std::vector<WindowScore> window_scores(const ActivityLog& filtered, const WindowGrid& grid,
                                       const SentimentConfig& cfg);

/// Normalizes the raw scores of all trainees scored in one window.
std::vector<double> normalize_window(std::span<const double> raw,
                                     kernels::Normalization mode = kernels::Normalization::SymmetricMedian);

struct DisplayMember {
    std::string trainee_id;
    std::size_t window = 0;
};

struct DisplayPoint {
    double x = 0.0;
    double y = 0.0;
    std::vector<DisplayMember> members;
};

struct SentimentSeries {
    std::string trainee_id;
    std::vector<double> cumulative;
    std::vector<std::size_t> display_points;  ///< indices into SentimentResult::display_points
};

/// Prefix sums of one trainee's normalized values.
std::vector<double> cumulative_sum(std::span<const double> normalized);

/// Greedy merge over points ordered by (x, y, trainee): each point joins the
/// first earlier joint point whose anchor lies within the radius on both
/// axes; the radius is `radius_pct` percent of the extent of each axis.
std::vector<DisplayPoint> merge_display_points(const std::vector<std::string>& trainees,
                                               const std::vector<std::vector<double>>& cumulative,
                                               double radius_pct);

struct SentimentResult {
    SentimentConfig config;
    WindowGrid grid;
    kernels::Matrix raw;
    kernels::Matrix normalized;
    std::vector<SentimentSeries> series;
    std::vector<DisplayPoint> display_points;

    /// Mean normalized score of a trainee over one level's windows.
    double level_mean(std::size_t trainee_row, std::size_t level_slot) const;
};

SentimentResult compute_sentiment(const ActivityLog& filtered, const SentimentConfig& cfg,
                                  kernels::ExecPolicy policy = kernels::kDefaultPolicy);

Json to_json(const SentimentResult& r);

}  // namespace ctfminer
