#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace respvad {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

Confusion confusion_counts(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels);

std::vector<std::uint8_t> binarize(std::span<const double> probs, double threshold = 0.5);

// nullopt marks an undefined value (e.g. precision with tp + fp = 0).
struct Metrics {
    std::optional<double> accuracy, precision, recall, f1, auroc;
    Confusion counts;
};

// Counts at prob >= threshold; auroc is undefined for single-class labels.
Metrics metrics(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold = 0.5);

// Trapezoidal area under the ROC with tied scores grouped into one step.
// Throws SingleClassError.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct RocPoint {
    double fpr, tpr, threshold;
};
struct PrPoint {
    double recall, precision, threshold;
};

// One point per distinct score, descending threshold; the ROC starts at
// (0, 0) with threshold +inf.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Writes roc.csv (fpr,tpr,threshold) and pr.csv (recall,precision,threshold).
void export_curves(std::span<const double> scores, std::span<const std::uint8_t> labels,
                   const std::filesystem::path& dir);

inline constexpr double kDefaultMatchWindowS = 2.0;

// Signed (prediction - ground truth) offsets, in samples, for every ground
// truth transition that found a prediction transition within the window.
struct TransitionErrors {
    double fps = 0.0;
    std::vector<long long> onset_errors;
    std::vector<long long> offset_errors;
    std::size_t onset_misses = 0;
    std::size_t offset_misses = 0;

    std::vector<double> onset_errors_s() const;
    std::vector<double> offset_errors_s() const;
    std::optional<double> mean_onset_error_s() const;
    std::optional<double> mean_offset_error_s() const;

    void append(const TransitionErrors& other);
};

// Onsets are 0->1 steps, offsets 1->0. Ground-truth transitions are visited
// in time order and each takes the nearest still-unmatched predicted
// transition of the same kind within +-match_window_s (earlier wins ties).
TransitionErrors transition_errors(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels,
                                   double fps, double match_window_s = kDefaultMatchWindowS);

// CSV `bin_center_s,onset_count,offset_count` over [-window, window].
void write_transition_histogram(const TransitionErrors& errors, const std::filesystem::path& path,
                                double match_window_s = kDefaultMatchWindowS, double bin_width_s = 0.1);

// Key/value record of one evaluation run.
struct RunReport {
    std::map<std::string, std::string> tags; // model, split, mode, seed, ...
    Metrics metrics;
    TransitionErrors transitions;
};

void write_run_report(const RunReport& report, const std::filesystem::path& path);

// Parsed run report: metric and count fields as numbers (undefined values
// absent), every other key as a tag.
struct ParsedReport {
    std::map<std::string, std::string> tags;
    std::map<std::string, double> values;
};
ParsedReport read_run_report(const std::filesystem::path& path);

// Groups runs by (model, split, mode) plus an all-splits group per
// (model, mode), and writes `key = mean +- std` blocks (sample std).
void write_summary(const std::vector<ParsedReport>& runs, const std::filesystem::path& path);

} // namespace respvad
