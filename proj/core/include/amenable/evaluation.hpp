#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amenable/tasks.hpp"

namespace amenable {

/// ceil((1 - k) H), robust to representation error in k.
std::size_t retained_count(std::size_t h, double k);

/// Positions (ascending) of the ceil((1-k)H) highest-scored samples. Ties
/// favour the smaller id; empty `ids` means ids equal positions. Throws when
/// k is outside [0,1) or nothing would be retained.
std::vector<std::size_t> reject_lowest(std::span<const double> scores, std::span<const std::size_t> ids, double k);

/// Membership of the rejected (bottom-k) set, aligned with `scores`.
std::vector<bool> bottom_set(std::span<const double> scores, std::span<const std::size_t> ids, double k);

struct CurvePoint {
  double k = 0.0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over runs; 0 for one run
  std::size_t n_retained = 0;
  std::vector<double> per_run;
};

struct RejectionCurve {
  std::vector<CurvePoint> points;
};

/// One run's holdout inputs to a curve: controller scores and per-sample
/// task performance (1 - l, or -l for MAE).
struct ScoredHoldout {
  std::vector<double> scores;
  std::vector<double> performance;
};

/// Mean performance on the retained samples at each k, aggregated over runs.
/// k values must be strictly increasing in [0,1).
RejectionCurve rejection_curve(std::span<const ScoredHoldout> runs, std::span<const std::size_t> ids,
                               std::span<const double> ks);

/// Scores the holdout with each (controller, predictor) pair and builds the
/// curve; the k = 0 point is the non-selective baseline of each predictor.
struct TrainedPair {
  const nn::Network* controller = nullptr;
  const nn::Network* predictor = nullptr;
};
ScoredHoldout score_holdout(const TaskSpec& task, const TrainedPair& pair, const TaskData& holdout);
RejectionCurve rejection_sweep(const TaskSpec& task, std::span<const TrainedPair> runs, const TaskData& holdout,
                               std::span<const double> ks);

/// 2 x 2 counts; "positive" means low quality. A is the prediction (rows),
/// B the reference (columns): FP = low by A only, FN = low by B only.
struct ContingencyTable {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  ContingencyTable transposed() const { return {tp, fn, fp, tn}; }
  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

inline constexpr const char* kContingencyConvention = "positive=low quality; tp=low by both; fp=low by a only; fn=low by b only";

ContingencyTable contingency(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const std::size_t> ids, double k_a, double k_b);
/// Reference given as labels (true = low quality).
ContingencyTable contingency(std::span<const double> scores_a, std::span<const std::size_t> ids, double k_a,
                             const std::vector<bool>& low_b);
ContingencyTable contingency(const std::vector<bool>& low_a, const std::vector<bool>& low_b);

double cohens_kappa(const ContingencyTable& t);

enum class Quadrant { kTP = 0, kFP = 1, kFN = 2, kTN = 3 };
std::string to_string(Quadrant q);

struct QuadrantReport {
  std::vector<Quadrant> assignment;             // per sample
  std::array<std::vector<std::size_t>, 4> ids;  // per quadrant
  std::array<double, 4> median_score{};         // NaN for an empty quadrant
};

/// Splits samples by bottom-k membership of the task-specific (A) and
/// task-agnostic (B) rankings and takes the median `shaped` score of each.
QuadrantReport quadrant_report(std::span<const double> ts_scores, std::span<const double> ta_scores,
                               std::span<const double> shaped_scores, std::span<const std::size_t> ids, double k);

/// Probability that a positive sample has a higher score than a negative
/// one (ties count 1/2). Throws when either class is empty.
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

/// Rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> v);
double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> v);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// One-sided paired t-test of H1: mean(x - y) > 0.
TTestResult paired_t_test_greater(std::span<const double> x, std::span<const double> y);

void write_curve_csv(const std::filesystem::path& path, const RejectionCurve& curve, const std::string& run_id);
void write_table_csv(const std::filesystem::path& path, const ContingencyTable& t, const std::string& run_id);
void write_quadrants_csv(const std::filesystem::path& path, const QuadrantReport& q, std::span<const std::size_t> ids,
                         std::span<const double> ts, std::span<const double> ta, std::span<const double> shaped,
                         const std::vector<bool>& artefact, const std::vector<bool>& hard, const std::string& run_id);

/// Line chart with one polyline per run and a mean line; axes labeled.
void write_curve_svg(const std::filesystem::path& path, const RejectionCurve& curve, const std::string& title,
                     const std::string& metric_label);

}  // namespace amenable
