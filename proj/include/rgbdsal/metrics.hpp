// Saliency evaluation metrics and depth-contribution diagnostics.
#pragma once

#include "rgbdsal/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rgbdsal {

struct MetricReport {
  std::string dataset;
  double sm = 0.0;
  double mean_f = 0.0;
  double mae = 0.0;
  std::optional<double> e_measure;
  std::optional<double> omega1;
  std::optional<double> omega2;
  int n = 0;
  /// Images whose omega diagnostics had a zero denominator. omega2's
  /// denominator never exceeds omega1's, so this is the omega2 count.
  int invalid_omega_n = 0;
  int invalid_omega1_n = 0;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

inline constexpr double kBeta2 = 0.3;
inline constexpr int kThresholdCount = 256;

/// Mean absolute error over all pixels.
double mae(const ScalarMap& s, const BinaryMask& gt);

/// Binarises s strictly above `threshold`. Precision is 0 when nothing is
/// predicted positive; a gt without positives is an error.
PrecisionRecall precision_recall(const ScalarMap& s, const BinaryMask& gt, double threshold);

/// Weighted harmonic mean of precision and recall; 0 when both are 0.
double f_measure(double precision, double recall, double beta2 = kBeta2);

/// F-measure averaged over the 256 thresholds k/255.
double mean_f(const ScalarMap& s, const BinaryMask& gt);

/// Structure measure: alpha * object-aware + (1 - alpha) * region-aware.
double s_measure(const ScalarMap& s, const BinaryMask& gt, double alpha = 0.5);
double s_object(const ScalarMap& s, const BinaryMask& gt);
double s_region(const ScalarMap& s, const BinaryMask& gt);

/// Enhanced-alignment measure on the adaptively binarised map
/// (threshold = min(2 * mean(s), 1)), normalised by the pixel count.
double e_measure(const ScalarMap& s, const BinaryMask& gt);

inline constexpr float kOmegaHigh = 0.8f;
inline constexpr float kDepthLow = 0.1f;

/// Share of confident omega pixels (omega > 0.8) lying in the background.
/// Empty when no pixel is confident.
std::optional<double> omega1(const ScalarMap& omega, const BinaryMask& gt);

/// Share of confident background omega pixels where dsal < 0.1.
std::optional<double> omega2(const ScalarMap& omega, const BinaryMask& gt, const ScalarMap& dsal);

struct EvalOptions {
  std::string dataset = "dataset";
  bool with_e_measure = false;
  /// When both are given, omega1/omega2 are evaluated per image.
  const std::map<std::string, ScalarMap>* omegas = nullptr;
  const std::map<std::string, ScalarMap>* dsals = nullptr;
};

/// Per-image metrics averaged over images. Invalid omega diagnostics are
/// left out of their averages and counted instead.
MetricReport evaluate_dataset(const std::map<std::string, ScalarMap>& predictions,
                              const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts = {});

/// CSV header: dataset,sm,meanf,mae,emeasure,omega1,omega2,n,invalid_omega_n
std::string csv_header();
std::string csv_row(const MetricReport& r);
/// Parses rows written by csv_row; blank optional cells stay empty.
std::vector<MetricReport> parse_csv(const std::string& text);

/// Aligned text table, one row per report.
std::string format_table(const std::vector<MetricReport>& rows);

}  // namespace rgbdsal
