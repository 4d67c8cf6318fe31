#include "rgbdsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace rgbdsal {

namespace {

constexpr double kMachineEps = std::numeric_limits<double>::epsilon();

Eigen::ArrayXXd as_double(const ScalarMap& m) { return m.values().cast<double>(); }

/// Number of thresholds k/255 (k = 0..255) that `v` strictly exceeds.
int thresholds_exceeded(float v) {
  const double s = v;
  int k = static_cast<int>(std::floor(s * 255.0));
  k = std::clamp(k, -1, 255);
  while (k + 1 <= 255 && s > (k + 1) / 255.0) ++k;
  while (k >= 0 && !(s > k / 255.0)) --k;
  return k + 1;
}

long count_positive(const BinaryMask& gt) { return static_cast<long>(gt.values().sum()); }

double matlab_round(double x) { return std::round(x); }  // halves away from zero

double object_score(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sigma = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sigma + kMachineEps);
}

double block_ssim(const Eigen::ArrayXXd& pred, const Eigen::ArrayXXd& gt) {
  const double n = static_cast<double>(pred.size());
  if (pred.size() == 0) return 0.0;
  const double x = pred.mean();
  const double y = gt.mean();
  const double sx = (pred - x).square().sum() / (n - 1.0 + kMachineEps);
  const double sy = (gt - y).square().sum() / (n - 1.0 + kMachineEps);
  const double sxy = ((pred - x) * (gt - y)).sum() / (n - 1.0 + kMachineEps);
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx + sy);
  if (alpha != 0.0) return alpha / (beta + kMachineEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

}  // namespace

double mae(const ScalarMap& s, const BinaryMask& gt) {
  require_same_shape(s, gt, "mae");
  return (as_double(s) - as_double(gt)).abs().mean();
}

PrecisionRecall precision_recall(const ScalarMap& s, const BinaryMask& gt, double threshold) {
  require_same_shape(s, gt, "precision_recall");
  long tp = 0, predicted = 0;
  const long positives = count_positive(gt);
  if (positives == 0) throw_data("undefined recall: ground truth has no positive pixel");
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      if (static_cast<double>(s(r, c)) > threshold) {
        ++predicted;
        if (gt.map()(r, c) == 1.0f) ++tp;
      }
    }
  }
  PrecisionRecall pr;
  pr.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
  pr.recall = static_cast<double>(tp) / static_cast<double>(positives);
  return pr;
}

double f_measure(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (beta2 + 1.0) * precision * recall / denom;
}

double mean_f(const ScalarMap& s, const BinaryMask& gt) {
  require_same_shape(s, gt, "mean_f");
  const long positives = count_positive(gt);
  if (positives == 0) throw_data("undefined recall: ground truth has no positive pixel");
  // histogram of "how many thresholds does this pixel pass", split by label
  std::array<long, kThresholdCount + 1> hist_pos{}, hist_neg{};
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      const int k = thresholds_exceeded(s(r, c));
      (gt.map()(r, c) == 1.0f ? hist_pos : hist_neg)[k]++;
    }
  }
  // pixels passing threshold k are those with count > k
  std::array<double, kThresholdCount> f{};
  long tp = 0, fp = 0;
  for (int k = kThresholdCount - 1; k >= 0; --k) {
    tp += hist_pos[k + 1];
    fp += hist_neg[k + 1];
    const double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    f[k] = f_measure(precision, recall);
  }
  // summed in threshold order so the result matches a plain per-threshold loop
  double total = 0.0;
  for (double v : f) total += v;
  return total / kThresholdCount;
}

double s_object(const ScalarMap& s, const BinaryMask& gt) {
  require_same_shape(s, gt, "s_object");
  const Eigen::ArrayXXd p = as_double(s);
  const Eigen::ArrayXXd g = as_double(gt);
  std::vector<double> fg, bg;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (g(i) == 1.0) {
      fg.push_back(p(i));
    } else {
      bg.push_back(1.0 - p(i));
    }
  }
  const double u = g.mean();
  return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

double s_region(const ScalarMap& s, const BinaryMask& gt) {
  require_same_shape(s, gt, "s_region");
  const Eigen::ArrayXXd p = as_double(s);
  const Eigen::ArrayXXd g = as_double(gt);
  const int h = s.height(), w = s.width();
  // centroid as 1-based split counts: columns [0, x) and rows [0, y) form the top-left block
  int x, y;
  const double total = g.sum();
  if (total == 0.0) {
    x = static_cast<int>(matlab_round(w / 2.0));
    y = static_cast<int>(matlab_round(h / 2.0));
  } else {
    double sx = 0.0, sy = 0.0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        sx += g(r, c) * (c + 1);
        sy += g(r, c) * (r + 1);
      }
    }
    x = static_cast<int>(matlab_round(sx / total));
    y = static_cast<int>(matlab_round(sy / total));
  }
  const double area = static_cast<double>(h) * w;
  const double w1 = x * y / area;
  const double w2 = (w - x) * y / area;
  const double w3 = x * (h - y) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double q1 = block_ssim(p.block(0, 0, y, x), g.block(0, 0, y, x));
  const double q2 = block_ssim(p.block(0, x, y, w - x), g.block(0, x, y, w - x));
  const double q3 = block_ssim(p.block(y, 0, h - y, x), g.block(y, 0, h - y, x));
  const double q4 = block_ssim(p.block(y, x, h - y, w - x), g.block(y, x, h - y, w - x));
  return w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;
}

double s_measure(const ScalarMap& s, const BinaryMask& gt, double alpha) {
  require_same_shape(s, gt, "s_measure");
  const double y = gt.values().cast<double>().mean();
  const double x = s.values().cast<double>().mean();
  if (y == 0.0) return 1.0 - x;
  if (y == 1.0) return x;
  const double q = alpha * s_object(s, gt) + (1.0 - alpha) * s_region(s, gt);
  return std::max(0.0, q);
}

double e_measure(const ScalarMap& s, const BinaryMask& gt) {
  require_same_shape(s, gt, "e_measure");
  const Eigen::ArrayXXd p = as_double(s);
  const Eigen::ArrayXXd g = as_double(gt);
  const double threshold = std::min(2.0 * p.mean(), 1.0);
  const Eigen::ArrayXXd fm = (p >= threshold).cast<double>();
  Eigen::ArrayXXd enhanced;
  if (g.sum() == 0.0) {
    enhanced = 1.0 - fm;
  } else if (g.sum() == static_cast<double>(g.size())) {
    enhanced = fm;
  } else {
    const Eigen::ArrayXXd af = fm - fm.mean();
    const Eigen::ArrayXXd ag = g - g.mean();
    const Eigen::ArrayXXd align = 2.0 * (ag * af) / (ag * ag + af * af + kMachineEps);
    enhanced = (align + 1.0).square() / 4.0;
  }
  return enhanced.sum() / static_cast<double>(g.size());
}

std::optional<double> omega1(const ScalarMap& omega, const BinaryMask& gt) {
  require_same_shape(omega, gt, "omega1");
  long confident = 0, background = 0;
  for (int r = 0; r < omega.height(); ++r) {
    for (int c = 0; c < omega.width(); ++c) {
      if (omega(r, c) > kOmegaHigh) {
        ++confident;
        if (gt.map()(r, c) == 0.0f) ++background;
      }
    }
  }
  if (confident == 0) return std::nullopt;
  return static_cast<double>(background) / static_cast<double>(confident);
}

std::optional<double> omega2(const ScalarMap& omega, const BinaryMask& gt, const ScalarMap& dsal) {
  require_same_shape(omega, gt, "omega2");
  require_same_shape(omega, dsal, "omega2");
  long denom = 0, num = 0;
  for (int r = 0; r < omega.height(); ++r) {
    for (int c = 0; c < omega.width(); ++c) {
      if (omega(r, c) > kOmegaHigh && gt.map()(r, c) == 0.0f) {
        ++denom;
        if (dsal(r, c) < kDepthLow) ++num;
      }
    }
  }
  if (denom == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(denom);
}

MetricReport evaluate_dataset(const std::map<std::string, ScalarMap>& predictions,
                              const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts) {
  std::vector<std::string> missing;
  for (const auto& [id, m] : predictions) {
    if (!gts.count(id)) missing.push_back(id + " (no ground truth)");
  }
  for (const auto& [id, m] : gts) {
    if (!predictions.count(id)) missing.push_back(id + " (no prediction)");
  }
  const bool with_omega = opts.omegas && opts.dsals;
  if (with_omega) {
    for (const auto& [id, m] : predictions) {
      if (!opts.omegas->count(id)) missing.push_back(id + " (no omega map)");
      if (!opts.dsals->count(id)) missing.push_back(id + " (no depth saliency map)");
    }
  }
  if (!missing.empty()) {
    std::string msg = "id mismatch:";
    for (const auto& m : missing) msg += " " + m;
    throw_data(msg);
  }

  MetricReport rep;
  rep.dataset = opts.dataset;
  double em = 0.0, o1 = 0.0, o2 = 0.0;
  int o1n = 0, o2n = 0;
  for (const auto& [id, pred] : predictions) {
    const BinaryMask& gt = gts.at(id);
    rep.sm += s_measure(pred, gt);
    rep.mean_f += mean_f(pred, gt);
    rep.mae += mae(pred, gt);
    if (opts.with_e_measure) em += e_measure(pred, gt);
    if (with_omega) {
      const ScalarMap& om = opts.omegas->at(id);
      if (auto v = omega1(om, gt)) {
        o1 += *v;
        ++o1n;
      } else {
        ++rep.invalid_omega1_n;
      }
      if (auto v = omega2(om, gt, opts.dsals->at(id))) {
        o2 += *v;
        ++o2n;
      } else {
        ++rep.invalid_omega_n;
      }
    }
    ++rep.n;
  }
  if (rep.n > 0) {
    rep.sm /= rep.n;
    rep.mean_f /= rep.n;
    rep.mae /= rep.n;
    if (opts.with_e_measure) rep.e_measure = em / rep.n;
  }
  if (o1n > 0) rep.omega1 = o1 / o1n;
  if (o2n > 0) rep.omega2 = o2 / o2n;
  return rep;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

std::string csv_header() { return "dataset,sm,meanf,mae,emeasure,omega1,omega2,n,invalid_omega_n"; }

std::string csv_row(const MetricReport& r) {
  return r.dataset + "," + fmt(r.sm) + "," + fmt(r.mean_f) + "," + fmt(r.mae) + "," + fmt_opt(r.e_measure) + "," +
         fmt_opt(r.omega1) + "," + fmt_opt(r.omega2) + "," + std::to_string(r.n) + "," +
         std::to_string(r.invalid_omega_n);
}

std::vector<MetricReport> parse_csv(const std::string& text) {
  std::vector<MetricReport> rows;
  std::istringstream is(text);
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line != csv_header()) throw_data("unexpected metrics CSV header: " + line);
      header = false;
      continue;
    }
    auto cells = split_csv_line(line);
    if (cells.size() != 9) throw_data("malformed metrics CSV row: " + line);
    MetricReport r;
    try {
      r.dataset = cells[0];
      r.sm = std::stod(cells[1]);
      r.mean_f = std::stod(cells[2]);
      r.mae = std::stod(cells[3]);
      r.e_measure = parse_opt(cells[4]);
      r.omega1 = parse_opt(cells[5]);
      r.omega2 = parse_opt(cells[6]);
      r.n = std::stoi(cells[7]);
      r.invalid_omega_n = std::stoi(cells[8]);
    } catch (const std::logic_error&) {
      throw_data("malformed metrics CSV row: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_table(const std::vector<MetricReport>& rows) {
  std::size_t name_w = 7;
  for (const auto& r : rows) name_w = std::max(name_w, r.dataset.size());
  std::ostringstream os;
  auto cell = [&](const std::string& s) { os << " | " << std::setw(7) << s; };
  os << std::left << std::setw(static_cast<int>(name_w)) << "Method" << std::right;
  for (const char* h : {"Sm", "meanF", "MAE", "Em", "w1", "w2"}) cell(h);
  os << " | " << std::setw(4) << "n" << "\n";
  os << std::string(name_w, '-') << std::string(6 * 10 + 7, '-') << "\n";
  auto f3 = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(name_w)) << r.dataset << std::right;
    cell(f3(r.sm));
    cell(f3(r.mean_f));
    cell(f3(r.mae));
    cell(f3(r.e_measure));
    cell(f3(r.omega1));
    cell(f3(r.omega2));
    os << " | " << std::setw(4) << r.n << "\n";
  }
  return os.str();
}

}  // namespace rgbdsal
