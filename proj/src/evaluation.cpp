#include "spm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "spm/errors.hpp"

namespace spm {

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw config_error("roc_curve: score/label length mismatch");
  }
  RocCurve curve;
  for (int l : labels) {
    if (l == 1) {
      ++curve.n_pos;
    } else if (l == 0) {
      ++curve.n_neg;
    } else {
      throw config_error("roc_curve: labels must be 0 or 1");
    }
  }
  if (curve.n_pos == 0 || curve.n_neg == 0) {
    throw config_error("roc_curve: both classes must be present");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // Consume the whole tie group: equal scores are one threshold event.
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.points.push_back({s, static_cast<double>(tp) / curve.n_pos,
                            static_cast<double>(fp) / curve.n_neg});
  }
  return curve;
}

double error_at_95(const RocCurve& curve) {
  constexpr double target = 0.95;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& pt = curve.points[i];
    if (pt.tpr == target) return pt.fpr;
    if (pt.tpr > target) {
      // First crossing: interpolate from the previous point.
      const auto& prev = curve.points[i - 1];  // i > 0: curve starts at tpr 0
      const double span = pt.tpr - prev.tpr;
      const double frac = (target - prev.tpr) / span;
      return prev.fpr + frac * (pt.fpr - prev.fpr);
    }
  }
  return curve.points.back().fpr;  // unreachable: curve ends at tpr 1
}

EvalResult evaluate_model(const NetworkParams& params,
                          const std::vector<PairSample>& pairs) {
  if (pairs.empty()) throw config_error("evaluate_model: no pairs");
  EvalResult result;
  result.scores.assign(pairs.size(), 0.0);
  const auto n = static_cast<Eigen::Index>(pairs.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (Eigen::Index i = 0; i < n; ++i) {
    result.scores[static_cast<std::size_t>(i)] = predict_pair(
        params, pairs[static_cast<std::size_t>(i)].code_a,
        pairs[static_cast<std::size_t>(i)].code_b);
  }

  std::vector<int> labels(pairs.size());
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    labels[i] = pairs[i].label;
    const int pred = result.scores[i] >= 0.5 ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  result.curve = roc_curve(result.scores, labels);
  result.error95 = error_at_95(result.curve);
  result.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
  return result;
}

std::string roc_to_csv(const RocCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,tpr,fpr\n";
  for (const auto& pt : curve.points) {
    out << pt.threshold << ',' << pt.tpr << ',' << pt.fpr << '\n';
  }
  return out.str();
}

std::string roc_to_gnuplot(const RocCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "# fpr tpr\n";
  for (const auto& pt : curve.points) {
    out << pt.fpr << ' ' << pt.tpr << '\n';
  }
  return out.str();
}

std::string metrics_to_json(const EvalResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "{\n"
      << "  \"error95\": " << result.error95 << ",\n"
      << "  \"accuracy\": " << result.accuracy << ",\n"
      << "  \"n_pos\": " << result.curve.n_pos << ",\n"
      << "  \"n_neg\": " << result.curve.n_neg << "\n"
      << "}\n";
  return out.str();
}

}  // namespace spm
