#ifndef SPM_EVALUATION_HPP
#define SPM_EVALUATION_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "spm/matcher_net.hpp"

namespace spm {

// ROC curve swept from high threshold to low. A sample counts positive at
// threshold th when score >= th; tied scores fall into one threshold event.
// The curve always starts at (0,0) (threshold +inf) and ends at (1,1).
struct RocCurve {
  struct Point {
    double threshold;
    double tpr;
    double fpr;
  };
  std::vector<Point> points;
  int n_pos = 0;
  int n_neg = 0;
};

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& labels);

// False-positive rate where the true-positive rate crosses 0.95, linearly
// interpolated between adjacent curve points; an exact TPR hit returns that
// point's FPR.
double error_at_95(const RocCurve& curve);

struct EvalResult {
  RocCurve curve;
  double error95 = 0;
  double accuracy = 0;  // at score threshold 0.5
  std::vector<double> scores;
};

// Scores every pair (parallel, order-stable) and derives the metrics.
EvalResult evaluate_model(const NetworkParams& params,
                          const std::vector<PairSample>& pairs);

std::string roc_to_csv(const RocCurve& curve);       // threshold,tpr,fpr
std::string roc_to_gnuplot(const RocCurve& curve);   // "fpr tpr" records
std::string metrics_to_json(const EvalResult& result);

}  // namespace spm

#endif
