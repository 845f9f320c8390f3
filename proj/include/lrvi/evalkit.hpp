#pragma once

// Downstream evaluation: partition agreement, classification scores,
// k-means, KNN, reconstruction error and strategies for choosing lambda.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lrvi/embedding.hpp"
#include "lrvi/field.hpp"

namespace lrvi::eval {

struct LabeledPartition {
  std::vector<int> assignments;
  int k = 0;

  /// Relabels to 0..k-1 in order of first appearance.
  static LabeledPartition compact(std::span<const int> labels);
};

double ari(std::span<const int> truth, std::span<const int> predicted);

/// 2 I(X;Y) / (H(X) + H(Y)). When both entropies vanish the partitions are
/// both trivial and the score is 1.
double nmi(std::span<const int> truth, std::span<const int> predicted);

struct ClassificationScores {
  double accuracy = 0;
  double macro_f1 = 0;
};

/// Macro-F1 averages over the union of labels seen in truth or prediction.
ClassificationScores accuracy_and_macro_f1(std::span<const int> truth,
                                           std::span<const int> predicted);

struct KMeansResult {
  LabeledPartition partition;
  Eigen::MatrixXd centroids; // r x k
  double wcss = 0;
  /// WCSS after each Lloyd iteration of the winning restart.
  std::vector<double> wcss_trace;
};

/// k-means++ seeding and Lloyd iterations on the columns of `points`; best of
/// `restarts` by WCSS. Distance ties go to the lowest centroid index.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10,
                    int max_iters = 300);

/// Majority vote among the k nearest training columns; vote ties go to the
/// label of the nearest tied neighbour.
std::vector<int> knn_classify(const Eigen::MatrixXd& train, std::span<const int> train_labels,
                              const Eigen::MatrixXd& test, int k);

struct KnnSelection {
  int best_k = 1;
  std::vector<int> grid;
  std::vector<double> cv_accuracy;
};

inline const std::vector<int>& default_knn_grid() {
  static const std::vector<int> grid{1, 2, 4, 8, 16};
  return grid;
}

/// Stratification-free `folds`-fold cross-validation on the training set.
/// Ties in CV accuracy go to the smaller k.
KnnSelection select_knn_k(const Eigen::MatrixXd& train, std::span<const int> train_labels,
                          std::uint64_t seed, std::span<const int> grid = default_knn_grid(),
                          int folds = 5);

double reconstruction_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

/// Per-sequence least squares over the full horizon (identity link, no
/// constraint), solved with a complete orthogonal decomposition.
ParameterMatrix<double> solve_unconstrained_ls(const SequenceCollection<double>& collection,
                                               Index order);

enum class SearchStrategy { bisect_rank1, grid, brent };
enum class ObjectiveKind { train_metric, reconstruction_error };

SearchStrategy parse_strategy(std::string_view name);
std::string_view to_string(SearchStrategy s);
ObjectiveKind parse_objective(std::string_view name);
std::string_view to_string(ObjectiveKind o);

struct LambdaProblem {
  std::function<ParameterMatrix<double>(double)> solve;
  /// Lower is better. Unset means approx_rank is used as the score.
  std::function<double(const ParameterMatrix<double>&)> objective;
  /// Solution with lambda = inf; computed through `solve` when absent.
  std::optional<ParameterMatrix<double>> unconstrained;
};

struct LambdaSearchOptions {
  SearchStrategy strategy = SearchStrategy::brent;
  int grid_points = 20;
  double brent_tol = 1e-3;
  double bisect_rel_tol = 1e-2;
  int max_bisect_steps = 60;
  std::optional<double> lower;
  std::optional<double> upper;
};

struct LambdaSearchResult {
  std::vector<double> lambdas_tried;
  std::vector<double> scores;
  std::vector<Index> ranks;
  double best_lambda = 0;
  double best_score = 0;
  std::optional<ParameterMatrix<double>> best_params;
  /// Bracket upper end, the nuclear norm of the unconstrained solution.
  double upper = 0;
  /// Golden-section steps taken by Brent when parabolic steps were rejected.
  int golden_steps = 0;
};

LambdaSearchResult lambda_search(const LambdaProblem& problem, const LambdaSearchOptions& options);

struct BrentResult {
  double x = 0;
  double fx = 0;
  int evaluations = 0;
  int golden_steps = 0;
};

/// Derivative-free minimisation on [a, b] to absolute tolerance `tol`.
BrentResult brent_minimize(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-3, int max_iters = 200);

enum class Spacing { linear, log };

/// n points from lo to hi inclusive. Log spacing requires lo > 0.
std::vector<double> lambda_grid(double lo, double hi, int n, Spacing spacing);

} // namespace lrvi::eval
