#include "lrvi/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/QR>

namespace lrvi::eval {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  detail::require<ShapeError>(a == b, "label vectors differ in length");
  detail::require<ShapeError>(a > 0, "label vectors are empty");
}

struct Contingency {
  std::vector<std::vector<double>> table;
  std::vector<double> rows;
  std::vector<double> cols;
  double n = 0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  const auto pa = LabeledPartition::compact(a);
  const auto pb = LabeledPartition::compact(b);
  Contingency c;
  c.table.assign(static_cast<std::size_t>(pa.k), std::vector<double>(static_cast<std::size_t>(pb.k), 0.0));
  c.rows.assign(static_cast<std::size_t>(pa.k), 0.0);
  c.cols.assign(static_cast<std::size_t>(pb.k), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = static_cast<std::size_t>(pa.assignments[i]);
    const auto s = static_cast<std::size_t>(pb.assignments[i]);
    c.table[r][s] += 1;
    c.rows[r] += 1;
    c.cols[s] += 1;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

double pairs(double m) { return m * (m - 1) / 2; }

double entropy(const std::vector<double>& counts, double n) {
  double h = 0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

double squared_distance(const Eigen::MatrixXd& a, Index i, const Eigen::MatrixXd& b, Index j) {
  return (a.col(i) - b.col(j)).squaredNorm();
}

struct LloydRun {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double wcss = 0;
  std::vector<double> trace;
};

Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Index n = x.cols();
  Eigen::MatrixXd centres(x.rows(), k);
  std::uniform_int_distribution<Index> first(0, n - 1);
  centres.col(0) = x.col(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(x, i, centres, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Index pick = 0;
    if (total > 0) {
      double u = unit(rng) * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        u -= d2[static_cast<std::size_t>(i)];
        if (u < 0 && d2[static_cast<std::size_t>(i)] > 0) {
          pick = i;
          break;
        }
      }
    }
    centres.col(c) = x.col(pick);
    for (Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], squared_distance(x, i, centres, c));
  }
  return centres;
}

LloydRun lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centres, int max_iters) {
  const Index n = x.cols();
  const int k = static_cast<int>(centres.cols());
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(x, i, centres, 0);
      for (int c = 1; c < k; ++c) {
        const double dist = squared_distance(x, i, centres, c);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (run.labels[static_cast<std::size_t>(i)] != best) {
        run.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    // Recompute centroids; an empty cluster keeps its previous centre.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(x.rows(), k);
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Index i = 0; i < n; ++i) {
      const int c = run.labels[static_cast<std::size_t>(i)];
      sums.col(c) += x.col(i);
      counts[static_cast<std::size_t>(c)] += 1;
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centres.col(c) = sums.col(c) / counts[static_cast<std::size_t>(c)];
    double after = 0;
    for (Index i = 0; i < n; ++i) after += squared_distance(x, i, centres, run.labels[static_cast<std::size_t>(i)]);
    run.trace.push_back(after);
    if (!changed && it > 0) break;
  }
  run.centroids = std::move(centres);
  run.wcss = run.trace.back();
  return run;
}

std::vector<std::size_t> nearest_order(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test,
                                       Index j, std::size_t count) {
  const auto n = static_cast<std::size_t>(train.cols());
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(train, static_cast<Index>(i), test, j);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
                    });
  idx.resize(count);
  return idx;
}

} // namespace

LabeledPartition LabeledPartition::compact(std::span<const int> labels) {
  LabeledPartition p;
  std::map<int, int> remap;
  p.assignments.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
    p.assignments.push_back(it->second);
  }
  p.k = static_cast<int>(remap.size());
  return p;
}

double ari(std::span<const int> truth, std::span<const int> predicted) {
  require_same_length(truth.size(), predicted.size());
  const auto c = contingency(truth, predicted);
  double index = 0;
  for (const auto& row : c.table)
    for (double v : row) index += pairs(v);
  double sa = 0;
  double sb = 0;
  for (double v : c.rows) sa += pairs(v);
  for (double v : c.cols) sb += pairs(v);
  const double total = pairs(c.n);
  const double expected = total > 0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  const double denom = max_index - expected;
  if (denom == 0) return 1.0;
  return (index - expected) / denom;
}

double nmi(std::span<const int> truth, std::span<const int> predicted) {
  require_same_length(truth.size(), predicted.size());
  const auto c = contingency(truth, predicted);
  const double ha = entropy(c.rows, c.n);
  const double hb = entropy(c.cols, c.n);
  if (ha + hb == 0) return 1.0;
  double mi = 0;
  for (std::size_t r = 0; r < c.rows.size(); ++r)
    for (std::size_t s = 0; s < c.cols.size(); ++s) {
      const double v = c.table[r][s];
      if (v > 0) mi += (v / c.n) * std::log(v * c.n / (c.rows[r] * c.cols[s]));
    }
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

ClassificationScores accuracy_and_macro_f1(std::span<const int> truth,
                                           std::span<const int> predicted) {
  require_same_length(truth.size(), predicted.size());
  std::map<int, std::array<double, 3>> stats; // tp, fp, fn
  double correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) {
      correct += 1;
      stats[truth[i]][0] += 1;
    } else {
      stats[predicted[i]][1] += 1;
      stats[truth[i]][2] += 1;
    }
  }
  double f1 = 0;
  for (const auto& [label, s] : stats) f1 += 2 * s[0] / (2 * s[0] + s[1] + s[2]);
  return {correct / static_cast<double>(truth.size()), f1 / static_cast<double>(stats.size())};
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts,
                    int max_iters) {
  detail::require(k >= 1, "k must be positive");
  detail::require(restarts >= 1 && max_iters >= 1, "restarts and max_iters must be positive");
  detail::require<ShapeError>(points.cols() >= k, "fewer points than clusters");
  detail::require<ShapeError>(points.allFinite(), "points are not finite");
  std::optional<LloydRun> best;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(r)));
    auto run = lloyd(points, kmeans_pp(points, k, rng), max_iters);
    if (!best || run.wcss < best->wcss) best = std::move(run);
  }
  KMeansResult out;
  out.partition.assignments = best->labels;
  out.partition.k = k;
  out.centroids = best->centroids;
  out.wcss = best->wcss;
  out.wcss_trace = best->trace;
  return out;
}

std::vector<int> knn_classify(const Eigen::MatrixXd& train, std::span<const int> train_labels,
                              const Eigen::MatrixXd& test, int k) {
  detail::require<ShapeError>(train.cols() > 0, "training set is empty");
  detail::require<ShapeError>(static_cast<Index>(train_labels.size()) == train.cols(),
                              "one label per training point");
  detail::require<ShapeError>(test.rows() == train.rows(), "train and test dimensions differ");
  detail::require(k >= 1 && k <= train.cols(), "k must lie in [1, train size]");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.cols()));
  for (Index j = 0; j < test.cols(); ++j) {
    const auto near = nearest_order(train, test, j, static_cast<std::size_t>(k));
    std::map<int, int> votes;
    int top = 0;
    for (auto i : near) top = std::max(top, ++votes[train_labels[i]]);
    for (auto i : near)
      if (votes[train_labels[i]] == top) {
        out.push_back(train_labels[i]);
        break;
      }
  }
  return out;
}

KnnSelection select_knn_k(const Eigen::MatrixXd& train, std::span<const int> train_labels,
                          std::uint64_t seed, std::span<const int> grid, int folds) {
  const Index n = train.cols();
  detail::require<ShapeError>(n >= 2, "cross-validation needs at least two training points");
  detail::require<ShapeError>(static_cast<Index>(train_labels.size()) == n, "one label per point");
  detail::require(!grid.empty() && folds >= 2, "empty k grid or fewer than two folds");
  const int f = static_cast<int>(std::min<Index>(folds, n));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  KnnSelection sel;
  sel.grid.assign(grid.begin(), grid.end());
  sel.cv_accuracy.assign(grid.size(), 0.0);
  std::vector<bool> feasible(grid.size(), true);
  for (int fold = 0; fold < f; ++fold) {
    std::vector<Index> tr;
    std::vector<Index> va;
    for (Index p = 0; p < n; ++p) (p % f == fold ? va : tr).push_back(perm[static_cast<std::size_t>(p)]);
    Eigen::MatrixXd xtr(train.rows(), static_cast<Index>(tr.size()));
    Eigen::MatrixXd xva(train.rows(), static_cast<Index>(va.size()));
    std::vector<int> ytr;
    std::vector<int> yva;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      xtr.col(static_cast<Index>(i)) = train.col(tr[i]);
      ytr.push_back(train_labels[static_cast<std::size_t>(tr[i])]);
    }
    for (std::size_t i = 0; i < va.size(); ++i) {
      xva.col(static_cast<Index>(i)) = train.col(va[i]);
      yva.push_back(train_labels[static_cast<std::size_t>(va[i])]);
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (grid[g] > static_cast<int>(tr.size())) {
        feasible[g] = false;
        continue;
      }
      const auto pred = knn_classify(xtr, ytr, xva, grid[g]);
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == yva[i]) sel.cv_accuracy[g] += 1;
    }
  }
  double best = -1;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!feasible[g]) {
      sel.cv_accuracy[g] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    sel.cv_accuracy[g] /= static_cast<double>(n);
    if (sel.cv_accuracy[g] > best || (sel.cv_accuracy[g] == best && grid[g] < sel.best_k)) {
      best = sel.cv_accuracy[g];
      sel.best_k = grid[g];
    }
  }
  detail::require(best >= 0, "no k in the grid fits the training folds");
  return sel;
}

double reconstruction_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  detail::require<ShapeError>(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
                              "matrices differ in shape");
  const double denom = truth.norm();
  detail::require<NumericalError>(denom > 0, "true matrix is zero");
  return (truth - estimate).norm() / denom;
}

ParameterMatrix<double> solve_unconstrained_ls(const SequenceCollection<double>& collection,
                                               Index order) {
  const auto plan = plan_full_horizon(collection, order);
  const Index c = collection.channels();
  const Index len = regressor_length(c, order);
  Eigen::MatrixXd out(parameter_rows(c, order), static_cast<Index>(collection.size()));
  for (Index i = 0; i < out.cols(); ++i) {
    Eigen::MatrixXd design(len, plan.count());
    for (Index k = 0; k < plan.count(); ++k) plan.fill_regressor(i, k, design.col(k));
    const auto& seq = collection.sequence(static_cast<std::size_t>(i));
    const Eigen::MatrixXd obs = seq.middleCols(plan.time(i, 0) - 1, plan.count());
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design.transpose());
    const Eigen::MatrixXd rt = cod.solve(obs.transpose()); // len x C
    Eigen::Map<Eigen::MatrixXd>(out.col(i).data(), c, len) = rt.transpose();
  }
  detail::require<NumericalError>(out.allFinite(), "unconstrained solution is not finite");
  return ParameterMatrix<double>(std::move(out), c, order);
}

SearchStrategy parse_strategy(std::string_view name) {
  if (name == "bisect" || name == "bisect-to-rank1") return SearchStrategy::bisect_rank1;
  if (name == "grid") return SearchStrategy::grid;
  if (name == "brent") return SearchStrategy::brent;
  throw ConfigError("unknown lambda search strategy: " + std::string(name));
}

std::string_view to_string(SearchStrategy s) {
  switch (s) {
  case SearchStrategy::bisect_rank1: return "bisect-to-rank1";
  case SearchStrategy::grid: return "grid";
  case SearchStrategy::brent: return "brent";
  }
  return "brent";
}

ObjectiveKind parse_objective(std::string_view name) {
  if (name == "train-metric") return ObjectiveKind::train_metric;
  if (name == "reconstruction-error") return ObjectiveKind::reconstruction_error;
  throw ConfigError("unknown lambda search objective: " + std::string(name));
}

std::string_view to_string(ObjectiveKind o) {
  return o == ObjectiveKind::train_metric ? "train-metric" : "reconstruction-error";
}

BrentResult brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                           int max_iters) {
  detail::require(a < b, "Brent bracket must satisfy a < b");
  detail::require(tol > 0, "tolerance must be positive");
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  BrentResult r;
  auto eval = [&](double x) {
    const double v = f(x);
    ++r.evaluations;
    detail::require<NumericalError>(std::isfinite(v), "objective is not finite");
    return v;
  };
  double x = a + golden * (b - a);
  double w = x;
  double v = x;
  double fx = eval(x);
  double fw = fx;
  double fv = fx;
  double d = 0;
  double e = 0;
  for (int it = 0; it < max_iters; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = eps * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool take_golden = true;
    if (std::abs(e) > tol1) {
      double rr = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * rr;
      q = 2.0 * (q - rr);
      if (q > 0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        take_golden = false;
      }
    }
    if (take_golden) {
      e = x >= xm ? a - x : b - x;
      d = golden * e;
      ++r.golden_steps;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = eval(u);
    if (fu <= fx) {
      (u >= x ? a : b) = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  r.x = x;
  r.fx = fx;
  return r;
}

std::vector<double> lambda_grid(double lo, double hi, int n, Spacing spacing) {
  detail::require(n >= 1, "grid needs at least one point");
  detail::require(lo <= hi, "grid bounds must satisfy lo <= hi");
  if (spacing == Spacing::log) detail::require(lo > 0, "log spacing needs lo > 0");
  std::vector<double> out;
  if (n == 1) return {hi};
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    out.push_back(spacing == Spacing::linear ? lo + s * (hi - lo)
                                             : std::exp(std::log(lo) + s * (std::log(hi) - std::log(lo))));
  }
  out.back() = hi;
  return out;
}

LambdaSearchResult lambda_search(const LambdaProblem& problem, const LambdaSearchOptions& options) {
  detail::require(static_cast<bool>(problem.solve), "lambda problem has no solve routine");
  LambdaSearchResult result;

  const ParameterMatrix<double> unconstrained =
      problem.unconstrained ? *problem.unconstrained
                            : problem.solve(std::numeric_limits<double>::infinity());
  detail::require<NumericalError>(unconstrained.data().allFinite(),
                                  "unconstrained solution is not finite");
  result.upper = options.upper ? *options.upper : nuclear_norm<double>(unconstrained.data());
  detail::require<NumericalError>(result.upper > 0, "unconstrained solution is zero");
  const Index full_rank = std::min(unconstrained.rows(), unconstrained.sequences());

  struct Eval {
    double score;
    Index rank;
  };
  std::optional<ParameterMatrix<double>> best;
  double best_score = std::numeric_limits<double>::infinity();
  auto evaluate = [&](double lambda, const auto& eligible) -> Eval {
    ParameterMatrix<double> p = problem.solve(lambda);
    const auto sv = singular_values<double>(p.data());
    const Index rank = approx_rank<double>(sv);
    const double score = problem.objective ? problem.objective(p) : static_cast<double>(rank);
    detail::require<NumericalError>(std::isfinite(score), "objective is not finite");
    result.lambdas_tried.push_back(lambda);
    result.scores.push_back(score);
    result.ranks.push_back(rank);
    if (eligible(rank) && score < best_score) {
      best_score = score;
      best = std::move(p);
      result.best_lambda = lambda;
    }
    return {score, rank};
  };

  auto bisect = [&](bool record_best) {
    double lo = 0;
    double hi = result.upper;
    std::optional<ParameterMatrix<double>> at_lo;
    double lo_score = 0;
    auto probe = [&](double lambda) {
      ParameterMatrix<double> p = problem.solve(lambda);
      const Index rank = approx_rank<double>(singular_values<double>(p.data()));
      const double score = problem.objective ? problem.objective(p) : static_cast<double>(rank);
      result.lambdas_tried.push_back(lambda);
      result.scores.push_back(score);
      result.ranks.push_back(rank);
      if (rank <= 1) {
        at_lo = std::move(p);
        lo_score = score;
      }
      return rank <= 1;
    };
    if (probe(hi)) {
      lo = hi;
    } else {
      for (int step = 0; step < options.max_bisect_steps && (lo == 0 || hi - lo > options.bisect_rel_tol * hi); ++step) {
        const double mid = 0.5 * (lo + hi);
        (probe(mid) ? lo : hi) = mid;
      }
    }
    detail::require<NumericalError>(lo > 0 && at_lo.has_value(), "bisection found no rank-one lambda");
    if (record_best) {
      best = std::move(at_lo);
      best_score = lo_score;
      result.best_lambda = lo;
    }
    return lo;
  };

  switch (options.strategy) {
  case SearchStrategy::bisect_rank1:
    bisect(true);
    break;
  case SearchStrategy::grid: {
    const double lo = options.lower ? *options.lower : bisect(false);
    const auto grid = lambda_grid(lo, result.upper, options.grid_points,
                                  lo > 0 ? Spacing::log : Spacing::linear);
    for (double lambda : grid) {
      if (lambda <= 0) continue;
      evaluate(lambda, [&](Index rank) { return rank < full_rank; });
    }
    if (!best) {
      // Every grid point was full rank; fall back to the best score overall.
      const auto it = std::min_element(result.scores.begin(), result.scores.end());
      const auto k = static_cast<std::size_t>(it - result.scores.begin());
      result.best_lambda = result.lambdas_tried[k];
      best_score = *it;
      best = problem.solve(result.best_lambda);
    }
    break;
  }
  case SearchStrategy::brent: {
    const double lo = options.lower ? *options.lower : 0.0;
    const auto r = brent_minimize([&](double lambda) { return evaluate(lambda, [](Index) { return true; }).score; }, lo,
                                  result.upper, options.brent_tol);
    result.golden_steps = r.golden_steps;
    break;
  }
  }
  detail::require<NumericalError>(best.has_value(), "lambda search produced no solution");
  result.best_score = best_score;
  result.best_params = std::move(best);
  return result;
}

} // namespace lrvi::eval
