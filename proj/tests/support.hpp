#pragma once

#include <random>
#include <string>
#include <vector>

#include "lrvi/model.hpp"

namespace lrvi::test {

inline Eigen::MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd gaussian_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return gaussian(n, 1, rng, scale).col(0);
}

/// N random sequences of C channels and length T; simplex columns when asked.
inline SequenceCollection<double> random_collection(Index channels, Index length, Index count,
                                                    std::mt19937_64& rng, bool simplex = false) {
  std::vector<Eigen::MatrixXd> seqs;
  for (Index i = 0; i < count; ++i) {
    Eigen::MatrixXd s = gaussian(channels, length, rng);
    if (simplex) {
      s = s.array().exp().matrix();
      for (Index t = 0; t < length; ++t) s.col(t) /= s.col(t).sum();
    }
    seqs.push_back(std::move(s));
  }
  return SequenceCollection<double>(std::move(seqs), {}, std::nullopt, channels,
                                    simplex ? SequenceKind::simplex : SequenceKind::real);
}

} // namespace lrvi::test
