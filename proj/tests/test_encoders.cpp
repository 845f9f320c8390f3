#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "lrvi/encoders.hpp"

using namespace lrvi;
using namespace lrvi::encoders;

namespace {

// Smallest expected length over all length vectors in [1, max_len]^n that
// satisfy Kraft's inequality (any such vector admits a prefix code).
double brute_force_optimum(const std::vector<double>& p, int arity, int max_len) {
  const std::size_t n = p.size();
  std::vector<int> len(n, 1);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    double kraft = 0, cost = 0;
    for (std::size_t i = 0; i < n; ++i) {
      kraft += std::pow(arity, -len[i]);
      cost += p[i] * len[i];
    }
    if (kraft <= 1 + 1e-12) best = std::min(best, cost);
    std::size_t k = 0;
    while (k < n && ++len[k] > max_len) len[k++] = 1;
    if (k == n) break;
  }
  return best;
}

std::map<char, double> random_table(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> w(0.01, 1.0);
  std::map<char, double> t;
  for (int i = 0; i < size; ++i) t[static_cast<char>('a' + i)] = w(rng);
  return t;
}

std::vector<std::size_t> lengths(const HuffmanCode& code) {
  std::vector<std::size_t> out;
  for (const auto& [c, word] : code.codebook) out.push_back(word.size());
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

TEST_CASE("four equiprobable characters get single digits") {
  const auto code = build_huffman({{'a', 1}, {'b', 1}, {'c', 1}, {'d', 1}});
  CHECK(lengths(code) == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(code.kraft_sum() == doctest::Approx(1.0));
}

TEST_CASE("five equiprobable characters match the brute-force optimum") {
  const auto code = build_huffman({{'a', 1}, {'b', 1}, {'c', 1}, {'d', 1}, {'e', 1}});
  CHECK(lengths(code) == std::vector<std::size_t>{1, 1, 1, 2, 2});
  CHECK(code.kraft_sum() <= 1.0);
  CHECK(code.prefix_free());
  const std::vector<double> p(5, 0.2);
  CHECK(code.expected_length({{'a', 1}, {'b', 1}, {'c', 1}, {'d', 1}, {'e', 1}}) ==
        doctest::Approx(brute_force_optimum(p, 4, 4)));
}

TEST_CASE("huffman is optimal on small random tables") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    const int size = 2 + trial % 5;
    const auto table = random_table(rng, size);
    double total = 0;
    for (const auto& [c, w] : table) total += w;
    std::vector<double> p;
    for (const auto& [c, w] : table) p.push_back(w / total);
    for (int arity : {2, 3, 4}) {
      const auto code = build_huffman(table, arity);
      CHECK(code.expected_length(table) == doctest::Approx(brute_force_optimum(p, arity, size)).epsilon(1e-12));
    }
  }
}

TEST_CASE("random tables give prefix-free Kraft-feasible round-tripping codes") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(2, 40);
  for (int trial = 0; trial < 100; ++trial) {
    const auto table = random_table(rng, size(rng));
    const auto code = build_huffman(table);
    CHECK(code.prefix_free());
    CHECK(code.kraft_sum() <= 1.0 + 1e-12);
    std::string text;
    std::uniform_int_distribution<std::size_t> pick(0, table.size() - 1);
    for (int k = 0; k < 200; ++k) text += std::next(table.begin(), static_cast<long>(pick(rng)))->first;
    CHECK(code.decode(code.encode(text)) == text);
  }
}

TEST_CASE("huffman ties are deterministic") {
  std::map<char, double> t{{'x', 2}, {'y', 2}, {'z', 2}, {'w', 1}, {'v', 1}};
  CHECK(build_huffman(t).codebook == build_huffman(t).codebook);
}

TEST_CASE("huffman input errors") {
  CHECK_THROWS_AS(build_huffman({}), ConfigError);
  CHECK_THROWS_AS(build_huffman({{'a', 1}, {'b', 0}}), ConfigError);
  const auto code = build_huffman({{'a', 1}, {'b', 1}});
  CHECK_THROWS_AS(code.encode("abc"), ShapeError);
  CHECK_THROWS_AS(code.decode("7"), ShapeError);
}

TEST_CASE("english table builds a code over letters and space") {
  const auto freqs = english_frequencies();
  CHECK(freqs.size() == 27);
  CHECK(freqs.count(' ') == 1);
  const auto code = build_huffman(freqs);
  CHECK(code.codebook.at(' ').size() <= code.codebook.at('z').size());
  CHECK(code.codebook.at('e').size() <= code.codebook.at('q').size());
}

TEST_CASE("frequency table file format") {
  const auto path = std::filesystem::temp_directory_path() / "lrvi_freq_test.csv";
  {
    std::ofstream out(path);
    out << "symbol,frequency\n<space>,3\na,1.5\nb,0.5\n";
  }
  const auto t = read_frequency_table(path);
  CHECK(t.at(' ') == 3.0);
  CHECK(t.at('a') == 1.5);
  CHECK(t.size() == 3);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_frequency_table(path), IoError);
}

TEST_CASE("symbolic encoding is one-hot and truncated") {
  const auto code = build_huffman(english_frequencies());
  std::string text;
  while (text.size() < 2000) text += "the quick brown fox jumps over the lazy dog ";
  const auto enc = encode_symbolic(text, code, 1000);
  REQUIRE(enc.has_value());
  CHECK(enc->rows() == 4);
  CHECK(enc->cols() == 1000);
  for (Index t = 0; t < enc->cols(); ++t) {
    CHECK(enc->col(t).sum() == 1.0);
    CHECK((enc->col(t).array() == 0.0).count() == 3);
  }
  CHECK_FALSE(encode_symbolic("short text", code, 1000).has_value());
  CHECK_THROWS_AS(encode_symbolic("", code, 1000), ShapeError);
  CHECK_THROWS_AS(encode_symbolic("unknown: ?", code, 1), ShapeError);
}

TEST_CASE("text cleaning") {
  CHECK(clean_text("Hello,\n\t\"World\" (x): y;  z ") == "hello, world x y z");
  CHECK(clean_text("caf\xc3\xa9", false) == "caf");
  const auto code = build_huffman({{'a', 1}, {'b', 1}, {' ', 1}});
  CHECK(restrict_to_alphabet("a-b c!", code) == "ab ");
}

TEST_CASE("nucleotide one-hot and ambiguity codes") {
  const Eigen::MatrixXd m = encode_nucleotides("ACTGNRu");
  CHECK(m.col(0) == Eigen::Vector4d(1, 0, 0, 0));
  CHECK(m.col(1) == Eigen::Vector4d(0, 1, 0, 0));
  CHECK(m.col(2) == Eigen::Vector4d(0, 0, 1, 0));
  CHECK(m.col(3) == Eigen::Vector4d(0, 0, 0, 1));
  CHECK(m.col(4) == Eigen::Vector4d(0.25, 0.25, 0.25, 0.25));
  CHECK(m.col(5) == Eigen::Vector4d(0.5, 0, 0, 0.5));
  CHECK(m.col(6) == m.col(2));
  const Eigen::MatrixXd all = encode_nucleotides("ACGTURYSWKMBDHVNacgtn");
  for (Index t = 0; t < all.cols(); ++t) CHECK(all.col(t).sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(all.col(11) == Eigen::Vector4d(0, 1.0 / 3, 1.0 / 3, 1.0 / 3));
  CHECK_THROWS_AS(encode_nucleotides("ACXG"), ShapeError);
  CHECK_NOTHROW(SequenceCollection<double>({all}, {}, std::nullopt, 4, SequenceKind::simplex));
}

TEST_CASE("signal plus first difference") {
  const std::vector<double> x{1, 2, 4};
  const auto raw = encode_signal_with_diff(x, false);
  CHECK(raw.channels.row(0) == Eigen::RowVector3d(1, 2, 4));
  CHECK(raw.channels.row(1) == Eigen::RowVector3d(0, 1, 2));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> series(50);
  for (auto& v : series) v = n(rng);
  const auto unnorm = encode_signal_with_diff(series, false);
  double cum = 0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    cum += unnorm.channels(1, static_cast<Index>(t));
    CHECK(cum == doctest::Approx(series[t] - series[0]));
  }
  const auto z = encode_signal_with_diff(series, true);
  for (Index r = 0; r < 2; ++r) {
    CHECK(std::abs(z.channels.row(r).mean()) < 1e-12);
    CHECK(z.channels.row(r).squaredNorm() / 50 == doctest::Approx(1.0));
  }
}

TEST_CASE("constant signals are flagged") {
  const std::vector<double> c(10, 3.0);
  const auto raw = encode_signal_with_diff(c, false);
  CHECK(raw.channels.row(1).isZero(0));
  const auto z = encode_signal_with_diff(c, true);
  CHECK(z.constant_signal);
  CHECK(z.constant_difference);
  CHECK(z.channels.isZero(0));
  const std::vector<double> ramp{1, 2, 3, 4};
  const auto r = encode_signal_with_diff(ramp, true);
  CHECK_FALSE(r.constant_signal);
  CHECK_FALSE(r.constant_difference);
  CHECK_THROWS_AS(encode_signal_with_diff(std::vector<double>{1.0}), ShapeError);
}
