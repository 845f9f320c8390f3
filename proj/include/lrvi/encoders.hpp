#pragma once

// Turning raw inputs into sequences on the real line or the simplex:
// D-ary Huffman coding of text, one-hot nucleotides, and signal + first
// difference channels for univariate series.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lrvi/model.hpp"

namespace lrvi::encoders {

/// Codewords are strings over the digits '0'..'0'+arity-1.
struct HuffmanCode {
  int arity = 4;
  std::map<char, std::string> codebook;

  std::string encode(std::string_view text) const;
  std::string decode(std::string_view digits) const;
  /// sum_c arity^{-len(c)}; 1 for a complete code.
  double kraft_sum() const;
  bool prefix_free() const;
  /// sum_c p_c len(c) with p normalised from `frequencies`.
  double expected_length(const std::map<char, double>& frequencies) const;
};

/// Optimal prefix code of the given arity. Dummy zero-weight leaves pad the
/// alphabet so every merge takes exactly `arity` nodes. Ties are broken by
/// (weight, smallest character in the subtree) which makes the code
/// deterministic.
HuffmanCode build_huffman(const std::map<char, double>& frequencies, int arity = 4);

/// Reads "symbol,frequency" lines. The symbol `<space>` denotes ' '.
std::map<char, double> read_frequency_table(const std::filesystem::path& path);
/// Bundled English letter + space frequencies.
std::map<char, double> english_frequencies();
/// Relative character counts over a corpus.
std::map<char, double> corpus_frequencies(std::span<const std::string> documents);

/// Drops non-ASCII bytes, strips double quotes, parentheses, colons and semicolons, maps newlines
/// and tabs to spaces, collapses repeated spaces, optionally lowercases.
std::string clean_text(std::string_view text, bool lowercase = true);

/// Removes characters that have no codeword.
std::string restrict_to_alphabet(std::string_view text, const HuffmanCode& code);

/// arity x L one-hot matrix of the code digits.
Eigen::MatrixXd one_hot_digits(std::string_view digits, int arity);

/// Huffman-encodes `text` and truncates to the first `cutoff` symbols.
/// Returns nullopt when the encoding is shorter than `cutoff`.
std::optional<Eigen::MatrixXd> encode_symbolic(std::string_view text, const HuffmanCode& code,
                                               Index cutoff = 1000);

/// 4 x L channels in A, C, T, G order; IUPAC ambiguity codes spread their
/// mass uniformly over the bases they stand for. Case-insensitive; U is read
/// as T. Throws ShapeError on an unknown character.
Eigen::MatrixXd encode_nucleotides(std::string_view genome);

struct SignalEncoding {
  /// Row 0: signal. Row 1: first difference with a leading 0.
  Eigen::MatrixXd channels;
  /// Set when the corresponding channel had zero variance and was only centred.
  bool constant_signal = false;
  bool constant_difference = false;
};

/// z-normalises each channel when `normalize` is set.
SignalEncoding encode_signal_with_diff(std::span<const double> signal, bool normalize = true);

} // namespace lrvi::encoders
