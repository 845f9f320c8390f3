#include "lrvi/encoders.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <queue>
#include <sstream>

#ifndef LRVI_DATA_DIR
#define LRVI_DATA_DIR "data"
#endif

namespace lrvi::encoders {

namespace {

struct Node {
  double weight = 0;
  int min_char = 0; // tie-break key; dummies use 256
  int order = 0;    // creation order, final tie-break
  char symbol = 0;
  bool leaf = false;
  std::vector<std::shared_ptr<Node>> children;
};

using NodePtr = std::shared_ptr<Node>;

struct HeavierFirst {
  bool operator()(const NodePtr& a, const NodePtr& b) const {
    if (a->weight != b->weight) return a->weight > b->weight;
    if (a->min_char != b->min_char) return a->min_char > b->min_char;
    return a->order > b->order;
  }
};

void assign(const NodePtr& node, const std::string& prefix, HuffmanCode& code) {
  if (node->leaf) {
    if (node->min_char < 256) code.codebook[node->symbol] = prefix.empty() ? "0" : prefix;
    return;
  }
  for (std::size_t k = 0; k < node->children.size(); ++k)
    assign(node->children[k], prefix + static_cast<char>('0' + k), code);
}

} // namespace

HuffmanCode build_huffman(const std::map<char, double>& frequencies, int arity) {
  detail::require(arity >= 2 && arity <= 10, "arity must lie in [2, 10]");
  detail::require(!frequencies.empty(), "frequency table is empty");
  std::priority_queue<NodePtr, std::vector<NodePtr>, HeavierFirst> heap;
  int order = 0;
  for (const auto& [c, w] : frequencies) {
    detail::require(std::isfinite(w) && w > 0, "frequencies must be finite and positive");
    auto n = std::make_shared<Node>();
    n->weight = w;
    n->min_char = static_cast<unsigned char>(c);
    n->symbol = c;
    n->leaf = true;
    n->order = order++;
    heap.push(n);
  }
  const auto n = static_cast<int>(frequencies.size());
  // A full arity-ary tree has (leaves - 1) divisible by (arity - 1).
  int dummies = n == 1 ? arity - 1 : (arity - 1 - (n - 1) % (arity - 1)) % (arity - 1);
  for (int k = 0; k < dummies; ++k) {
    auto d = std::make_shared<Node>();
    d->min_char = 256;
    d->leaf = true;
    d->order = order++;
    heap.push(d);
  }
  while (heap.size() > 1) {
    auto parent = std::make_shared<Node>();
    parent->min_char = 257;
    for (int k = 0; k < arity; ++k) {
      auto child = heap.top();
      heap.pop();
      parent->weight += child->weight;
      parent->min_char = std::min(parent->min_char, child->min_char);
      parent->children.push_back(std::move(child));
    }
    parent->order = order++;
    heap.push(parent);
  }
  HuffmanCode code;
  code.arity = arity;
  assign(heap.top(), "", code);
  return code;
}

std::string HuffmanCode::encode(std::string_view text) const {
  std::string out;
  for (char c : text) {
    auto it = codebook.find(c);
    if (it == codebook.end())
      throw ShapeError(std::string("character has no codeword: '") + c + "'");
    out += it->second;
  }
  return out;
}

std::string HuffmanCode::decode(std::string_view digits) const {
  std::map<std::string, char> inverse;
  for (const auto& [c, w] : codebook) inverse.emplace(w, c);
  std::string out;
  std::string current;
  for (char d : digits) {
    current += d;
    if (auto it = inverse.find(current); it != inverse.end()) {
      out += it->second;
      current.clear();
    }
  }
  detail::require<ShapeError>(current.empty(), "trailing digits do not form a codeword");
  return out;
}

double HuffmanCode::kraft_sum() const {
  double s = 0;
  for (const auto& [c, w] : codebook) s += std::pow(static_cast<double>(arity), -double(w.size()));
  return s;
}

bool HuffmanCode::prefix_free() const {
  std::vector<std::string> words;
  for (const auto& [c, w] : codebook) words.push_back(w);
  std::sort(words.begin(), words.end());
  for (std::size_t k = 1; k < words.size(); ++k)
    if (words[k].compare(0, words[k - 1].size(), words[k - 1]) == 0) return false;
  return true;
}

double HuffmanCode::expected_length(const std::map<char, double>& frequencies) const {
  double total = 0;
  double weighted = 0;
  for (const auto& [c, w] : frequencies) {
    total += w;
    if (auto it = codebook.find(c); it != codebook.end())
      weighted += w * static_cast<double>(it->second.size());
  }
  return total > 0 ? weighted / total : 0.0;
}

std::map<char, double> read_frequency_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open frequency table: " + path.string());
  std::map<char, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw IoError("malformed frequency line: " + line);
    const std::string symbol = line.substr(0, comma);
    if (symbol == "symbol") continue;
    const char c = symbol == "<space>" ? ' ' : (symbol.size() == 1 ? symbol[0] : '\0');
    if (c == '\0') throw IoError("frequency symbol must be one character: " + symbol);
    try {
      out[c] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError("malformed frequency value: " + line);
    }
  }
  if (out.empty()) throw IoError("frequency table is empty: " + path.string());
  return out;
}

std::map<char, double> english_frequencies() {
  return read_frequency_table(std::filesystem::path(LRVI_DATA_DIR) / "english_frequencies.csv");
}

std::map<char, double> corpus_frequencies(std::span<const std::string> documents) {
  std::map<char, double> counts;
  double total = 0;
  for (const auto& doc : documents)
    for (char c : doc) {
      counts[c] += 1;
      total += 1;
    }
  for (auto& [c, w] : counts) w /= total;
  return counts;
}

std::string clean_text(std::string_view text, bool lowercase) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (static_cast<unsigned char>(c) >= 128) continue;
    if (c == '"' || c == '(' || c == ')' || c == ':' || c == ';') continue;
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    if (lowercase) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out += c;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string restrict_to_alphabet(std::string_view text, const HuffmanCode& code) {
  std::string out;
  for (char c : text)
    if (code.codebook.count(c)) out += c;
  return out;
}

Eigen::MatrixXd one_hot_digits(std::string_view digits, int arity) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(arity, static_cast<Index>(digits.size()));
  for (std::size_t t = 0; t < digits.size(); ++t) {
    const int k = digits[t] - '0';
    detail::require<ShapeError>(k >= 0 && k < arity, "digit outside the code alphabet");
    out(k, static_cast<Index>(t)) = 1.0;
  }
  return out;
}

std::optional<Eigen::MatrixXd> encode_symbolic(std::string_view text, const HuffmanCode& code,
                                               Index cutoff) {
  detail::require(cutoff >= 1, "cutoff must be positive");
  detail::require<ShapeError>(!text.empty(), "text is empty");
  const std::string digits = code.encode(text);
  if (static_cast<Index>(digits.size()) < cutoff) return std::nullopt;
  return one_hot_digits(std::string_view(digits).substr(0, static_cast<std::size_t>(cutoff)),
                        code.arity);
}

Eigen::MatrixXd encode_nucleotides(std::string_view genome) {
  // Column order A, C, T, G.
  static const std::map<char, std::array<int, 4>> iupac = {
      {'A', {1, 0, 0, 0}}, {'C', {0, 1, 0, 0}}, {'T', {0, 0, 1, 0}}, {'G', {0, 0, 0, 1}},
      {'U', {0, 0, 1, 0}}, {'R', {1, 0, 0, 1}}, {'Y', {0, 1, 1, 0}}, {'S', {0, 1, 0, 1}},
      {'W', {1, 0, 1, 0}}, {'K', {0, 0, 1, 1}}, {'M', {1, 1, 0, 0}}, {'B', {0, 1, 1, 1}},
      {'D', {1, 0, 1, 1}}, {'H', {1, 1, 1, 0}}, {'V', {1, 1, 0, 1}}, {'N', {1, 1, 1, 1}},
  };
  Eigen::MatrixXd out(4, static_cast<Index>(genome.size()));
  for (std::size_t t = 0; t < genome.size(); ++t) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(genome[t])));
    auto it = iupac.find(c);
    if (it == iupac.end())
      throw ShapeError(std::string("unknown nucleotide code '") + genome[t] + "' at position " +
                       std::to_string(t));
    const auto& mask = it->second;
    const double share = 1.0 / (mask[0] + mask[1] + mask[2] + mask[3]);
    for (int k = 0; k < 4; ++k) out(k, static_cast<Index>(t)) = mask[static_cast<std::size_t>(k)] * share;
  }
  return out;
}

SignalEncoding encode_signal_with_diff(std::span<const double> signal, bool normalize) {
  detail::require<ShapeError>(signal.size() >= 2, "signal needs at least two samples");
  const auto n = static_cast<Index>(signal.size());
  SignalEncoding out;
  out.channels.resize(2, n);
  for (Index t = 0; t < n; ++t) {
    const double v = signal[static_cast<std::size_t>(t)];
    detail::require<ShapeError>(std::isfinite(v), "signal contains a non-finite value");
    out.channels(0, t) = v;
    out.channels(1, t) = t == 0 ? 0.0 : v - signal[static_cast<std::size_t>(t - 1)];
  }
  if (!normalize) return out;
  for (Index r = 0; r < 2; ++r) {
    auto row = out.channels.row(r);
    row.array() -= row.mean();
    const double sd = std::sqrt(row.squaredNorm() / static_cast<double>(n));
    if (sd > 0) {
      row /= sd;
    } else {
      (r == 0 ? out.constant_signal : out.constant_difference) = true;
    }
  }
  return out;
}

} // namespace lrvi::encoders
