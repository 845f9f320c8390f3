#include "lrvi/io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace lrvi::io {

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

int parse_label(const std::string& s, const fs::path& path, std::size_t line) {
  const double v = parse_double(s, path, line);
  if (v != std::floor(v)) throw IoError(path.string() + ":" + std::to_string(line) + ": label is not an integer");
  return static_cast<int>(v);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

} // namespace

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void write_collection_csv(const fs::path& path, const SequenceCollection<double>& collection) {
  auto out = open_out(path);
  out << "id,t";
  for (Index c = 0; c < collection.channels(); ++c) out << ",ch_" << c + 1;
  out << '\n';
  for (std::size_t i = 0; i < collection.size(); ++i) {
    const auto& seq = collection.sequence(i);
    for (Index t = 0; t < seq.cols(); ++t) {
      out << collection.id(i) << ',' << t + 1;
      for (Index c = 0; c < seq.rows(); ++c) out << ',' << seq(c, t);
      out << '\n';
    }
  }
}

void write_labels_csv(const fs::path& path, const SequenceCollection<double>& collection) {
  if (!collection.has_labels()) return;
  auto out = open_out(path);
  out << "id,label\n";
  for (std::size_t i = 0; i < collection.size(); ++i)
    out << collection.id(i) << ',' << (*collection.labels())[i] << '\n';
}

SequenceCollection<double> read_collection_csv(const fs::path& path,
                                               const std::optional<fs::path>& labels_path,
                                               SequenceKind kind) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path.string());
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "t")
    throw IoError(path.string() + ": expected header id,t,ch_1,...");
  const auto channels = static_cast<Index>(header.size() - 2);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> columns;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
    if (ids.empty() || ids.back() != f[0]) {
      ids.push_back(f[0]);
      columns.emplace_back();
    }
    const auto t = static_cast<std::size_t>(parse_label(f[1], path, lineno));
    if (t != columns.back().size() / static_cast<std::size_t>(channels) + 1)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": time index out of order");
    for (std::size_t c = 2; c < f.size(); ++c) columns.back().push_back(parse_double(f[c], path, lineno));
  }
  std::vector<Eigen::MatrixXd> seqs;
  for (auto& col : columns)
    seqs.push_back(Eigen::Map<Eigen::MatrixXd>(col.data(), channels,
                                               static_cast<Index>(col.size()) / channels));
  std::optional<std::vector<int>> labels;
  if (labels_path) {
    auto lin = open_in(*labels_path);
    std::map<std::string, int> by_id;
    std::size_t ln = 0;
    while (std::getline(lin, line)) {
      ++ln;
      const auto f = split_fields(line);
      if (ln == 1 && !f.empty() && f[0] == "id") continue;
      if (f.size() < 2) continue;
      by_id[f[0]] = parse_label(f[1], *labels_path, ln);
    }
    labels.emplace();
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ShapeError("no label for sequence " + id);
      labels->push_back(it->second);
    }
  }
  return SequenceCollection<double>(std::move(seqs), std::move(ids), std::move(labels), channels, kind);
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& column_names,
                      const std::vector<std::string>& row_names, const std::string& corner) {
  detail::require<ShapeError>(static_cast<Index>(column_names.size()) == m.cols() &&
                                  static_cast<Index>(row_names.size()) == m.rows(),
                              "matrix CSV needs one name per row and column");
  auto out = open_out(path);
  out << corner;
  for (const auto& c : column_names) out << ',' << c;
  out << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    out << row_names[static_cast<std::size_t>(r)];
    for (Index c = 0; c < m.cols(); ++c) out << ',' << m(r, c);
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path, std::vector<std::string>* column_names) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path.string());
  auto header = split_fields(line);
  if (header.size() < 2) throw IoError(path.string() + ": matrix CSV needs at least one column");
  if (column_names) column_names->assign(header.begin() + 1, header.end());
  std::vector<double> values;
  Index rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
    for (std::size_t c = 1; c < f.size(); ++c) values.push_back(parse_double(f[c], path, lineno));
    ++rows;
  }
  const auto cols = static_cast<Index>(header.size() - 1);
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
}

UcrSplit read_ucr(const fs::path& path) {
  auto in = open_in(path);
  UcrSplit out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line)
      if (c == '\t' || c == ',') c = ' ';
    std::istringstream ss(line);
    std::vector<std::string> f;
    for (std::string tok; ss >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    if (f.size() < 3) throw IoError(path.string() + ":" + std::to_string(lineno) + ": series too short");
    out.labels.push_back(parse_label(f[0], path, lineno));
    std::vector<double> series;
    for (std::size_t k = 1; k < f.size(); ++k) {
      if (f[k] == "NaN" || f[k] == "nan") break;
      series.push_back(parse_double(f[k], path, lineno));
    }
    out.series.push_back(std::move(series));
  }
  if (out.series.empty()) throw IoError("no series in " + path.string());
  return out;
}

EmbeddingTable read_embedding_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path.string());
  const auto header = split_fields(line);
  if (header.empty() || header[0] != "id") throw IoError(path.string() + ": expected header id,...");
  const bool has_label = header.size() > 1 && header[1] == "label";
  const std::size_t first = has_label ? 2 : 1;
  const auto dims = static_cast<Index>(header.size() - first);
  EmbeddingTable t;
  if (has_label) t.labels.emplace();
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
    t.ids.push_back(f[0]);
    if (has_label) t.labels->push_back(parse_label(f[1], path, lineno));
    for (std::size_t c = first; c < f.size(); ++c) values.push_back(parse_double(f[c], path, lineno));
  }
  t.coordinates = Eigen::Map<Eigen::MatrixXd>(values.data(), dims, static_cast<Index>(t.ids.size()));
  return t;
}

std::vector<FastaRecord> read_fasta(const fs::path& path) {
  auto in = open_in(path);
  std::vector<FastaRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == ';') continue;
    if (line[0] == '>') {
      FastaRecord r;
      std::string head = line.substr(1);
      head = head.substr(0, head.find_first_of(" \t"));
      const auto bar = head.find('|');
      r.id = head.substr(0, bar);
      if (bar != std::string::npos) r.label = parse_label(head.substr(bar + 1), path, lineno);
      if (r.id.empty()) throw IoError(path.string() + ":" + std::to_string(lineno) + ": empty FASTA id");
      out.push_back(std::move(r));
    } else {
      if (out.empty()) throw IoError(path.string() + ": sequence data before the first header");
      out.back().sequence += line;
    }
  }
  return out;
}

std::vector<std::string> read_corpus(const fs::path& path, bool per_line) {
  if (!per_line) return {read_text(path)};
  auto in = open_in(path);
  std::vector<std::string> docs;
  for (std::string line; std::getline(in, line);)
    if (!trim(line).empty()) docs.push_back(line);
  return docs;
}

void write_split_csv(const fs::path& path, const std::vector<std::string>& ids,
                     const std::vector<bool>& is_train) {
  detail::require<ShapeError>(ids.size() == is_train.size(), "one split flag per id");
  auto out = open_out(path);
  out << "id,split\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << (is_train[i] ? "train" : "test") << '\n';
}

std::vector<std::pair<std::string, bool>> read_split_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, bool>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_fields(line);
    if (f.size() < 2 || (lineno == 1 && f[0] == "id")) continue;
    if (f[1] != "train" && f[1] != "test")
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": split must be train or test");
    out.emplace_back(f[0], f[1] == "train");
  }
  return out;
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

} // namespace lrvi::io
