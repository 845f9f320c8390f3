#pragma once

// File formats: CSV for series and matrices, the UCR archive's
// "label,v1..vT" rows, FASTA-like genomes and plain-text corpora.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrvi/model.hpp"

namespace lrvi::io {

namespace fs = std::filesystem;

/// Long format: one row per (id, t) with columns id,t,ch_1..ch_C.
void write_collection_csv(const fs::path& path, const SequenceCollection<double>& collection);
/// Columns id,label. Written only when the collection has labels.
void write_labels_csv(const fs::path& path, const SequenceCollection<double>& collection);
/// Reads the long format back; rows of one id must be contiguous with t = 1, 2, ...
/// Labels are attached when `labels_path` is given.
SequenceCollection<double> read_collection_csv(const fs::path& path,
                                               const std::optional<fs::path>& labels_path = {},
                                               SequenceKind kind = SequenceKind::real);

/// Header row `header_prefix,<col names>`, then one row per matrix row.
void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& column_names,
                      const std::vector<std::string>& row_names, const std::string& corner = "row");
Eigen::MatrixXd read_matrix_csv(const fs::path& path, std::vector<std::string>* column_names = nullptr);

struct UcrSplit {
  std::vector<std::vector<double>> series;
  std::vector<int> labels;
};

/// One series per line, first field the class label; tab, comma or blank
/// separated. Trailing NaN padding of variable-length series is dropped.
UcrSplit read_ucr(const fs::path& path);

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::optional<std::vector<int>> labels;
  Eigen::MatrixXd coordinates; // r x N
};

EmbeddingTable read_embedding_csv(const fs::path& path);

struct FastaRecord {
  std::string id;
  std::optional<int> label;
  std::string sequence;
};

/// Header `>id|label ...` or `>id ...`; the label must be an integer.
std::vector<FastaRecord> read_fasta(const fs::path& path);

/// One document per line when `per_line`, otherwise the whole file.
std::vector<std::string> read_corpus(const fs::path& path, bool per_line);

/// Columns id,split with split in {train,test}.
void write_split_csv(const fs::path& path, const std::vector<std::string>& ids,
                     const std::vector<bool>& is_train);
/// Returns id -> is_train.
std::vector<std::pair<std::string, bool>> read_split_csv(const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& content);

std::vector<std::string> split_fields(const std::string& line, char sep = ',');

} // namespace lrvi::io
