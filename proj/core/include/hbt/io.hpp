#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hbt/dataset.hpp"
#include "hbt/evaluation.hpp"
#include "hbt/hierarchy.hpp"
#include "hbt/transfer_objective.hpp"

namespace hbt {

/// Malformed input, with the position it was detected at.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t column,
             const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// ---------------------------------------------------------------------------
// Hierarchy file: {"nodes": [names], "edges": [[child, parent], ...]}

Hierarchy parse_hierarchy(std::string_view text, const std::string& source = "<hierarchy>");
std::string hierarchy_to_json(const Hierarchy& h);

// ---------------------------------------------------------------------------
// Data files. Labels must name leaves of the hierarchy. Blank lines and lines
// starting with '#' are skipped (except the "#vocab V" header).
//
// Gaussian CSV:   label,x1,x2,...,xd
// Document lines: label<TAB>id:count id:count ...

HierarchyData parse_gaussian_csv(std::string_view text, const Hierarchy& h,
                                 const std::string& source = "<csv>",
                                 std::optional<std::size_t> expected_dim = std::nullopt);

struct DocumentRecord {
  std::string label;
  SparseDoc doc;
  std::size_t line = 0;
};

struct DocumentFile {
  std::vector<DocumentRecord> records;
  std::size_t vocab = 0;
};

/// Document records with free-form labels (an empty label is allowed).
DocumentFile parse_document_records(std::string_view text, const std::string& source = "<docs>",
                                    std::optional<std::size_t> vocab = std::nullopt);

/// Vocabulary size comes from `vocab` when given, else from a "#vocab V"
/// header, else from the largest id + 1.
HierarchyData parse_documents(std::string_view text, const Hierarchy& h,
                              const std::string& source = "<docs>",
                              std::optional<std::size_t> vocab = std::nullopt);

HierarchyData parse_data(std::string_view text, const Hierarchy& h, Family family,
                         const std::string& source, std::optional<std::size_t> dim);

std::string gaussian_csv(const Hierarchy& h, const HierarchyData& data);
std::string documents_text(const Hierarchy& h, const HierarchyData& data);
std::string data_text(const Hierarchy& h, const HierarchyData& data);

// ---------------------------------------------------------------------------
// Model file: versioned JSON; parameters as hexadecimal floats so that
// save -> load -> save is byte-identical.

struct ModelFile {
  static constexpr int kVersion = 1;

  Hierarchy hierarchy;
  Family family = Family::gaussian;
  std::size_t dim = 0;
  std::string method;
  double beta = 0.0;
  double alpha = 0.0;
  DivergenceSpec divergence;
  DotMode dot_mode = DotMode::none;
  std::vector<std::optional<NodeParams>> params;  // per node
  std::optional<DotCoefficients> dot;
  std::vector<double> class_counts;  // training instances per node
  std::vector<double> leaf_alpha;    // per node; CV-chosen alpha for cvreg models
  double objective_value = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

std::string save_model(const ModelFile& model);
/// Throws ParseError on corrupt input or an unknown version.
ModelFile load_model(std::string_view text, const std::string& source = "<model>");

/// DOT coefficients alone, as written by the bootstrap command.
std::string save_dot(const Hierarchy& h, const DotCoefficients& dot);
DotCoefficients load_dot(std::string_view text, const Hierarchy& h,
                         const std::string& source = "<dot>");

/// Hexadecimal float text ("%a"); "inf", "-inf" and "nan" for non-finite values.
std::string encode_double(double v);
double decode_double(std::string_view s);

}  // namespace hbt
