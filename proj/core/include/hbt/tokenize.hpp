#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hbt/dataset.hpp"

namespace hbt {

/// Lowercased ASCII alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

struct LabeledText {
  std::string label;
  std::string text;
};

struct TokenizedCorpus {
  std::vector<std::string> vocabulary;  // id -> word, sorted
  std::vector<std::pair<std::string, SparseDoc>> docs;  // label, counts
};

/// Tokens whose total corpus count is below `min_count` are dropped; the
/// remaining words get ids in lexicographic order.
TokenizedCorpus build_corpus(const std::vector<LabeledText>& texts, std::size_t min_count = 2);

/// Every regular file under `root`/<label>/ becomes one document of class
/// <label>; labels and files are visited in sorted order.
std::vector<LabeledText> read_labeled_directory(const std::string& root);

/// "label<TAB>raw text" per line.
std::vector<LabeledText> parse_labeled_lines(std::string_view text);

std::string vocabulary_text(const TokenizedCorpus& corpus);
/// Document file with a "#vocab V" header.
std::string corpus_documents_text(const TokenizedCorpus& corpus);

}  // namespace hbt
