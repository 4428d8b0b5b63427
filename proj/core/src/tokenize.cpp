#include "hbt/tokenize.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "hbt/io.hpp"

namespace hbt {

namespace fs = std::filesystem;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur += static_cast<char>(c);
    } else if (c >= 'A' && c <= 'Z') {
      cur += static_cast<char>(c - 'A' + 'a');
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TokenizedCorpus build_corpus(const std::vector<LabeledText>& texts, std::size_t min_count) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(texts.size());
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    tokens.push_back(tokenize(t.text));
    for (const auto& w : tokens.back()) ++freq[w];
  }

  TokenizedCorpus corpus;
  for (const auto& [w, c] : freq)
    if (c >= min_count) corpus.vocabulary.push_back(w);
  std::sort(corpus.vocabulary.begin(), corpus.vocabulary.end());
  std::unordered_map<std::string, std::uint32_t> id;
  for (std::size_t i = 0; i < corpus.vocabulary.size(); ++i)
    id.emplace(corpus.vocabulary[i], static_cast<std::uint32_t>(i));

  for (std::size_t k = 0; k < texts.size(); ++k) {
    std::map<std::uint32_t, double> counts;
    for (const auto& w : tokens[k]) {
      const auto it = id.find(w);
      if (it != id.end()) counts[it->second] += 1.0;
    }
    SparseDoc doc;
    for (const auto& [i, c] : counts) {
      doc.ids.push_back(i);
      doc.counts.push_back(c);
    }
    corpus.docs.emplace_back(texts[k].label, std::move(doc));
  }
  return corpus;
}

std::vector<LabeledText> read_labeled_directory(const std::string& root) {
  if (!fs::is_directory(root)) throw std::invalid_argument("not a directory: " + root);
  std::vector<fs::path> labels;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) labels.push_back(e.path());
  std::sort(labels.begin(), labels.end());
  std::vector<LabeledText> out;
  for (const auto& dir : labels) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      out.push_back({dir.filename().string(), read_text_file(f.string())});
  }
  return out;
}

std::vector<LabeledText> parse_labeled_lines(std::string_view text) {
  std::vector<LabeledText> out;
  std::size_t pos = 0, line = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view l = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (l.empty()) continue;
    const std::size_t tab = l.find('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw ParseError("<text>", line, 1, "expected label<TAB>text");
    out.push_back({std::string(l.substr(0, tab)), std::string(l.substr(tab + 1))});
  }
  return out;
}

std::string vocabulary_text(const TokenizedCorpus& corpus) {
  std::string out;
  for (const auto& w : corpus.vocabulary) out += w + "\n";
  return out;
}

std::string corpus_documents_text(const TokenizedCorpus& corpus) {
  std::string out = "#vocab " + std::to_string(corpus.vocabulary.size()) + "\n";
  for (const auto& [label, doc] : corpus.docs) {
    out += label;
    out += '\t';
    for (std::size_t k = 0; k < doc.ids.size(); ++k) {
      if (k) out += ' ';
      out += std::to_string(doc.ids[k]) + ":" + std::to_string(static_cast<long long>(doc.counts[k]));
    }
    out += '\n';
  }
  return out;
}

}  // namespace hbt
