#include "hbt/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace hbt {

using json = nlohmann::json;

ParseError::ParseError(const std::string& source, std::size_t line, std::size_t column,
                       const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string encode_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double decode_double(std::string_view s) {
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size())
    throw std::invalid_argument("not a number: '" + str + "'");
  return v;
}

namespace {

// Line-oriented scanning with 1-based positions.
struct LineCursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 0;

  bool next(std::string_view& out) {
    if (pos >= text.size()) return false;
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    out = text.substr(pos, stop - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos = stop + 1;
    ++line;
    return true;
  }
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view tok, const std::string& source, std::size_t line,
                    std::size_t col) {
  tok = trim(tok);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(source, line, col, "expected a finite number, got '" + std::string(tok) + "'");
  return v;
}

std::size_t parse_count(std::string_view tok, const std::string& source, std::size_t line,
                        std::size_t col, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(source, line, col,
                     std::string("expected a nonnegative integer ") + what + ", got '" +
                         std::string(tok) + "'");
  return v;
}

NodeId leaf_for_label(const Hierarchy& h, std::string_view label, const std::string& source,
                      std::size_t line) {
  const auto id = h.find(label);
  if (!id) throw ParseError(source, line, 1, "label '" + std::string(label) + "' is not a node of the hierarchy");
  if (!h.is_leaf(*id))
    throw ParseError(source, line, 1, "label '" + std::string(label) + "' is not a leaf");
  return *id;
}

json hierarchy_json(const Hierarchy& h) {
  json edges = json::array();
  for (const auto& [c, p] : h.named_edges()) edges.push_back(json::array({c, p}));
  return json{{"nodes", h.names()}, {"edges", edges}};
}

Hierarchy hierarchy_from_json(const json& j) {
  const auto names = j.at("nodes").get<std::vector<std::string>>();
  std::vector<NamedEdge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2)
      throw std::invalid_argument("each edge must be a [child, parent] pair");
    edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return Hierarchy::build(names, edges);
}

json encode_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(encode_double(v[i]));
  return a;
}

Eigen::VectorXd decode_vector(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = decode_double(a[i].get<std::string>());
  return v;
}

json dot_json(const Hierarchy& h, const DotCoefficients& dot) {
  json edges = json::array();
  for (const auto& e : dot.edges())
    edges.push_back(json{{"child", h.name(e.child)},
                         {"parent", h.name(e.parent)},
                         {"slot", e.slot},
                         {"lambda", encode_vector(e.lambda)}});
  return json{{"granularity", std::string(to_string(dot.granularity()))}, {"edges", edges}};
}

DotCoefficients dot_from_json(const json& j, const Hierarchy& h) {
  std::vector<EdgeDot> edges;
  for (const auto& e : j.at("edges")) {
    EdgeDot ed;
    ed.child = h.id_of(e.at("child").get<std::string>());
    ed.parent = h.id_of(e.at("parent").get<std::string>());
    if (h.parent(ed.child) != ed.parent)
      throw std::invalid_argument("DOT edge does not match the hierarchy");
    ed.slot = e.at("slot").get<std::vector<int>>();
    ed.lambda = decode_vector(e.at("lambda"));
    for (int s : ed.slot)
      if (s >= ed.lambda.size()) throw std::invalid_argument("DOT slot index out of range");
    edges.push_back(std::move(ed));
  }
  DotCoefficients dot(std::move(edges),
                      dot_granularity_from_string(j.at("granularity").get<std::string>()));
  dot.validate();
  return dot;
}

template <typename Fn>
auto with_json_errors(std::string_view text, const std::string& source, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and may point one past the end.
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(source, line, column, e.what());
  } catch (const std::exception& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

}  // namespace

Hierarchy parse_hierarchy(std::string_view text, const std::string& source) {
  return with_json_errors(text, source, [&] { return hierarchy_from_json(json::parse(text)); });
}

std::string hierarchy_to_json(const Hierarchy& h) { return hierarchy_json(h).dump(2) + "\n"; }

HierarchyData parse_gaussian_csv(std::string_view text, const Hierarchy& h,
                                 const std::string& source,
                                 std::optional<std::size_t> expected_dim) {
  std::vector<std::vector<std::vector<double>>> rows(h.size());
  std::optional<std::size_t> dim = expected_dim;
  LineCursor cur{text};
  std::string_view line;
  while (cur.next(line)) {
    if (trim(line).empty() || trim(line).front() == '#') continue;
    std::vector<std::string_view> fields;
    std::vector<std::size_t> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                           : comma - start));
      cols.push_back(start + 1);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 2)
      throw ParseError(source, cur.line, 1, "expected a label followed by at least one feature");
    const NodeId leaf = leaf_for_label(h, trim(fields[0]), source, cur.line);
    const std::size_t d = fields.size() - 1;
    if (!dim) dim = d;
    if (d != *dim)
      throw ParseError(source, cur.line, cols.back(),
                       "expected " + std::to_string(*dim) + " features, got " + std::to_string(d));
    std::vector<double> row(d);
    for (std::size_t k = 0; k < d; ++k)
      row[k] = parse_number(fields[k + 1], source, cur.line, cols[k + 1]);
    rows[leaf].push_back(std::move(row));
  }
  if (!dim) throw ParseError(source, cur.line, 1, "no data rows");

  HierarchyData data(Family::gaussian, *dim, h.size());
  for (NodeId n = 0; n < h.size(); ++n) {
    if (rows[n].empty()) continue;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows[n].size()), static_cast<Eigen::Index>(*dim));
    for (std::size_t r = 0; r < rows[n].size(); ++r)
      for (std::size_t c = 0; c < *dim; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[n][r][c];
    data.set(n, Dataset::gaussian(std::move(m)));
  }
  return data;
}

DocumentFile parse_document_records(std::string_view text, const std::string& source,
                                    std::optional<std::size_t> vocab) {
  DocumentFile file;
  std::optional<std::size_t> header_vocab;
  std::size_t max_id_plus_one = 0;
  std::size_t max_id_line = 0;
  LineCursor cur{text};
  std::string_view line;
  while (cur.next(line)) {
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (t.starts_with("#vocab"))
        header_vocab = parse_count(trim(t.substr(6)), source, cur.line, 8, "vocabulary size");
      continue;
    }
    const std::size_t tab = line.find('\t');
    DocumentRecord rec;
    rec.line = cur.line;
    rec.label = std::string(trim(line.substr(0, tab)));
    std::map<std::uint32_t, double> merged;
    if (tab != std::string_view::npos) {
      std::size_t pos = tab + 1;
      while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        if (pos >= line.size()) break;
        std::size_t end = pos;
        while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
        const std::string_view tok = line.substr(pos, end - pos);
        const std::size_t colon = tok.find(':');
        if (colon == std::string_view::npos)
          throw ParseError(source, cur.line, pos + 1,
                           "expected id:count, got '" + std::string(tok) + "'");
        const std::size_t id = parse_count(tok.substr(0, colon), source, cur.line, pos + 1, "word id");
        const std::size_t count =
            parse_count(tok.substr(colon + 1), source, cur.line, pos + colon + 2, "count");
        if (id > 0xffffffffULL) throw ParseError(source, cur.line, pos + 1, "word id too large");
        merged[static_cast<std::uint32_t>(id)] += static_cast<double>(count);
        if (id + 1 > max_id_plus_one) {
          max_id_plus_one = id + 1;
          max_id_line = cur.line;
        }
        pos = end;
      }
    }
    for (const auto& [id, c] : merged) {
      if (c == 0.0) continue;
      rec.doc.ids.push_back(id);
      rec.doc.counts.push_back(c);
    }
    file.records.push_back(std::move(rec));
  }
  file.vocab = vocab ? *vocab : header_vocab ? *header_vocab : max_id_plus_one;
  if (file.vocab == 0) throw ParseError(source, cur.line, 1, "empty vocabulary");
  if (max_id_plus_one > file.vocab)
    throw ParseError(source, max_id_line, 1,
                     "word id " + std::to_string(max_id_plus_one - 1) +
                         " exceeds vocabulary size " + std::to_string(file.vocab));
  return file;
}

HierarchyData parse_documents(std::string_view text, const Hierarchy& h,
                              const std::string& source, std::optional<std::size_t> vocab) {
  DocumentFile file = parse_document_records(text, source, vocab);
  std::vector<std::vector<SparseDoc>> docs(h.size());
  for (auto& rec : file.records)
    docs[leaf_for_label(h, rec.label, source, rec.line)].push_back(std::move(rec.doc));
  HierarchyData data(Family::multinomial, file.vocab, h.size());
  for (NodeId n = 0; n < h.size(); ++n)
    if (!docs[n].empty()) data.set(n, Dataset::documents(file.vocab, std::move(docs[n])));
  return data;
}

HierarchyData parse_data(std::string_view text, const Hierarchy& h, Family family,
                         const std::string& source, std::optional<std::size_t> dim) {
  return family == Family::gaussian ? parse_gaussian_csv(text, h, source, dim)
                                    : parse_documents(text, h, source, dim);
}

std::string gaussian_csv(const Hierarchy& h, const HierarchyData& data) {
  std::string out;
  for (NodeId n = 0; n < h.size(); ++n) {
    const Dataset* d = data.find(n);
    if (!d) continue;
    for (Eigen::Index r = 0; r < d->rows.rows(); ++r) {
      out += h.name(n);
      for (Eigen::Index c = 0; c < d->rows.cols(); ++c) {
        char buf[40];
        std::snprintf(buf, sizeof buf, ",%.17g", d->rows(r, c));
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

std::string documents_text(const Hierarchy& h, const HierarchyData& data) {
  std::string out = "#vocab " + std::to_string(data.dim) + "\n";
  for (NodeId n = 0; n < h.size(); ++n) {
    const Dataset* d = data.find(n);
    if (!d) continue;
    for (const auto& doc : d->docs) {
      out += h.name(n);
      out += '\t';
      for (std::size_t k = 0; k < doc.ids.size(); ++k) {
        if (k) out += ' ';
        out += std::to_string(doc.ids[k]) + ":" +
               std::to_string(static_cast<long long>(std::llround(doc.counts[k])));
      }
      out += '\n';
    }
  }
  return out;
}

std::string data_text(const Hierarchy& h, const HierarchyData& data) {
  return data.family == Family::gaussian ? gaussian_csv(h, data) : documents_text(h, data);
}

std::string save_model(const ModelFile& m) {
  json nodes = json::array();
  for (NodeId n = 0; n < m.hierarchy.size(); ++n) {
    json node{{"name", m.hierarchy.name(n)}};
    const auto& p = n < m.params.size() ? m.params[n] : std::nullopt;
    if (!p) {
      node["params"] = nullptr;
    } else if (const auto* g = std::get_if<GaussianParams>(&*p)) {
      node["params"] = json{{"mean", encode_vector(g->mean)},
                            {"precision", encode_vector(pack_upper(g->precision))}};
    } else {
      node["params"] = json{{"logits", encode_vector(std::get<MultinomialParams>(*p).logits)}};
    }
    node["class_count"] = encode_double(n < m.class_counts.size() ? m.class_counts[n] : 0.0);
    if (n < m.leaf_alpha.size()) node["alpha"] = encode_double(m.leaf_alpha[n]);
    nodes.push_back(std::move(node));
  }
  json j{{"format", "hbt-model"},
         {"version", ModelFile::kVersion},
         {"family", std::string(to_string(m.family))},
         {"dim", m.dim},
         {"method", m.method},
         {"hierarchy", hierarchy_json(m.hierarchy)},
         {"config",
          json{{"beta", encode_double(m.beta)},
               {"alpha", encode_double(m.alpha)},
               {"divergence", std::string(to_string(m.divergence.kind))},
               {"epsilon", encode_double(m.divergence.epsilon)},
               {"smoothing", encode_double(m.divergence.smoothing)},
               {"dot_mode", std::string(to_string(m.dot_mode))}}},
         {"nodes", nodes},
         {"dot", m.dot ? dot_json(m.hierarchy, *m.dot) : json(nullptr)},
         {"fit",
          json{{"objective", encode_double(m.objective_value)},
               {"iterations", m.iterations},
               {"converged", m.converged}}}};
  return j.dump(2) + "\n";
}

ModelFile load_model(std::string_view text, const std::string& source) {
  return with_json_errors(text, source, [&] {
    const json j = json::parse(text);
    if (!j.is_object() || j.value("format", "") != "hbt-model")
      throw ParseError(source, 0, 0, "not an hbt model file");
    const int version = j.at("version").get<int>();
    if (version != ModelFile::kVersion)
      throw ParseError(source, 0, 0,
                       "unsupported model file version " + std::to_string(version) +
                           " (expected " + std::to_string(ModelFile::kVersion) + ")");
    ModelFile m;
    m.hierarchy = hierarchy_from_json(j.at("hierarchy"));
    m.family = family_from_string(j.at("family").get<std::string>());
    m.dim = j.at("dim").get<std::size_t>();
    m.method = j.at("method").get<std::string>();
    const json& cfg = j.at("config");
    m.beta = decode_double(cfg.at("beta").get<std::string>());
    m.alpha = decode_double(cfg.at("alpha").get<std::string>());
    m.divergence.kind = divergence_from_string(cfg.at("divergence").get<std::string>());
    m.divergence.epsilon = decode_double(cfg.at("epsilon").get<std::string>());
    m.divergence.smoothing = decode_double(cfg.at("smoothing").get<std::string>());
    m.dot_mode = dot_mode_from_string(cfg.at("dot_mode").get<std::string>());

    const json& nodes = j.at("nodes");
    if (nodes.size() != m.hierarchy.size())
      throw ParseError(source, 0, 0, "node count does not match the hierarchy");
    m.params.resize(m.hierarchy.size());
    m.class_counts.assign(m.hierarchy.size(), 0.0);
    bool any_alpha = false;
    std::vector<double> alphas(m.hierarchy.size(), 0.0);
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const json& node = nodes[n];
      if (node.at("name").get<std::string>() != m.hierarchy.name(n))
        throw ParseError(source, 0, 0, "node order does not match the hierarchy");
      m.class_counts[n] = decode_double(node.at("class_count").get<std::string>());
      if (node.contains("alpha")) {
        alphas[n] = decode_double(node.at("alpha").get<std::string>());
        any_alpha = true;
      }
      const json& p = node.at("params");
      if (p.is_null()) continue;
      if (m.family == Family::gaussian) {
        GaussianParams g;
        g.mean = decode_vector(p.at("mean"));
        g.precision = unpack_upper(decode_vector(p.at("precision")), m.dim);
        if (static_cast<std::size_t>(g.mean.size()) != m.dim)
          throw ParseError(source, 0, 0, "mean length does not match dim");
        m.params[n] = g;
      } else {
        MultinomialParams mp{decode_vector(p.at("logits"))};
        if (static_cast<std::size_t>(mp.logits.size()) != m.dim)
          throw ParseError(source, 0, 0, "logit count does not match dim");
        m.params[n] = mp;
      }
    }
    if (any_alpha) m.leaf_alpha = alphas;
    if (!j.at("dot").is_null()) m.dot = dot_from_json(j.at("dot"), m.hierarchy);
    const json& fit = j.at("fit");
    m.objective_value = decode_double(fit.at("objective").get<std::string>());
    m.iterations = fit.at("iterations").get<std::size_t>();
    m.converged = fit.at("converged").get<bool>();
    return m;
  });
}

std::string save_dot(const Hierarchy& h, const DotCoefficients& dot) {
  json j = dot_json(h, dot);
  j["format"] = "hbt-dot";
  j["version"] = ModelFile::kVersion;
  return j.dump(2) + "\n";
}

DotCoefficients load_dot(std::string_view text, const Hierarchy& h, const std::string& source) {
  return with_json_errors(text, source, [&] {
    const json j = json::parse(text);
    if (j.value("format", "") != "hbt-dot") throw ParseError(source, 0, 0, "not an hbt DOT file");
    if (j.at("version").get<int>() != ModelFile::kVersion)
      throw ParseError(source, 0, 0, "unsupported DOT file version");
    return dot_from_json(j, h);
  });
}

}  // namespace hbt
