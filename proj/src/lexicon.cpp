#include "santa/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "santa/errors.hpp"
#include "text_io.hpp"

namespace santa {

std::string_view category_name(Category c) {
  switch (c) {
    case Category::object:
      return "object";
    case Category::action:
      return "action";
    case Category::other:
      return "other";
  }
  return "other";
}

std::optional<Category> parse_category(std::string_view s) {
  if (s == "object") return Category::object;
  if (s == "action") return Category::action;
  if (s == "other") return Category::other;
  return std::nullopt;
}

namespace {

// Returns an empty string when the entries are consistent, otherwise the first problem.
std::string check_entries(const std::vector<LexiconEntry>& entries) {
  const auto n = entries.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = entries[i];
    if (e.id != i) return "token ids must be dense from 0; position " + std::to_string(i) + " holds id " + std::to_string(e.id);
    if (e.embedding.empty()) return "token " + std::to_string(e.id) + " has an empty embedding";
    if (e.embedding.size() != entries[0].embedding.size())
      return "token " + std::to_string(e.id) + " embedding dimension differs from token 0";
    double s = 0.0;
    for (double v : e.embedding) s += v * v;
    if (std::abs(std::sqrt(s) - 1.0) > 1e-9) return "token " + std::to_string(e.id) + " embedding is not unit norm";
    for (auto l : e.synonyms)
      if (l >= n) return "token " + std::to_string(e.id) + " references unknown synonym id " + std::to_string(l);
    for (auto l : e.hypernyms)
      if (l >= n) return "token " + std::to_string(e.id) + " references unknown hypernym id " + std::to_string(l);
  }
  return {};
}

std::vector<TokenId> parse_links(std::string_view field, std::string_view prefix, std::size_t line) {
  if (field.substr(0, prefix.size()) != prefix)
    throw ParseError("expected field starting with '" + std::string(prefix) + "'", line);
  std::vector<TokenId> out;
  for (auto part : textio::split(field.substr(prefix.size()), ',')) {
    auto v = textio::parse_index(part);
    if (!v) throw ParseError("malformed token id '" + std::string(part) + "'", line);
    out.push_back(static_cast<TokenId>(*v));
  }
  return out;
}

}  // namespace

Lexicon::Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
  if (auto problem = check_entries(entries_); !problem.empty()) throw UsageError("lexicon: " + problem);
  dim_ = entries_.empty() ? 0 : entries_[0].embedding.size();
}

const LexiconEntry& Lexicon::entry(TokenId id) const {
  if (id >= entries_.size()) throw UsageError("unknown token id " + std::to_string(id));
  return entries_[id];
}

std::optional<TokenId> Lexicon::find(std::string_view surface) const {
  for (const auto& e : entries_)
    if (e.surface == surface) return e.id;
  return std::nullopt;
}

TokenId Lexicon::bos() const {
  auto id = find(kBosSurface);
  if (!id) throw UsageError("lexicon has no <bos> token");
  return *id;
}

TokenId Lexicon::eos() const {
  auto id = find(kEosSurface);
  if (!id) throw UsageError("lexicon has no <eos> token");
  return *id;
}

TokenSet expand_token_set(const TokenSet& tokens, const Lexicon& lexicon) {
  TokenSet out = tokens;
  for (auto t : tokens) {
    const auto& e = lexicon.entry(t);
    out.insert(e.synonyms.begin(), e.synonyms.end());
    out.insert(e.hypernyms.begin(), e.hypernyms.end());
  }
  return out;
}

Lexicon read_lexicon(std::istream& in) {
  std::vector<LexiconEntry> entries;
  std::map<TokenId, std::size_t> line_of;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = textio::split(line, '\t');
    if (fields.size() != 6) throw ParseError("expected 6 tab-separated fields, got " + std::to_string(fields.size()), lineno);
    LexiconEntry e;
    auto id = textio::parse_index(fields[0]);
    if (!id) throw ParseError("malformed token id '" + std::string(fields[0]) + "'", lineno);
    e.id = static_cast<TokenId>(*id);
    if (line_of.count(e.id)) throw ParseError("duplicate token id " + std::to_string(e.id), lineno);
    line_of[e.id] = lineno;
    e.surface = std::string(fields[1]);
    if (e.surface.empty()) throw ParseError("empty surface form", lineno);
    auto cat = parse_category(fields[2]);
    if (!cat) throw ParseError("unknown category '" + std::string(fields[2]) + "'", lineno);
    e.category = *cat;
    e.synonyms = parse_links(fields[3], "syn:", lineno);
    e.hypernyms = parse_links(fields[4], "hyp:", lineno);
    if (fields[5].substr(0, 4) != "emb:") throw ParseError("expected field starting with 'emb:'", lineno);
    for (auto part : textio::split(fields[5].substr(4), ',')) {
      auto v = textio::parse_double(part);
      if (!v) throw ParseError("malformed embedding value '" + std::string(part) + "'", lineno);
      e.embedding.push_back(*v);
    }
    entries.push_back(std::move(e));
  }

  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& e : entries) {
    const auto ln = line_of[e.id];
    for (auto l : e.synonyms)
      if (!line_of.count(l)) throw ParseError("unknown token id " + std::to_string(l) + " in synonyms", ln);
    for (auto l : e.hypernyms)
      if (!line_of.count(l)) throw ParseError("unknown token id " + std::to_string(l) + " in hypernyms", ln);
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].id != i) throw ParseError("token ids are not dense: missing id " + std::to_string(i), lineno);
  if (auto problem = check_entries(entries); !problem.empty()) {
    throw ParseError(problem, lineno);
  }
  return Lexicon(std::move(entries));
}

void write_lexicon(std::ostream& out, const Lexicon& lexicon) {
  auto join_ids = [](const std::vector<TokenId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(ids[i]);
    }
    return s;
  };
  for (const auto& e : lexicon.entries()) {
    out << e.id << '\t' << e.surface << '\t' << category_name(e.category) << "\tsyn:" << join_ids(e.synonyms)
        << "\thyp:" << join_ids(e.hypernyms) << "\temb:";
    for (std::size_t i = 0; i < e.embedding.size(); ++i) {
      if (i) out << ',';
      out << textio::format_double(e.embedding[i]);
    }
    out << '\n';
  }
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon file " + path.string());
  return read_lexicon(in);
}

void save_lexicon(const std::filesystem::path& path, const Lexicon& lexicon) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write lexicon file " + path.string());
  write_lexicon(out, lexicon);
}

TermCounts term_counts(std::span<const TokenId> document) {
  TermCounts tc;
  for (auto t : document) ++tc[t];
  return tc;
}

CorpusStats build_corpus_stats(std::span<const std::vector<TokenId>> documents) {
  CorpusStats stats;
  stats.n_docs = documents.size();
  for (const auto& doc : documents) {
    auto tc = term_counts(doc);
    for (const auto& [tok, count] : tc) ++stats.df[tok];
    stats.tf.push_back(std::move(tc));
  }
  return stats;
}

double tf_idf(TokenId token, const TermCounts& document, const CorpusStats& stats) {
  const auto it = document.find(token);
  if (it == document.end()) return 0.0;
  const auto df_it = stats.df.find(token);
  const double df = df_it == stats.df.end() ? 0.0 : static_cast<double>(df_it->second);
  const double n = static_cast<double>(stats.n_docs);
  const double idf = std::log((1.0 + n) / (1.0 + df)) + 1.0;
  return static_cast<double>(it->second) * idf;
}

}  // namespace santa
