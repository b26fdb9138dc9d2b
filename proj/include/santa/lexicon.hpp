#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace santa {

using TokenId = std::uint32_t;
using TokenSet = std::set<TokenId>;
// Term counts of one document (a caption).
using TermCounts = std::map<TokenId, std::size_t>;

enum class Category { object, action, other };

std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view s);

struct LexiconEntry {
  TokenId id = 0;
  std::string surface;
  Category category = Category::other;
  std::vector<TokenId> synonyms;
  std::vector<TokenId> hypernyms;
  std::vector<double> embedding;  // unit norm

  bool operator==(const LexiconEntry&) const = default;
};

inline constexpr std::string_view kBosSurface = "<bos>";
inline constexpr std::string_view kEosSurface = "<eos>";

/// Token table of the toy world. Ids are dense from 0, links reference
/// existing ids, and all embeddings share one dimension with unit norm.
/// Immutable after construction.
class Lexicon {
 public:
  Lexicon() = default;
  // Throws UsageError when an invariant does not hold.
  explicit Lexicon(std::vector<LexiconEntry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t embedding_dim() const noexcept { return dim_; }
  bool contains(TokenId id) const noexcept { return id < entries_.size(); }
  const LexiconEntry& entry(TokenId id) const;
  Category category(TokenId id) const { return entry(id).category; }
  std::span<const double> embedding(TokenId id) const { return entry(id).embedding; }
  std::optional<TokenId> find(std::string_view surface) const;
  const std::vector<LexiconEntry>& entries() const noexcept { return entries_; }

  // Sequence delimiters; present in every generated lexicon.
  TokenId bos() const;
  TokenId eos() const;

  bool operator==(const Lexicon& other) const { return entries_ == other.entries_; }

 private:
  std::vector<LexiconEntry> entries_;
  std::size_t dim_ = 0;
};

// tokens plus their listed synonyms and hypernyms (one hop).
TokenSet expand_token_set(const TokenSet& tokens, const Lexicon& lexicon);

Lexicon read_lexicon(std::istream& in);
void write_lexicon(std::ostream& out, const Lexicon& lexicon);
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const std::filesystem::path& path, const Lexicon& lexicon);

/// Document statistics for tf-idf. Built from the ground-truth captions of the
/// evaluation split.
struct CorpusStats {
  std::size_t n_docs = 0;
  std::map<TokenId, std::size_t> df;
  std::vector<TermCounts> tf;
};

TermCounts term_counts(std::span<const TokenId> document);
CorpusStats build_corpus_stats(std::span<const std::vector<TokenId>> documents);

// tf(token, document) * (ln((1 + N) / (1 + df)) + 1); zero when absent.
double tf_idf(TokenId token, const TermCounts& document, const CorpusStats& stats);

}  // namespace santa
