#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "santa/corpus.hpp"
#include "santa/errors.hpp"
#include "santa/lexicon.hpp"

using namespace santa;

namespace {

// child -> syn kid, hyp person; stand -> syn get_up, hyp move.
Lexicon tiny_lexicon() {
  std::vector<LexiconEntry> e;
  auto add = [&](std::string s, Category c, std::vector<double> emb) {
    e.push_back({static_cast<TokenId>(e.size()), std::move(s), c, {}, {}, std::move(emb)});
  };
  add("<bos>", Category::other, {1, 0});
  add("<eos>", Category::other, {0, 1});
  add("child", Category::object, {1, 0});
  add("kid", Category::object, {1, 0});
  add("person", Category::object, {0.6, 0.8});
  add("stand", Category::action, {0, 1});
  add("get_up", Category::action, {0, 1});
  add("move", Category::action, {0.8, 0.6});
  e[2].synonyms = {3};
  e[2].hypernyms = {4};
  e[5].synonyms = {6};
  e[5].hypernyms = {7};
  return Lexicon(std::move(e));
}

WorldConfig small_world() {
  WorldConfig c;
  c.num_train = 10;
  c.num_eval = 5;
  return c;
}

}  // namespace

TEST(Lexicon, ExpandOneHop) {
  Lexicon lex = tiny_lexicon();
  EXPECT_EQ(expand_token_set({*lex.find("child")}, lex), (TokenSet{2, 3, 4}));
  EXPECT_EQ(expand_token_set({*lex.find("stand")}, lex), (TokenSet{5, 6, 7}));
  EXPECT_EQ(expand_token_set({}, lex), TokenSet{});
  // kid has no links of its own: expansion is directional.
  EXPECT_EQ(expand_token_set({3}, lex), TokenSet{3});
}

TEST(Lexicon, InvariantsEnforced) {
  std::vector<LexiconEntry> e{{0, "a", Category::other, {}, {}, {1, 0}}, {2, "b", Category::other, {}, {}, {0, 1}}};
  EXPECT_THROW(Lexicon{e}, UsageError);
  std::vector<LexiconEntry> f{{0, "a", Category::other, {}, {}, {2, 0}}};
  EXPECT_THROW(Lexicon{f}, UsageError);
  std::vector<LexiconEntry> g{{0, "a", Category::other, {5}, {}, {1, 0}}};
  EXPECT_THROW(Lexicon{g}, UsageError);
}

TEST(Lexicon, RoundTripAndParseErrors) {
  Lexicon lex = generate_world(3, small_world()).lexicon;
  std::stringstream ss;
  write_lexicon(ss, lex);
  EXPECT_EQ(read_lexicon(ss), lex);

  std::istringstream dup("0\ta\tother\tsyn:\thyp:\temb:1,0\n0\tb\tother\tsyn:\thyp:\temb:0,1\n");
  try {
    read_lexicon(dup);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream badlink("0\ta\tother\tsyn:7\thyp:\temb:1,0\n");
  try {
    read_lexicon(badlink);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
  std::istringstream badcat("0\ta\tthing\tsyn:\thyp:\temb:1,0\n");
  EXPECT_THROW(read_lexicon(badcat), ParseError);
}

TEST(TfIdf, Examples) {
  std::vector<std::vector<TokenId>> docs{{1, 2}, {1, 3}, {1, 2, 2}};
  CorpusStats stats = build_corpus_stats(docs);
  EXPECT_EQ(stats.n_docs, 3u);
  // Present once with df = N: smoothing floor.
  EXPECT_DOUBLE_EQ(tf_idf(1, term_counts(docs[0]), stats), 1.0);
  EXPECT_EQ(tf_idf(3, term_counts(docs[0]), stats), 0.0);
  // Present twice, N = 3, df = 1.
  std::vector<std::vector<TokenId>> docs2{{5, 5}, {6}, {7}};
  CorpusStats s2 = build_corpus_stats(docs2);
  EXPECT_NEAR(tf_idf(5, term_counts(docs2[0]), s2), 2.0 * (std::log(2.0) + 1.0), 1e-12);
  EXPECT_NEAR(tf_idf(5, term_counts(docs2[0]), s2), 3.3863, 1e-4);
}

TEST(TfIdf, NonIncreasingInDf) {
  std::vector<std::vector<TokenId>> docs{{1, 2, 3}, {1, 2}, {1}, {4}};
  CorpusStats stats = build_corpus_stats(docs);
  TermCounts doc{{1, 1}, {2, 1}, {3, 1}};
  const double w1 = tf_idf(1, doc, stats), w2 = tf_idf(2, doc, stats), w3 = tf_idf(3, doc, stats);
  EXPECT_GT(w1, 0.0);
  EXPECT_LE(w1, w2);
  EXPECT_LE(w2, w3);
}

TEST(Corpus, EmptyFileGivesEmptyCorpus) {
  Lexicon lex = tiny_lexicon();
  std::istringstream in("");
  EXPECT_TRUE(read_corpus(in, lex).empty());
}

TEST(Corpus, RoundTripIsExact) {
  World w = generate_world(11, small_world());
  std::stringstream ss;
  write_corpus(ss, w.corpus);
  auto back = read_corpus(ss, w.lexicon);
  ASSERT_EQ(back.size(), w.corpus.size());
  EXPECT_EQ(back, w.corpus);
}

TEST(Corpus, UnknownTokenNamesIdAndLine) {
  World w = generate_world(11, small_world());
  std::stringstream ss;
  write_corpus(ss, std::span(w.corpus).first(2));
  std::string text = ss.str();
  // Replace the first caption token of the second record with an id beyond the vocabulary.
  const auto line2 = text.find('\n') + 1;
  auto tab1 = text.find('\t', line2);
  auto tab2 = text.find('\t', tab1 + 1);
  auto sp = text.find_first_of(" \t", tab2 + 1);
  text.replace(tab2 + 1, sp - tab2 - 1, "9999");
  std::istringstream in(text);
  try {
    read_corpus(in, w.lexicon);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("9999"), std::string::npos) << e.what();
  }
}

TEST(Corpus, MalformedRecord) {
  Lexicon lex = tiny_lexicon();
  std::istringstream in("only\tthree\tfields\n");
  EXPECT_THROW(read_corpus(in, lex), ParseError);
}

TEST(Generator, DeterministicAndSized) {
  World a = generate_world(5, small_world()), b = generate_world(5, small_world());
  EXPECT_EQ(a.lexicon, b.lexicon);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(filter_split(a.corpus, Split::train).size(), 10u);
  EXPECT_EQ(filter_split(a.corpus, Split::eval).size(), 5u);
  World c = generate_world(6, small_world());
  EXPECT_NE(a.corpus, c.corpus);
}

TEST(Generator, SamplesSatisfyInvariants) {
  World w = generate_world(7, WorldConfig{});
  std::set<std::string> train_ids, eval_ids;
  for (const auto& s : w.corpus) {
    EXPECT_NO_THROW(validate_sample(s, w.lexicon));
    EXPECT_GE(s.tracklets.size(), 2u);
    EXPECT_LE(s.tracklets.size(), 4u);
    EXPECT_GE(s.gt_actions.size(), 1u);
    EXPECT_LE(s.gt_actions.size(), 2u);
    (s.split == Split::train ? train_ids : eval_ids).insert(s.sample_id);
    for (const auto& o : s.gt_objects) {
      const auto& e = w.lexicon.entry(o.token);
      EXPECT_EQ(e.synonyms.size(), 1u);
      EXPECT_EQ(e.hypernyms.size(), 1u);
    }
  }
  for (const auto& id : train_ids) EXPECT_EQ(eval_ids.count(id), 0u);
  for (const auto& e : w.lexicon.entries()) {
    double n = 0.0;
    for (double x : e.embedding) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-9);
  }
}

TEST(Generator, NoiseFreeFramesAreIdenticalPerRole) {
  WorldConfig c = small_world();
  c.tracklet_noise = 0.0;
  c.num_train = 200;
  World w = generate_world(9, c);
  // Key: object token plus the multiset of (action, role) the instance plays.
  std::map<std::pair<TokenId, std::multiset<std::pair<TokenId, int>>>, const Tensor*> seen;
  std::size_t compared = 0;
  for (const auto& s : w.corpus)
    for (const auto& o : s.gt_objects) {
      std::multiset<std::pair<TokenId, int>> roles;
      for (const auto& r : s.gt_actions) {
        if (r.subject == o.instance) roles.insert({r.action, 0});
        if (r.object == o.instance) roles.insert({r.action, 1});
      }
      const Tensor& frames = s.tracklets.at(o.instance);
      auto [it, fresh] = seen.emplace(std::pair{o.token, roles}, &frames);
      if (!fresh) {
        if (roles.size() == 1) {
          EXPECT_EQ(*it->second, frames);
        } else {
          // Two motion terms may be summed in either order.
          for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_NEAR((*it->second)[i], frames[i], 1e-12);
        }
        ++compared;
      }
    }
  EXPECT_GT(compared, 50u);
}

TEST(Generator, ConfigValidated) {
  WorldConfig c = small_world();
  c.num_eval = 0;
  EXPECT_THROW(generate_world(1, c), UsageError);
  c = small_world();
  c.tracklet_noise = -1.0;
  EXPECT_THROW(generate_world(1, c), UsageError);
  c = small_world();
  c.num_objects = 0;
  EXPECT_THROW(generate_world(1, c), UsageError);
}
