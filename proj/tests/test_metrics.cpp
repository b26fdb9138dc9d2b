#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "santa/errors.hpp"
#include "santa/metrics.hpp"

using namespace santa;

namespace {

std::ptrdiff_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

Lexicon plane_lexicon() {
  // Objects at 0, 90 and 45 degrees; one action, one filler.
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<LexiconEntry> e{{0, "<bos>", Category::other, {}, {}, {1, 0}},
                              {1, "<eos>", Category::other, {}, {}, {0, 1}},
                              {2, "a", Category::object, {}, {}, {1, 0}},
                              {3, "b", Category::object, {}, {}, {0, 1}},
                              {4, "ab", Category::object, {}, {}, {r, r}},
                              {5, "run", Category::action, {}, {}, {1, 0}},
                              {6, "the", Category::other, {}, {}, {0, 1}}};
  return Lexicon(std::move(e));
}

// Sample whose caption lists the objects and actions once each; instance i holds objects[i].
VideoSample make_sample(std::string id, const std::vector<TokenId>& objects, const std::vector<TokenId>& actions) {
  VideoSample s;
  s.sample_id = std::move(id);
  s.split = Split::eval;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    s.gt_objects.push_back({objects[i], static_cast<InstanceId>(i)});
    s.tracklets.emplace(static_cast<InstanceId>(i), Tensor({1, 2}, {0.0, 0.0}));
    s.caption.push_back(objects[i]);
  }
  for (auto a : actions) {
    s.gt_actions.push_back({a, 0, objects.size() > 1 ? 1u : 0u});
    s.caption.push_back(a);
  }
  return s;
}

}  // namespace

TEST(Metrics, ParsePrediction) {
  Lexicon lex = plane_lexicon();
  std::vector<TokenId> cap{2, 5, 4, 2, 6};
  auto p = parse_prediction(cap, lex);
  EXPECT_EQ(p.objects, (TokenSet{2, 4}));
  EXPECT_EQ(p.actions, (TokenSet{5}));
  std::vector<TokenId> filler{6, 6};
  auto q = parse_prediction(filler, lex);
  EXPECT_TRUE(q.objects.empty());
  EXPECT_TRUE(q.actions.empty());
  std::vector<TokenId> bad{42};
  EXPECT_THROW(parse_prediction(bad, lex), UsageError);
}

TEST(Metrics, HalWeightedExamples) {
  Lexicon lex = plane_lexicon();
  EXPECT_EQ(hal_weighted({2, 3}, {2, 3}, lex), 0.0);
  EXPECT_DOUBLE_EQ(hal_weighted({3}, {2}, lex), 1.0);
  EXPECT_NEAR(hal_weighted({4}, {2, 3}, lex), 1.0 - 0.70710678, 1e-8);
  EXPECT_EQ(hal_weighted({}, {2}, lex), 0.0);
  EXPECT_EQ(hal_weighted({2}, {}, lex), 1.0);
}

TEST(Metrics, CovWeightedExamples) {
  std::vector<std::vector<TokenId>> docs{{2, 3}, {2, 3}};
  CorpusStats stats = build_corpus_stats(docs);
  auto doc = term_counts(docs[0]);
  EXPECT_DOUBLE_EQ(cov_weighted({2, 3}, {2, 3}, stats, doc), 1.0);
  EXPECT_EQ(cov_weighted({4}, {2, 3}, stats, doc), 0.0);
  EXPECT_DOUBLE_EQ(cov_weighted({2}, {2, 3}, stats, doc), 0.5);
  EXPECT_EQ(cov_weighted({}, {}, stats, doc), 1.0);
}

TEST(Metrics, F1Examples) {
  EXPECT_EQ(f1_score(0.0, 1.0), 1.0);
  EXPECT_EQ(f1_score(1.0, 0.0), 0.0);
  EXPECT_EQ(f1_score(0.5, 0.5), 0.5);
  EXPECT_THROW(f1_score(1.5, 0.5), UsageError);
  EXPECT_THROW(f1_score(0.5, -0.1), UsageError);
}

TEST(Metrics, F1Monotone) {
  for (double h = 0.0; h <= 1.0; h += 0.125)
    for (double c = 0.0; c < 1.0; c += 0.125) {
      EXPECT_LE(f1_score(h, c), f1_score(h, c + 0.125));
      if (h < 1.0) EXPECT_GE(f1_score(h, c), f1_score(h + 0.125, c));
    }
}

TEST(Metrics, AddingTruthTokenNeverHurts) {
  std::mt19937_64 rng(21);
  Lexicon lex = oracle::random_lexicon(rng, 30, 6);
  std::uniform_int_distribution<TokenId> tok(2, 29);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSet P, G;
    for (int i = 0; i < 3; ++i) P.insert(tok(rng));
    for (int i = 0; i < 3; ++i) G.insert(tok(rng));
    std::vector<TokenId> doc(G.begin(), G.end());
    std::vector<std::vector<TokenId>> docs{doc, {2, 3}};
    CorpusStats stats = build_corpus_stats(docs);
    TokenSet P2 = P;
    P2.insert(*G.begin());
    EXPECT_LE(hal_weighted(P2, G, lex), hal_weighted(P, G, lex) + 1e-15);
    EXPECT_GE(cov_weighted(P2, G, stats, term_counts(doc)), cov_weighted(P, G, stats, term_counts(doc)));
  }
}

TEST(Metrics, ExactAndWeightedCoincideOnOrthogonalEmbeddings) {
  std::vector<LexiconEntry> e;
  for (TokenId i = 0; i < 6; ++i) {
    std::vector<double> v(6, 0.0);
    v[i] = 1.0;
    e.push_back({i, i == 0 ? "<bos>" : i == 1 ? "<eos>" : "t" + std::to_string(i), i < 2 ? Category::other : Category::object, {}, {}, v});
  }
  Lexicon lex(std::move(e));
  // Every document holds every token once: equal tf-idf weights.
  std::vector<std::vector<TokenId>> docs{{2, 3, 4, 5}, {2, 3, 4, 5}};
  CorpusStats stats = build_corpus_stats(docs);
  TokenSet G{2, 3, 4};
  auto doc = term_counts(std::vector<TokenId>{2, 3, 4});
  for (TokenSet P : {TokenSet{2}, TokenSet{2, 5}, TokenSet{5}, TokenSet{2, 3, 4, 5}}) {
    EXPECT_DOUBLE_EQ(hal_weighted(P, G, lex), hal_exact(P, G));
    EXPECT_DOUBLE_EQ(cov_weighted(P, G, stats, doc), cov_exact(P, G));
  }
}

TEST(Metrics, CorpusIdentities) {
  Lexicon lex = plane_lexicon();
  std::vector<VideoSample> eval{make_sample("e0", {2, 3}, {5}), make_sample("e1", {4}, {5})};
  std::map<std::string, std::vector<TokenId>> perfect, empty;
  for (const auto& s : eval) {
    perfect[s.sample_id] = s.caption;
    empty[s.sample_id] = {};
  }
  MetricReport r = evaluate_corpus(perfect, eval, lex);
  for (auto v : {Variant::exact, Variant::weighted})
    for (auto c : {MetricCategory::object, MetricCategory::action}) EXPECT_EQ(r.at(v, c).f1, 1.0);

  MetricReport z = evaluate_corpus(empty, eval, lex);
  EXPECT_EQ(z.at(Variant::weighted, MetricCategory::object).f1, 0.0);
  EXPECT_EQ(z.at(Variant::weighted, MetricCategory::action).f1, 0.0);
  EXPECT_EQ(z.empty_prediction[0], 2u);

  std::map<std::string, std::vector<TokenId>> partial{{"e0", {2}}};
  try {
    evaluate_corpus(partial, eval, lex);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("e1"), std::string::npos);
  }
}

TEST(Metrics, IdenticalSamplesAverageToSingleScore) {
  Lexicon lex = plane_lexicon();
  std::vector<VideoSample> one{make_sample("a", {2, 3}, {5})};
  std::vector<VideoSample> many;
  std::map<std::string, std::vector<TokenId>> p1{{"a", {4, 5, 2}}}, pn;
  for (int i = 0; i < 5; ++i) {
    many.push_back(make_sample("s" + std::to_string(i), {2, 3}, {5}));
    pn[many.back().sample_id] = {4, 5, 2};
  }
  MetricReport a = evaluate_corpus(p1, one, lex), b = evaluate_corpus(pn, many, lex);
  for (auto v : {Variant::exact, Variant::weighted})
    for (auto c : {MetricCategory::object, MetricCategory::action}) {
      EXPECT_NEAR(a.at(v, c).hal, b.at(v, c).hal, 1e-15);
      EXPECT_NEAR(a.at(v, c).cov, b.at(v, c).cov, 1e-15);
      EXPECT_NEAR(a.at(v, c).f1, b.at(v, c).f1, 1e-15);
    }
}

TEST(Metrics, ReportMatchesBruteForceOracle) {
  std::mt19937_64 rng(33);
  Lexicon lex = oracle::random_lexicon(rng, 24, 5);
  std::uniform_int_distribution<TokenId> obj(1, 11), act(1, 11);
  std::uniform_int_distribution<int> count(1, 4), pcount(0, 4);
  std::vector<VideoSample> eval;
  std::map<std::string, std::vector<TokenId>> preds;
  for (int i = 0; i < 50; ++i) {
    std::vector<TokenId> os, as;
    for (int k = count(rng); k > 0; --k) os.push_back(2 * obj(rng));
    for (int k = count(rng); k > 0; --k) as.push_back(2 * act(rng) + 1);
    char id[16];
    std::snprintf(id, sizeof id, "s%02d", i);
    eval.push_back(make_sample(id, os, as));
    std::vector<TokenId> p;
    for (int k = pcount(rng); k > 0; --k) p.push_back(2 * obj(rng));
    for (int k = pcount(rng); k > 0; --k) p.push_back(2 * act(rng) + 1);
    preds[id] = p;
  }
  MetricReport r = evaluate_corpus(preds, eval, lex);

  std::vector<std::vector<TokenId>> docs;
  for (const auto& s : eval) docs.push_back(s.caption);
  double sum[2][2][3] = {};
  for (const auto& s : eval) {
    std::set<TokenId> P[2], G[2];
    for (auto t : preds[s.sample_id]) P[t % 2].insert(t);
    for (auto& o : s.gt_objects) G[0].insert(o.token);
    for (auto& a : s.gt_actions) G[1].insert(a.action);
    for (int c = 0; c < 2; ++c) {
      const double he = oracle::hal_exact(P[c], G[c]), ce = oracle::cov_exact(P[c], G[c]);
      const double hw = oracle::hal_weighted(P[c], G[c], lex), cw = oracle::cov_weighted(P[c], G[c], s.caption, docs);
      const double v[2][3] = {{he, ce, oracle::f1(he, ce)}, {hw, cw, oracle::f1(hw, cw)}};
      for (int vi = 0; vi < 2; ++vi)
        for (int f = 0; f < 3; ++f) sum[vi][c][f] += v[vi][f];
    }
  }
  EXPECT_EQ(r.n_samples, 50u);
  for (int v = 0; v < 2; ++v)
    for (int c = 0; c < 2; ++c) {
      const auto& s = r.at(static_cast<Variant>(v), static_cast<MetricCategory>(c));
      EXPECT_NEAR(s.hal, sum[v][c][0] / 50, 1e-9);
      EXPECT_NEAR(s.cov, sum[v][c][1] / 50, 1e-9);
      EXPECT_NEAR(s.f1, sum[v][c][2] / 50, 1e-9);
    }
}

TEST(Metrics, ReportSerialization) {
  Lexicon lex = plane_lexicon();
  std::vector<VideoSample> eval{make_sample("e0", {2, 3}, {5})};
  std::map<std::string, std::vector<TokenId>> p{{"e0", {4, 5}}};
  MetricReport r = evaluate_corpus(p, eval, lex);
  r.alignment_gap = 0.125;
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  std::ostringstream csv;
  write_report_csv(csv, r);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "variant,category,Hal,Cov,F1,n_samples,alignment_gap");
  EXPECT_EQ(lines(csv.str()), 5);
}

TEST(Metrics, SerialAndParallelAgree) {
  std::mt19937_64 rng(34);
  Lexicon lex = oracle::random_lexicon(rng, 16, 4);
  std::vector<VideoSample> eval;
  std::map<std::string, std::vector<TokenId>> p;
  for (int i = 0; i < 40; ++i) {
    eval.push_back(make_sample("x" + std::to_string(i), {static_cast<TokenId>(2 + 2 * (i % 6))}, {static_cast<TokenId>(3 + 2 * (i % 5))}));
    p[eval.back().sample_id] = {static_cast<TokenId>(2 + 2 * (i % 4)), 5};
  }
  EXPECT_EQ(evaluate_corpus(p, eval, lex, Exec::serial), evaluate_corpus(p, eval, lex, Exec::parallel));
}
