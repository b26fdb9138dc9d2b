// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "santa/experiment.hpp"
#include "santa/losses.hpp"
#include "santa/metrics.hpp"
#include "santa/self_augment.hpp"

using namespace santa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

void gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (const auto& c : check_loss_gradients(seed, 1e-5))
      if (!(c.result.max_rel_error <= worst)) {
        worst = c.result.max_rel_error;
        where = c.loss + " seed " + std::to_string(seed);
      }
  const double dt = seconds_since(t0);
  report(1, worst <= 1e-4 && dt < 60.0, fmt("max rel err %.3g (%s), %.1fs", worst, where.c_str(), dt));
}

void suppression_invariant() {
  std::size_t runs = 0, violations = 0, bad_sums = 0, greedy_mismatch = 0, bit = 0;
  double worst_sum = 0.0;
  std::mt19937_64 rng(2024);
  for (std::uint64_t seed = 1; runs < 1000; ++seed) {
    WorldConfig wc;
    wc.num_train = 40;
    wc.num_eval = 10;
    World w = generate_world(seed, wc);
    ModelConfig mc = model_config_for(w.lexicon, w.corpus, seed);
    ModelState state = init_model(mc);
    if (seed % 2 == 0) {
      // A briefly trained model actually wants to say the ground truth.
      TrainConfig tc;
      tc.steps = 30;
      tc.seed = seed;
      state = train(state, filter_split(w.corpus, Split::train), w.lexicon, tc).model;
    }
    BoundModel m(state, nullptr);
    std::bernoulli_distribution extra(0.1);
    for (const auto& s : w.corpus) {
      if (runs == 1000) break;
      ++runs;
      TokenSet omega = build_suppression_set(s, w.lexicon);
      for (TokenId t = 2; t < w.lexicon.size(); ++t)
        if (extra(rng)) omega.insert(t);
      const std::size_t len = s.caption.size();
      const auto h = generate_hallucinative(m, s, omega, len);
      for (auto t : h.tokens) violations += omega.count(t);
      const auto greedy = greedy_decode(m, s, len);
      for (auto t : greedy) bit += omega.count(t) > 0;

      const Var video = pool_video(m, s);
      std::vector<TokenId> prefix;
      for (std::size_t k = 0; k <= h.tokens.size() && k < len; ++k) {
        const auto d = suppressed_distribution(decode_distribution(m, video, prefix), omega, k);
        double sum = 0.0;
        for (double p : d) sum += p;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        if (!(std::abs(sum - 1.0) <= 1e-9)) ++bad_sums;
        for (auto t : omega)
          if (d[t] != 0.0) ++violations;
        if (k < h.tokens.size()) prefix.push_back(h.tokens[k]);
      }
      if (generate_hallucinative(m, s, {}, len).tokens != greedy) ++greedy_mismatch;
    }
  }
  report(2, violations == 0 && bad_sums == 0 && greedy_mismatch == 0,
         fmt("%zu runs, %zu suppressed emissions, max |sum-1| %.2g, %zu empty-set mismatches, "
             "%zu greedy tokens would have been suppressed",
             runs, violations, worst_sum, greedy_mismatch, bit));
}

void metric_oracle() {
  std::mt19937_64 rng(50);
  double worst = 0.0;
  std::uniform_int_distribution<int> ntok(0, 5), ndoc(1, 6);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 10 + inst % 15;
    Lexicon lex = oracle::random_lexicon(rng, n, 3 + inst % 6);
    std::uniform_int_distribution<TokenId> tok(2, static_cast<TokenId>(n - 1));
    std::set<TokenId> P, G;
    for (int k = ntok(rng); k > 0; --k) P.insert(tok(rng));
    for (int k = ntok(rng); k > 0; --k) G.insert(tok(rng));
    // The truth caption mentions every G token, some twice; other documents are random.
    std::vector<TokenId> doc;
    for (auto g : G) {
      doc.push_back(g);
      if (rng() % 2) doc.push_back(g);
    }
    doc.push_back(tok(rng));
    std::vector<std::vector<TokenId>> docs{doc};
    for (int d = ndoc(rng); d > 0; --d) {
      std::vector<TokenId> x;
      for (int k = 1 + ntok(rng); k > 0; --k) x.push_back(tok(rng));
      docs.push_back(x);
    }
    const CorpusStats stats = build_corpus_stats(docs);
    const TokenSet tp(P.begin(), P.end()), tg(G.begin(), G.end());
    const double h = hal_weighted(tp, tg, lex), c = cov_weighted(tp, tg, stats, term_counts(doc));
    const double oh = oracle::hal_weighted(P, G, lex), oc = oracle::cov_weighted(P, G, doc, docs);
    worst = std::max({worst, std::abs(h - oh), std::abs(c - oc), std::abs(f1_score(h, c) - oracle::f1(oh, oc))});
  }

  // Identities.
  std::vector<LexiconEntry> e{{0, "<bos>", Category::other, {}, {}, {1, 0}},
                              {1, "<eos>", Category::other, {}, {}, {0, 1}},
                              {2, "x", Category::object, {}, {}, {1, 0}},
                              {3, "y", Category::object, {}, {}, {0, 1}}};
  Lexicon lex(std::move(e));
  std::vector<std::vector<TokenId>> docs{{2}, {3}};
  CorpusStats stats = build_corpus_stats(docs);
  const TokenSet X{2}, Y{3};
  const bool same = f1_score(hal_weighted(X, X, lex), cov_weighted(X, X, stats, term_counts(docs[0]))) == 1.0;
  const bool disjoint = f1_score(hal_weighted(Y, X, lex), cov_weighted(Y, X, stats, term_counts(docs[0]))) == 0.0;
  const bool half = f1_score(0.5, 0.5) == 0.5;
  report(3, worst <= 1e-9 && same && disjoint && half,
         fmt("50 instances max |diff| %.2g; P=G %s, orthogonal %s, f1(.5,.5) %s", worst, same ? "ok" : "bad",
             disjoint ? "ok" : "bad", half ? "ok" : "bad"));
}

void info_nce_closed_forms() {
  auto v = [](std::vector<double> x) { return constant(Tensor::vector(std::move(x))); };
  const Var a = v({1, 0}), p = v({1, 0});
  const double empty = info_nce(a, p, {}, 0.07).item();
  std::vector<Var> same{v({1, 0})}, ortho{v({0, 1})};
  const double ln2 = info_nce(a, p, same, 0.07).item();
  const double e1 = info_nce(a, p, ortho, 1.0).item();
  const double expect_total = 0.25 * (0.3 + 0.2) + 0.5 * 0.7 + 1.5;
  TrainConfig tc;
  const bool total = tc.alpha == 0.25 && tc.beta == 0.5 && total_loss(1.5, 0.7, 0.3, 0.2, tc.alpha, tc.beta) == expect_total &&
                     total_loss(v({1.5}), v({0.7}), v({0.3}), v({0.2}), 0.25, 0.5).item() == expect_total;
  const bool ok = empty == 0.0 && std::abs(ln2 - std::log(2.0)) <= 1e-12 &&
                  std::abs(e1 - std::log(1.0 + std::exp(-1.0))) <= 1e-12 && total;
  report(4, ok, fmt("empty %.3g, ln2 err %.2g, ln(1+e^-1) err %.2g, composition %s", empty, std::abs(ln2 - std::log(2.0)),
                    std::abs(e1 - std::log(1.0 + std::exp(-1.0))), total ? "exact" : "off"));
}

double med(const ArmResult& a, MetricCategory c) { return a.median_f1(Variant::weighted, c); }

std::vector<Arm> all_arms() {
  std::vector<Arm> arms{baseline_arm()};
  for (auto& a : ablation_arms()) arms.push_back(a);
  return arms;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

}  // namespace

int main() {
  gradient_fidelity();
  suppression_invariant();
  metric_oracle();
  info_nce_closed_forms();

  const WorldConfig wc;
  const TrainConfig tc;
  World world = generate_world(1, wc);
  const auto arms = all_arms();
  const auto t0 = Clock::now();
  const ExperimentResult r = run_experiment(world.corpus, world.lexicon, arms, kSeeds, tc);
  const double dt = seconds_since(t0);

  const ArmResult& base = r.arms[0];
  const ArmResult& full = r.arm("SANTA-full");
  std::string rows;
  bool monotone = true;
  for (std::size_t i = 1; i < r.arms.size(); ++i) {
    rows += fmt(" %.4f", med(r.arms[i], MetricCategory::object));
    if (i > 1 && med(r.arms[i], MetricCategory::object) < med(r.arms[i - 1], MetricCategory::object)) monotone = false;
  }
  const double bo = med(base, MetricCategory::object), ba = med(base, MetricCategory::action);
  const double fo = med(full, MetricCategory::object), fa = med(full, MetricCategory::action);
  report(5, fo > bo && fa > ba && monotone && dt < 600.0,
         fmt("F1_obj base %.4f full %.4f, F1_act base %.4f full %.4f, ablation F1_obj%s (%s), %.0fs", bo, fo, ba, fa,
             rows.c_str(), monotone ? "non-decreasing" : "not monotone", dt));

  int up = 0;
  std::string gaps;
  for (const auto& run : full.runs) {
    const double pre = run.pre.alignment_gap.value_or(NAN), post = run.post.alignment_gap.value_or(NAN);
    up += post > pre;
    gaps += fmt(" %.3f->%.3f", pre, post);
  }
  report(6, up >= 4, fmt("%d/5 seeds increase:%s", up, gaps.c_str()));

  WorldConfig noisy = wc;
  noisy.tracklet_noise = 3.0 * wc.tracklet_noise;
  World nw = generate_world(1, noisy);
  const std::vector<Arm> pair{baseline_arm(), ablation_arms().back()};
  const ExperimentResult rn = run_experiment(nw.corpus, nw.lexicon, pair, kSeeds, tc);
  const double nbo = med(rn.arms[0], MetricCategory::object), nfo = med(rn.arms[1], MetricCategory::object);
  report(7, nfo > nbo, fmt("sigma %.2f: F1_obj base %.4f full %.4f", noisy.tracklet_noise, nbo, nfo));

  // Rerun the first SANTA-full seed and compare against the experiment's report.
  const auto train_split = filter_split(world.corpus, Split::train);
  const auto eval_split = filter_split(world.corpus, Split::eval);
  TrainConfig again = tc;
  again.toggles = full.arm.toggles;
  again.seed = kSeeds[0];
  ModelState init = init_model(model_config_for(world.lexicon, world.corpus, kSeeds[0]));
  const ModelState trained = train(init, train_split, world.lexicon, again).model;
  const MetricReport rep = evaluate_model(trained, eval_split, world.lexicon);
  std::stringstream ckpt;
  write_checkpoint(ckpt, trained);
  const ModelState restored = read_checkpoint(ckpt);
  const MetricReport rep2 = evaluate_model(restored, eval_split, world.lexicon);
  const bool same_run = rep == full.runs[0].post && report_to_json(rep) == report_to_json(full.runs[0].post);
  const bool same_ckpt = restored == trained && report_to_json(rep2) == report_to_json(rep) &&
                         predict_captions(restored, eval_split) == predict_captions(trained, eval_split);
  report(8, same_run && same_ckpt,
         fmt("rerun %s, checkpoint round-trip %s", same_run ? "bit-identical" : "differs",
             same_ckpt ? "bit-identical" : "differs"));

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
