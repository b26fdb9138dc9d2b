#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "santa/errors.hpp"
#include "santa/experiment.hpp"
#include "santa/trainer.hpp"

using namespace santa;

namespace {

std::ptrdiff_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

World small_world(std::uint64_t seed) {
  WorldConfig wc;
  wc.num_train = 24;
  wc.num_eval = 8;
  wc.d_vis = 8;
  wc.frames = 4;
  return generate_world(seed, wc);
}

ModelState small_model(const World& w, std::uint64_t seed) {
  ModelConfig mc = model_config_for(w.lexicon, w.corpus, seed);
  mc.d_model = 12;
  mc.d_ff = 16;
  mc.num_queries = 4;
  return init_model(mc);
}

TrainConfig short_run(std::size_t steps) {
  TrainConfig tc;
  tc.steps = steps;
  tc.batch_size = 6;
  tc.seed = 3;
  return tc;
}

}  // namespace

TEST(Trainer, ConfigValidated) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate());
  tc.batch_size = 1;
  EXPECT_THROW(tc.validate(), UsageError);
  tc = {};
  tc.learning_rate = 0.0;
  EXPECT_THROW(tc.validate(), UsageError);
  tc = {};
  tc.alpha = -1.0;
  EXPECT_THROW(tc.validate(), UsageError);
  tc = {};
  tc.tau = 0.0;
  EXPECT_THROW(tc.validate(), UsageError);
}

TEST(Trainer, LossWeightDefaults) {
  TrainConfig tc;
  EXPECT_EQ(tc.alpha, 0.25);
  EXPECT_EQ(tc.beta, 0.5);
}

TEST(Trainer, DeterministicRuns) {
  World w = small_world(1);
  auto train = filter_split(w.corpus, Split::train);
  auto a = santa::train(small_model(w, 1), train, w.lexicon, short_run(6));
  auto b = santa::train(small_model(w, 1), train, w.lexicon, short_run(6));
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.log, b.log);
  auto eval = filter_split(w.corpus, Split::eval);
  EXPECT_EQ(evaluate_model(a.model, eval, w.lexicon, Exec::serial), evaluate_model(b.model, eval, w.lexicon, Exec::parallel));
}

TEST(Trainer, AllTogglesOffIsPureCaptioning) {
  World w = small_world(2);
  auto train = filter_split(w.corpus, Split::train);
  TrainConfig tc = short_run(4);
  tc.toggles = {false, false, false, false};
  auto r = santa::train(small_model(w, 2), train, w.lexicon, tc);
  for (const auto& lb : r.log) {
    EXPECT_EQ(lb.l_video, 0.0);
    EXPECT_EQ(lb.l_obj, 0.0);
    EXPECT_EQ(lb.l_act, 0.0);
    EXPECT_EQ(lb.l_total, lb.l_g);
  }
}

TEST(Trainer, StepLogsBreakdown) {
  World w = small_world(3);
  auto train = filter_split(w.corpus, Split::train);
  TrainerState st = make_trainer_state(small_model(w, 3));
  std::vector<const VideoSample*> batch;
  for (std::size_t i = 0; i < 6; ++i) batch.push_back(&train[i]);
  const ModelState before = st.model;
  LossBreakdown lb = train_step(st, batch, w.lexicon, short_run(1));
  EXPECT_EQ(st.step, 1u);
  EXPECT_NE(st.model, before);
  EXPECT_GT(lb.l_video, 0.0);
  EXPECT_GT(lb.l_obj, 0.0);
  EXPECT_GT(lb.l_act, 0.0);
  EXPECT_DOUBLE_EQ(lb.l_total, total_loss(lb.l_g, lb.l_video, lb.l_obj, lb.l_act, lb.alpha, lb.beta));
}

TEST(Trainer, LossDecreases) {
  World w = small_world(4);
  auto train = filter_split(w.corpus, Split::train);
  for (Optimizer opt : {Optimizer::adam, Optimizer::sgd}) {
    TrainConfig tc = short_run(60);
    tc.optimizer = opt;
    if (opt == Optimizer::sgd) tc.learning_rate = 0.05;
    auto r = santa::train(small_model(w, 4), train, w.lexicon, tc);
    double head = 0, tail = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      head += r.log[i].l_total;
      tail += r.log[r.log.size() - 1 - i].l_total;
    }
    EXPECT_LT(tail, head) << (opt == Optimizer::adam ? "adam" : "sgd");
  }
}

TEST(Trainer, CallbackAndLog) {
  World w = small_world(5);
  auto train = filter_split(w.corpus, Split::train);
  std::size_t calls = 0;
  auto r = santa::train(small_model(w, 5), train, w.lexicon, short_run(3),
                        [&](std::size_t step, const LossBreakdown&) { EXPECT_EQ(step, ++calls); });
  EXPECT_EQ(calls, 3u);
  std::ostringstream out;
  write_training_log(out, r.log);
  EXPECT_EQ(lines(out.str()), 4);
}

TEST(Trainer, NonFiniteStateRaisesNumericError) {
  World w = small_world(6);
  auto train = filter_split(w.corpus, Split::train);
  ModelState m = small_model(w, 6);
  m[Param::lm_b][0] = std::nan("");
  EXPECT_THROW(santa::train(m, train, w.lexicon, short_run(2)), NumericError);
}

TEST(Trainer, PredictionsCoverEvalSplit) {
  World w = small_world(7);
  auto eval = filter_split(w.corpus, Split::eval);
  ModelState m = small_model(w, 7);
  auto preds = predict_captions(m, eval);
  EXPECT_EQ(preds.size(), eval.size());
  for (const auto& [id, cap] : preds) {
    EXPECT_LE(cap.size(), max_caption_length(m.config));
    for (auto t : cap) EXPECT_NE(t, m.config.eos);
  }
  const double gap = alignment_gap(m, eval);
  EXPECT_GE(gap, -1.0);
  EXPECT_LE(gap, 1.0);
}

TEST(Experiment, ArmsAndMedian) {
  auto arms = ablation_arms();
  ASSERT_EQ(arms.size(), 4u);
  EXPECT_EQ(arms.back().name, "SANTA-full");
  EXPECT_EQ(arms.front().toggles, (LossToggles{true, false, false, false}));
  EXPECT_EQ(arms.back().toggles, (LossToggles{true, true, true, true}));
  EXPECT_EQ(baseline_arm().toggles, (LossToggles{false, false, false, false}));
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Experiment, SmallAblationCsv) {
  World w = small_world(8);
  auto arms = ablation_arms();
  std::vector<std::uint64_t> seeds{1, 2};
  auto r = run_experiment(w.corpus, w.lexicon, arms, seeds, short_run(2));
  ASSERT_EQ(r.arms.size(), 4u);
  EXPECT_EQ(r.arm("SANTA-full").runs.size(), 2u);
  // Pre-training reports depend only on the seed.
  EXPECT_EQ(r.arms[0].runs[1].pre, r.arms[3].runs[1].pre);
  std::ostringstream out;
  write_ablation_csv(out, r);
  EXPECT_EQ(lines(out.str()), 5);
  EXPECT_THROW(r.arm("nope"), UsageError);
}

TEST(Experiment, LossGradientsMatchFiniteDifferences) {
  auto checks = check_loss_gradients(1);
  ASSERT_EQ(checks.size(), 5u);
  for (const auto& c : checks) {
    EXPECT_LE(c.result.max_rel_error, 1e-4) << c.loss;
    EXPECT_GT(c.result.coordinates, 0u);
  }
}
