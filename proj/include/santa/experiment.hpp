#pragma once

// Ablation runner: trains each configuration over a list of seeds on one
// corpus, evaluates before and after training, and reports medians.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "santa/corpus.hpp"
#include "santa/grad_check.hpp"
#include "santa/lexicon.hpp"
#include "santa/metrics.hpp"
#include "santa/trainer.hpp"

namespace santa {

struct Arm {
  std::string name;
  LossToggles toggles;
};

// L_g only.
Arm baseline_arm();
// L_g + L_video, + L_obj, + L_act, + hallucinated negatives (SANTA-full last).
std::vector<Arm> ablation_arms();

struct ArmRun {
  std::uint64_t seed = 0;
  MetricReport pre;
  MetricReport post;
  std::vector<LossBreakdown> log;
};

struct ArmResult {
  Arm arm;
  std::vector<ArmRun> runs;

  double median_f1(Variant v, MetricCategory c) const;
  double median_gap_pre() const;
  double median_gap_post() const;
};

struct ExperimentResult {
  std::vector<ArmResult> arms;
  const ArmResult& arm(const std::string& name) const;
};

double median(std::vector<double> values);

// Every arm uses the same corpus; seed s sets model init and batch order.
ExperimentResult run_experiment(std::span<const VideoSample> corpus, const Lexicon& lexicon,
                                std::span<const Arm> arms, std::span<const std::uint64_t> seeds,
                                const TrainConfig& base, Exec exec = Exec::parallel);

// One row per arm: toggles, seed count, median F1 per variant/category, median alignment gap pre/post.
void write_ablation_csv(std::ostream& out, const ExperimentResult& result);

struct LossGradCheck {
  std::string loss;  // L_g, L_video, L_obj, L_act, L_total
  GradCheckResult result;
};

// Finite-difference checks of every loss on a random miniature world and
// batch. Hallucinated captions and squeezer query choices are fixed at the
// base point so each objective is smooth in the parameters.
std::vector<LossGradCheck> check_loss_gradients(std::uint64_t seed, double h = 1e-5);

}  // namespace santa
