#pragma once

// Training loop: each step snapshots the current parameters, decodes
// hallucinated negatives from the snapshot, evaluates the enabled losses on a
// fresh tape, backpropagates and applies one optimizer update.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "santa/corpus.hpp"
#include "santa/lexicon.hpp"
#include "santa/losses.hpp"
#include "santa/metrics.hpp"
#include "santa/model.hpp"
#include "santa/parallel.hpp"

namespace santa {

// Reference settings for the full-size model. The toy defaults below are
// scaled to the synthetic world.
inline constexpr double kReferenceLearningRate = 6e-5;
inline constexpr std::size_t kReferenceBatchSize = 64;
inline constexpr std::size_t kReferenceSteps = 2000;
inline constexpr double kDefaultAlpha = 0.25;
inline constexpr double kDefaultBeta = 0.5;

enum class Optimizer { sgd, adam };

struct LossToggles {
  bool video = true;
  bool obj = true;
  bool act = true;
  bool hallucinated = true;  // add C_h-derived negatives to the pools

  bool operator==(const LossToggles&) const = default;
};

struct TrainConfig {
  std::size_t steps = 300;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  Optimizer optimizer = Optimizer::adam;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  double tau = 0.2;
  std::uint64_t seed = 0;
  LossToggles toggles;

  void validate() const;
};

struct TrainerState {
  ModelState model;
  std::vector<Tensor> m;  // Adam moments
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

TrainerState make_trainer_state(ModelState model);

// One update on `batch`. Throws NumericError if any loss is non-finite; the
// parameters are left untouched in that case.
LossBreakdown train_step(TrainerState& state, std::span<const VideoSample* const> batch, const Lexicon& lexicon,
                         const TrainConfig& config);

using StepCallback = std::function<void(std::size_t step, const LossBreakdown&)>;

struct TrainResult {
  ModelState model;
  std::vector<LossBreakdown> log;
};

// Seeded minibatches drawn from reshuffled epochs of `train`.
TrainResult train(ModelState init, std::span<const VideoSample> train, const Lexicon& lexicon,
                  const TrainConfig& config, const StepCallback& on_step = {});

void write_training_log(std::ostream& out, std::span<const LossBreakdown> log);

// Greedy captions (no <eos>) keyed by sample id.
std::map<std::string, std::vector<TokenId>> predict_captions(const ModelState& model,
                                                             std::span<const VideoSample> samples,
                                                             Exec exec = Exec::parallel);
// Mean cos(video, caption) over the samples.
double alignment_gap(const ModelState& model, std::span<const VideoSample> samples);
// Metric report of greedy captions, with the alignment gap filled in.
MetricReport evaluate_model(const ModelState& model, std::span<const VideoSample> eval, const Lexicon& lexicon,
                            Exec exec = Exec::parallel);

}  // namespace santa
