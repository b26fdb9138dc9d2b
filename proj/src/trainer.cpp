#include "santa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "santa/errors.hpp"
#include "santa/self_augment.hpp"
#include "text_io.hpp"

namespace santa {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::string breakdown_str(const LossBreakdown& l) {
  using textio::format_double;
  return "L_g=" + format_double(l.l_g) + " L_video=" + format_double(l.l_video) + " L_obj=" +
         format_double(l.l_obj) + " L_act=" + format_double(l.l_act) + " L_total=" + format_double(l.l_total);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw UsageError("batch size must be at least 2 (in-batch negatives)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw UsageError("temperature must be positive");
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0)
    throw UsageError("loss weights must be finite and non-negative");
}

TrainerState make_trainer_state(ModelState model) {
  TrainerState s;
  for (const auto& p : model.params) {
    s.m.push_back(Tensor::zeros_like(p));
    s.v.push_back(Tensor::zeros_like(p));
  }
  s.model = std::move(model);
  return s;
}

LossBreakdown train_step(TrainerState& state, std::span<const VideoSample* const> batch, const Lexicon& lexicon,
                         const TrainConfig& config) {
  config.validate();
  const auto& t = config.toggles;
  const bool contrastive = t.video || t.obj || t.act;

  std::vector<HallucinativeCaption> negatives;
  if (contrastive && t.hallucinated) {
    const BoundModel snapshot(state.model, nullptr);
    negatives = generate_negatives(snapshot, batch, lexicon, state.step);
  }

  Tape tape;
  const BoundModel m(state.model, &tape);
  BatchRequest req;
  req.captions = t.video;
  req.objects = t.obj;
  req.actions = t.act;
  const ContrastiveBatch cb = build_contrastive_batch(m, batch, negatives, lexicon, req);
  const Var zero = constant(Tensor::scalar(0.0));
  const Var lg = l_g(m, batch, cb.visual);
  const Var lv = t.video ? l_video(cb, config.tau) : zero;
  const Var lo = t.obj ? l_obj(cb, config.tau) : zero;
  const Var la = t.act ? l_act(cb, config.tau) : zero;
  const Var total = total_loss(lg, lv, lo, la, config.alpha, config.beta);
  const LossBreakdown out =
      l_total(lg.item(), lv.item(), lo.item(), la.item(), config.alpha, config.beta, config.tau);
  if (!std::isfinite(out.l_total))
    throw NumericError("non-finite loss at step " + std::to_string(state.step) + ": " + breakdown_str(out));

  tape.backward(total);
  const auto vars = m.vars();
  const double lr = config.learning_rate;
  const double step = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(kAdamBeta1, step);
  const double c2 = 1.0 - std::pow(kAdamBeta2, step);
  for (std::size_t p = 0; p < vars.size(); ++p) {
    if (!vars[p].has_grad()) continue;
    const Tensor g = vars[p].grad();
    auto& w = state.model.params[p];
    if (config.optimizer == Optimizer::sgd) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
      continue;
    }
    auto& mo = state.m[p];
    auto& ve = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      mo[i] = kAdamBeta1 * mo[i] + (1.0 - kAdamBeta1) * g[i];
      ve[i] = kAdamBeta2 * ve[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      w[i] -= lr * (mo[i] / c1) / (std::sqrt(ve[i] / c2) + kAdamEps);
    }
  }
  if (!state.model.all_finite())
    throw NumericError("non-finite parameters after step " + std::to_string(state.step) + ": " + breakdown_str(out));
  ++state.step;
  return out;
}

TrainResult train(ModelState init, std::span<const VideoSample> samples, const Lexicon& lexicon,
                  const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  if (samples.size() < 2) throw UsageError("training needs at least 2 samples");
  TrainerState state = make_trainer_state(std::move(init));
  std::mt19937_64 rng(config.seed ^ 0x5eed0fba7c4e5ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t bs = std::min(config.batch_size, samples.size());

  TrainResult result;
  std::vector<const VideoSample*> batch;
  for (std::size_t s = 0; s < config.steps; ++s) {
    batch.clear();
    while (batch.size() < bs) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&samples[order[cursor++]]);
    }
    const LossBreakdown l = train_step(state, batch, lexicon, config);
    result.log.push_back(l);
    if (on_step) on_step(s + 1, l);
  }
  result.model = std::move(state.model);
  return result;
}

void write_training_log(std::ostream& out, std::span<const LossBreakdown> log) {
  write_loss_header(out);
  for (std::size_t i = 0; i < log.size(); ++i) write_loss_row(out, i + 1, log[i]);
}

std::map<std::string, std::vector<TokenId>> predict_captions(const ModelState& model,
                                                             std::span<const VideoSample> samples, Exec exec) {
  const BoundModel m(model, nullptr);
  const std::size_t max_len = max_caption_length(model.config);
  std::vector<std::vector<TokenId>> caps(samples.size());
  for_each_index(samples.size(), exec, [&](std::size_t i) { caps[i] = greedy_decode(m, samples[i], max_len); });
  std::map<std::string, std::vector<TokenId>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].sample_id] = std::move(caps[i]);
  return out;
}

double alignment_gap(const ModelState& model, std::span<const VideoSample> samples) {
  if (samples.empty()) throw UsageError("alignment_gap: no samples");
  const BoundModel m(model, nullptr);
  std::vector<const VideoSample*> ptrs;
  std::vector<std::vector<TokenId>> captions;
  for (const auto& s : samples) {
    ptrs.push_back(&s);
    captions.push_back(s.caption);
  }
  const Tensor v = encode_videos(m, ptrs).value();
  const Tensor c = encode_texts(m, captions).value();
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < v.cols(); ++j) d += v.at(i, j) * c.at(i, j);
    total += d;
  }
  return total / static_cast<double>(samples.size());
}

MetricReport evaluate_model(const ModelState& model, std::span<const VideoSample> eval, const Lexicon& lexicon,
                            Exec exec) {
  MetricReport r = evaluate_corpus(predict_captions(model, eval, exec), eval, lexicon, exec);
  r.alignment_gap = alignment_gap(model, eval);
  return r;
}

}  // namespace santa
