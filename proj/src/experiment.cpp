#include "santa/experiment.hpp"

#include <algorithm>
#include <ostream>

#include "santa/errors.hpp"
#include "santa/self_augment.hpp"
#include "text_io.hpp"

namespace santa {

Arm baseline_arm() { return {"L_g", {false, false, false, false}}; }

std::vector<Arm> ablation_arms() {
  return {
      {"L_g+L_video", {true, false, false, false}},
      {"L_g+L_video+L_obj", {true, true, false, false}},
      {"L_g+L_video+L_obj+L_act", {true, true, true, false}},
      {"SANTA-full", {true, true, true, true}},
  };
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double ArmResult::median_f1(Variant v, MetricCategory c) const {
  std::vector<double> xs;
  for (const auto& r : runs) xs.push_back(r.post.at(v, c).f1);
  return median(xs);
}

double ArmResult::median_gap_pre() const {
  std::vector<double> xs;
  for (const auto& r : runs) xs.push_back(r.pre.alignment_gap.value_or(0.0));
  return median(xs);
}

double ArmResult::median_gap_post() const {
  std::vector<double> xs;
  for (const auto& r : runs) xs.push_back(r.post.alignment_gap.value_or(0.0));
  return median(xs);
}

const ArmResult& ExperimentResult::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.arm.name == name) return a;
  throw UsageError("no arm named " + name);
}

ExperimentResult run_experiment(std::span<const VideoSample> corpus, const Lexicon& lexicon,
                                std::span<const Arm> arms, std::span<const std::uint64_t> seeds,
                                const TrainConfig& base, Exec exec) {
  if (arms.empty() || seeds.empty()) throw UsageError("experiment needs at least one arm and one seed");
  const auto train_split = filter_split(corpus, Split::train);
  const auto eval_split = filter_split(corpus, Split::eval);
  if (train_split.empty() || eval_split.empty()) throw UsageError("corpus needs both train and eval samples");

  // Initial models and pre-training reports are shared across arms.
  std::vector<ModelState> inits;
  std::vector<MetricReport> pre(seeds.size());
  for (auto s : seeds) inits.push_back(init_model(model_config_for(lexicon, corpus, s)));
  for_each_index(seeds.size(), exec,
                 [&](std::size_t i) { pre[i] = evaluate_model(inits[i], eval_split, lexicon, Exec::serial); });

  const std::size_t jobs = arms.size() * seeds.size();
  std::vector<ArmRun> runs(jobs);
  for_each_index(jobs, exec, [&](std::size_t j) {
    const std::size_t a = j / seeds.size(), s = j % seeds.size();
    TrainConfig cfg = base;
    cfg.seed = seeds[s];
    cfg.toggles = arms[a].toggles;
    TrainResult tr = train(inits[s], train_split, lexicon, cfg);
    runs[j] = {seeds[s], pre[s], evaluate_model(tr.model, eval_split, lexicon, Exec::serial), std::move(tr.log)};
  });

  ExperimentResult out;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    ArmResult r{arms[a], {}};
    for (std::size_t s = 0; s < seeds.size(); ++s) r.runs.push_back(std::move(runs[a * seeds.size() + s]));
    out.arms.push_back(std::move(r));
  }
  return out;
}

void write_ablation_csv(std::ostream& out, const ExperimentResult& result) {
  using textio::format_double;
  out << "config,L_video,L_obj,L_act,C_h,n_seeds,F1_obj_exact,F1_act_exact,F1_obj_weighted,F1_act_weighted,"
         "alignment_gap_pre,alignment_gap_post\n";
  for (const auto& a : result.arms) {
    const auto& t = a.arm.toggles;
    out << a.arm.name << ',' << t.video << ',' << t.obj << ',' << t.act << ',' << t.hallucinated << ','
        << a.runs.size() << ',' << format_double(a.median_f1(Variant::exact, MetricCategory::object)) << ','
        << format_double(a.median_f1(Variant::exact, MetricCategory::action)) << ','
        << format_double(a.median_f1(Variant::weighted, MetricCategory::object)) << ','
        << format_double(a.median_f1(Variant::weighted, MetricCategory::action)) << ','
        << format_double(a.median_gap_pre()) << ',' << format_double(a.median_gap_post()) << '\n';
  }
}

std::vector<LossGradCheck> check_loss_gradients(std::uint64_t seed, double h) {
  WorldConfig wc;
  wc.num_objects = 4;
  wc.num_actions = 3;
  wc.vocab_other = 2;
  wc.num_train = 3;
  wc.num_eval = 1;
  wc.frames = 3;
  wc.d_vis = 4;
  wc.d_tok = 4;
  const World world = generate_world(seed, wc);
  const auto train_split = filter_split(world.corpus, Split::train);
  std::vector<const VideoSample*> batch;
  for (const auto& s : train_split) batch.push_back(&s);

  ModelConfig mc = model_config_for(world.lexicon, world.corpus, seed);
  mc.d_tok = 4;
  mc.d_model = 5;
  mc.d_ff = 6;
  mc.num_queries = 3;
  const ModelState state = init_model(mc);

  const BoundModel snapshot(state, nullptr);
  const auto negatives = generate_negatives(snapshot, batch, world.lexicon, 0, Exec::serial);
  BatchRequest req;
  std::vector<std::size_t> queries;
  for (const auto& a : build_contrastive_batch(snapshot, batch, negatives, world.lexicon, req).actions)
    queries.push_back(a.query);
  req.frozen_queries = queries;

  const double tau = mc.temperature;
  auto objective = [&](int which) -> ScalarObjective {
    return [&, which](Tape&, std::span<const Var> vars) {
      const BoundModel m(mc, vars);
      const ContrastiveBatch cb = build_contrastive_batch(m, batch, negatives, world.lexicon, req);
      switch (which) {
        case 0: return l_g(m, batch, cb.visual);
        case 1: return l_video(cb, tau);
        case 2: return l_obj(cb, tau);
        case 3: return l_act(cb, tau);
        default:
          return total_loss(l_g(m, batch, cb.visual), l_video(cb, tau), l_obj(cb, tau), l_act(cb, tau),
                            kDefaultAlpha, kDefaultBeta);
      }
    };
  };
  const char* names[] = {"L_g", "L_video", "L_obj", "L_act", "L_total"};
  std::vector<LossGradCheck> out;
  for (int i = 0; i < 5; ++i) out.push_back({names[i], grad_check(objective(i), state.params, h)});
  return out;
}

}  // namespace santa
