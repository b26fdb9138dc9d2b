#include "santa/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "santa/errors.hpp"
#include "santa/experiment.hpp"
#include "santa/self_augment.hpp"
#include "santa/trainer.hpp"
#include "text_io.hpp"

namespace fs = std::filesystem;

namespace santa {

namespace {

struct DataOptions {
  std::string dir;
  std::uint64_t corpus_seed = 0;
  WorldConfig world;
  CLI::Option* corpus_seed_opt = nullptr;
  CLI::Option* noise_opt = nullptr;
};

void add_world_options(CLI::App* cmd, WorldConfig& w, CLI::Option** noise) {
  cmd->add_option("--num-train", w.num_train, "training samples")->capture_default_str();
  cmd->add_option("--num-eval", w.num_eval, "evaluation samples")->capture_default_str();
  cmd->add_option("--num-objects", w.num_objects, "object classes")->capture_default_str();
  cmd->add_option("--num-actions", w.num_actions, "action classes")->capture_default_str();
  cmd->add_option("--frames", w.frames, "frames per tracklet")->capture_default_str();
  cmd->add_option("--d-vis", w.d_vis, "visual feature dimension")->capture_default_str();
  *noise = cmd->add_option("--noise", w.tracklet_noise, "tracklet noise sigma")->capture_default_str();
  cmd->add_option("--action-prior", w.action_prior, "probability of a subject's preferred action")
      ->capture_default_str();
  cmd->add_option("--object-prior", w.object_prior, "probability of a subject's usual partner object")
      ->capture_default_str();
  cmd->add_option("--jitter", w.appearance_jitter, "per-instance appearance deviation")->capture_default_str();
  cmd->add_option("--motion", w.motion_amplitude, "motion amplitude")->capture_default_str();
}

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.dir, "directory with lexicon.tsv and corpus.tsv (omit to generate a world)");
  d.corpus_seed_opt = cmd->add_option("--corpus-seed", d.corpus_seed, "seed of the generated world (default: --seed)");
  add_world_options(cmd, d.world, &d.noise_opt);
}

World load_data(const DataOptions& d, std::uint64_t seed) {
  if (d.dir.empty()) return generate_world(d.corpus_seed_opt->count() ? d.corpus_seed : seed, d.world);
  if (d.noise_opt->count()) throw UsageError("--noise only applies to generated worlds, not --data");
  const fs::path dir(d.dir);
  World w{load_lexicon(dir / "lexicon.tsv"), {}};
  w.corpus = load_corpus(dir / "corpus.tsv", w.lexicon);
  return w;
}

void add_train_options(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--steps", t.steps, "optimizer steps")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "samples per step")->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "learning rate")->capture_default_str();
  cmd->add_option("--optimizer", t.optimizer, "sgd or adam")
      ->transform(CLI::CheckedTransformer(std::map<std::string, Optimizer>{{"sgd", Optimizer::sgd},
                                                                           {"adam", Optimizer::adam}}))
      ->default_str("adam");
  cmd->add_option("--alpha", t.alpha, "weight of L_obj + L_act")->capture_default_str();
  cmd->add_option("--beta", t.beta, "weight of L_video")->capture_default_str();
  cmd->add_option("--tau", t.tau, "contrastive temperature")->capture_default_str();
}

void add_toggle_options(CLI::App* cmd, LossToggles& t) {
  cmd->add_flag("!--no-video", t.video, "disable L_video");
  cmd->add_flag("!--no-obj", t.obj, "disable L_obj");
  cmd->add_flag("!--no-act", t.act, "disable L_act");
  cmd->add_flag("!--no-c-h", t.hallucinated, "disable hallucinated negatives");
}

ModelState model_for(const std::string& checkpoint, const World& w, std::uint64_t seed) {
  if (!checkpoint.empty()) return load_checkpoint(checkpoint);
  return init_model(model_config_for(w.lexicon, w.corpus, seed));
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

// key=value lines become --key=value flags placed before the user's own
// flags, which therefore override them.
std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> injected;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line is not key=value: " + line, lineno);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    bool given = false;
    for (const auto& a : rest)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) given = true;
    if (!given) injected.push_back("--" + key + "=" + value);
  }
  // Insert after the subcommand name.
  std::size_t at = 1;
  while (at < rest.size() && rest[at].rfind("-", 0) == 0) ++at;
  if (at < rest.size()) ++at;
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
  return rest;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hallucination-aware video-caption alignment on a synthetic world"};
  app.set_help_all_flag("--help-all", "print help for every subcommand");
  app.require_subcommand(1);
  app.add_option("--config", "key=value file of flag defaults (command-line flags win)");

  std::uint64_t seed = 1;
  auto seeded = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "random seed")->capture_default_str(); };

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic lexicon and corpus");
  WorldConfig gen_world;
  CLI::Option* gen_noise = nullptr;
  std::string gen_out;
  seeded(gen);
  add_world_options(gen, gen_world, &gen_noise);
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* trn = app.add_subcommand("train", "train a model");
  DataOptions trn_data;
  TrainConfig trn_cfg;
  std::string trn_ckpt = "model.ckpt", trn_log, trn_init;
  seeded(trn);
  add_data_options(trn, trn_data);
  add_train_options(trn, trn_cfg);
  add_toggle_options(trn, trn_cfg.toggles);
  trn->add_option("--init", trn_init, "start from this checkpoint instead of a fresh initialization");
  trn->add_option("--checkpoint", trn_ckpt, "where to write the trained model")->capture_default_str();
  trn->add_option("--log", trn_log, "training-log CSV");

  // negatives
  auto* neg = app.add_subcommand("negatives", "dump hallucinated captions in corpus format");
  DataOptions neg_data;
  std::string neg_ckpt, neg_out;
  seeded(neg);
  add_data_options(neg, neg_data);
  neg->add_option("--checkpoint", neg_ckpt, "model to decode from (default: fresh initialization)");
  neg->add_option("--out", neg_out, "output file (default: stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "score greedy captions on the eval split");
  DataOptions ev_data;
  std::string ev_ckpt, ev_report;
  seeded(ev);
  add_data_options(ev, ev_data);
  ev->add_option("--checkpoint", ev_ckpt, "model to evaluate (default: fresh initialization)");
  ev->add_option("--report", ev_report, "write <prefix>.csv and <prefix>.json");

  // ablate
  auto* abl = app.add_subcommand("ablate", "train the ablation configurations over several seeds");
  DataOptions abl_data;
  TrainConfig abl_cfg;
  std::size_t abl_seeds = 5;
  bool abl_baseline = false;
  std::string abl_out, abl_logs;
  seeded(abl);
  add_data_options(abl, abl_data);
  add_train_options(abl, abl_cfg);
  abl->add_option("--seeds", abl_seeds, "number of seeds, starting at --seed")->capture_default_str();
  abl->add_flag("--baseline", abl_baseline, "also train the L_g-only baseline");
  abl->add_option("--out", abl_out, "ablation CSV (default: stdout)");
  abl->add_option("--log-dir", abl_logs, "directory for per-run training logs");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  double gc_h = 1e-5, gc_tol = 1e-4;
  seeded(gc);
  gc->add_option("--step", gc_h, "central-difference step h")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "maximum relative error")->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "print a saved metric report as CSV");
  std::string rep_in;
  seeded(rep);
  rep->add_option("--in", rep_in, "report .json file")->required();

  try {
    args = apply_config_file(std::move(args));
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (gen->parsed()) {
      const World w = generate_world(seed, gen_world);
      fs::create_directories(gen_out);
      save_lexicon(fs::path(gen_out) / "lexicon.tsv", w.lexicon);
      save_corpus(fs::path(gen_out) / "corpus.tsv", w.corpus);
      out << "wrote " << w.lexicon.size() << " lexicon entries and " << w.corpus.size() << " samples to "
          << gen_out << '\n';
      return kExitOk;
    }
    if (trn->parsed()) {
      const World w = load_data(trn_data, seed);
      trn_cfg.seed = seed;
      const auto train_split = filter_split(w.corpus, Split::train);
      ModelState init = model_for(trn_init, w, seed);
      const TrainResult r = train(std::move(init), train_split, w.lexicon, trn_cfg);
      save_checkpoint(trn_ckpt, r.model);
      if (!trn_log.empty()) {
        auto f = open_out(trn_log);
        write_training_log(f, r.log);
      }
      if (!r.log.empty()) {
        const auto& first = r.log.front();
        const auto& last = r.log.back();
        out << "L_total " << textio::format_double(first.l_total) << " -> " << textio::format_double(last.l_total)
            << " over " << r.log.size() << " steps\n";
      }
      out << "checkpoint " << trn_ckpt << '\n';
      return kExitOk;
    }
    if (neg->parsed()) {
      const World w = load_data(neg_data, seed);
      const ModelState model = model_for(neg_ckpt, w, seed);
      std::vector<const VideoSample*> ptrs;
      for (const auto& s : w.corpus) ptrs.push_back(&s);
      const auto caps = generate_negatives(BoundModel(model, nullptr), ptrs, w.lexicon);
      std::vector<VideoSample> dump(w.corpus.begin(), w.corpus.end());
      for (std::size_t i = 0; i < dump.size(); ++i) dump[i].caption = caps[i].tokens;
      if (neg_out.empty()) {
        write_corpus(out, dump);
      } else {
        auto f = open_out(neg_out);
        write_corpus(f, dump);
      }
      return kExitOk;
    }
    if (ev->parsed()) {
      const World w = load_data(ev_data, seed);
      const ModelState model = model_for(ev_ckpt, w, seed);
      const auto eval_split = filter_split(w.corpus, Split::eval);
      const MetricReport r = evaluate_model(model, eval_split, w.lexicon);
      write_report_csv(out, r);
      if (!ev_report.empty()) {
        auto csv = open_out(ev_report + ".csv");
        write_report_csv(csv, r);
        auto js = open_out(ev_report + ".json");
        js << report_to_json(r) << '\n';
      }
      return kExitOk;
    }
    if (abl->parsed()) {
      const World w = load_data(abl_data, seed);
      if (abl_seeds == 0) throw UsageError("--seeds must be at least 1");
      std::vector<std::uint64_t> seeds(abl_seeds);
      std::iota(seeds.begin(), seeds.end(), seed);
      std::vector<Arm> arms;
      if (abl_baseline) arms.push_back(baseline_arm());
      for (auto& a : ablation_arms()) arms.push_back(a);
      const ExperimentResult r = run_experiment(w.corpus, w.lexicon, arms, seeds, abl_cfg);
      if (abl_out.empty()) {
        write_ablation_csv(out, r);
      } else {
        auto f = open_out(abl_out);
        write_ablation_csv(f, r);
      }
      if (!abl_logs.empty())
        for (const auto& a : r.arms)
          for (const auto& run : a.runs) {
            auto f = open_out(fs::path(abl_logs) / (a.arm.name + "_seed" + std::to_string(run.seed) + ".csv"));
            write_training_log(f, run.log);
          }
      return kExitOk;
    }
    if (gc->parsed()) {
      double worst = 0.0;
      for (const auto& c : check_loss_gradients(seed, gc_h)) {
        out << c.loss << " max_rel_error " << textio::format_double(c.result.max_rel_error) << " over "
            << c.result.coordinates << " coordinates\n";
        worst = std::max(worst, c.result.max_rel_error);
      }
      out << "max relative error " << textio::format_double(worst) << '\n';
      return worst <= gc_tol ? kExitOk : kExitValidation;
    }
    if (rep->parsed()) {
      std::ifstream in(rep_in);
      if (!in) throw std::runtime_error("cannot open report " + rep_in);
      std::stringstream ss;
      ss << in.rdbuf();
      write_report_csv(out, report_from_json(ss.str()));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace santa
