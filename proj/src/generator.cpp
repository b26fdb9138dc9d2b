#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "santa/corpus.hpp"
#include "santa/errors.hpp"

namespace santa {
namespace {

using Rng = std::mt19937_64;

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0.0;
  do {
    s = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      s += x * x;
    }
  } while (s < 1e-12);
  const double inv = 1.0 / std::sqrt(s);
  for (auto& x : v) x *= inv;
  return v;
}

std::vector<double> normalized(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double inv = 1.0 / std::sqrt(s);
  for (auto& x : v) x *= inv;
  return v;
}

// Mixes a base direction with fresh noise; used for synonym/hypernym embeddings.
std::vector<double> perturbed(const std::vector<double>& base, double weight, Rng& rng) {
  auto noise = random_unit(rng, base.size());
  std::vector<double> v(base.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + weight * noise[i];
  return normalized(std::move(v));
}

struct ConceptBlock {
  std::vector<TokenId> base, synonym, hypernym;
};

// Appends `count` concepts of `cat` with one synonym each and one shared
// hypernym per group of `group` concepts.
ConceptBlock add_concepts(std::vector<LexiconEntry>& entries, Category cat, const std::string& prefix,
                          std::size_t count, std::size_t group, std::size_t dim, Rng& rng) {
  ConceptBlock block;
  const std::size_t n_groups = (count + group - 1) / group;
  const auto next_id = [&] { return static_cast<TokenId>(entries.size()); };
  for (std::size_t i = 0; i < count; ++i) {
    block.base.push_back(next_id());
    entries.push_back({next_id(), prefix + "_" + std::to_string(i), cat, {}, {}, random_unit(rng, dim)});
  }
  for (std::size_t i = 0; i < count; ++i) {
    block.synonym.push_back(next_id());
    const auto& base_emb = entries[block.base[i]].embedding;
    entries.push_back({next_id(), prefix + "_" + std::to_string(i) + "_syn", cat, {}, {}, perturbed(base_emb, 0.3, rng)});
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = g * group; i < std::min(count, (g + 1) * group); ++i)
      for (std::size_t d = 0; d < dim; ++d) mean[d] += entries[block.base[i]].embedding[d];
    block.hypernym.push_back(next_id());
    entries.push_back({next_id(), prefix + "_group_" + std::to_string(g), cat, {}, {}, perturbed(normalized(mean), 0.3, rng)});
  }
  for (std::size_t i = 0; i < count; ++i) {
    auto& e = entries[block.base[i]];
    e.synonyms = {block.synonym[i]};
    e.hypernyms = {block.hypernym[i / group]};
  }
  return block;
}

void validate(const WorldConfig& c) {
  if (c.num_objects < 1 || c.num_actions < 1 || c.vocab_other < 1 || c.frames < 1 || c.d_vis < 1 || c.d_tok < 2)
    throw UsageError("world config: sizes must be >= 1");
  if (c.num_train < 1 || c.num_eval < 1) throw UsageError("world config: both train and eval splits need >= 1 sample");
  if (!(c.tracklet_noise >= 0.0)) throw UsageError("world config: tracklet noise must be >= 0");
  if (!(c.action_prior >= 0.0 && c.action_prior <= 1.0)) throw UsageError("world config: action prior must lie in [0, 1]");
  if (!(c.object_prior >= 0.0 && c.object_prior <= 1.0)) throw UsageError("world config: object prior must lie in [0, 1]");
  if (!(c.appearance_jitter >= 0.0)) throw UsageError("world config: appearance jitter must be >= 0");
}

}  // namespace

World generate_world(std::uint64_t seed, const WorldConfig& config) {
  validate(config);
  Rng rng(seed);

  std::vector<LexiconEntry> entries;
  entries.push_back({0, std::string(kBosSurface), Category::other, {}, {}, random_unit(rng, config.d_tok)});
  entries.push_back({1, std::string(kEosSurface), Category::other, {}, {}, random_unit(rng, config.d_tok)});
  const auto objects = add_concepts(entries, Category::object, "obj", config.num_objects, 3, config.d_tok, rng);
  const auto actions = add_concepts(entries, Category::action, "act", config.num_actions, 2, config.d_tok, rng);
  std::vector<TokenId> others;
  for (std::size_t i = 0; i < config.vocab_other; ++i) {
    others.push_back(static_cast<TokenId>(entries.size()));
    entries.push_back({others.back(), "other_" + std::to_string(i), Category::other, {}, {}, random_unit(rng, config.d_tok)});
  }

  // Visual side: an appearance prototype per object and a sinusoidal motion
  // signature per (action, role).
  std::vector<std::vector<double>> appearance;
  for (std::size_t o = 0; o < config.num_objects; ++o) appearance.push_back(random_unit(rng, config.d_vis));
  struct Motion {
    std::vector<double> direction;
    double frequency;
    double phase;
  };
  std::uniform_real_distribution<double> unit01(0.0, 1.0);
  std::vector<std::array<Motion, 2>> motion(config.num_actions);
  for (std::size_t a = 0; a < config.num_actions; ++a)
    for (std::size_t role = 0; role < 2; ++role)
      motion[a][role] = {random_unit(rng, config.d_vis), 1.0 + static_cast<double>(a % 3),
                         2.0 * std::numbers::pi * unit01(rng)};

  // Object popularity follows a Zipf-like law; each object has a preferred action.
  std::vector<double> object_weights;
  for (std::size_t o = 0; o < config.num_objects; ++o) object_weights.push_back(1.0 / std::pow(1.0 + static_cast<double>(o), 0.7));
  std::discrete_distribution<std::size_t> pick_object(object_weights.begin(), object_weights.end());
  std::uniform_int_distribution<std::size_t> pick_action(0, config.num_actions - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, config.vocab_other - 1);
  std::uniform_int_distribution<int> pick_instances(2, 4);
  std::uniform_int_distribution<int> pick_fillers(0, 3);
  std::normal_distribution<double> noise(0.0, 1.0);

  World world;
  const std::size_t total = config.num_train + config.num_eval;
  for (std::size_t n = 0; n < total; ++n) {
    VideoSample s;
    const bool is_train = n < config.num_train;
    s.split = is_train ? Split::train : Split::eval;
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%06zu", is_train ? "train" : "eval", is_train ? n : n - config.num_train);
    s.sample_id = id;

    const auto k = static_cast<std::size_t>(pick_instances(rng));
    std::vector<std::size_t> inst_object(k);
    for (auto& o : inst_object) o = pick_object(rng);

    // Instance pairs so that every instance takes part in at least one relation.
    std::vector<std::pair<InstanceId, InstanceId>> pairs;
    if (k == 2) {
      pairs.push_back({0, 1});
      if (unit01(rng) < 0.5) pairs.push_back(unit01(rng) < 0.5 ? std::pair<InstanceId, InstanceId>{1, 0} : std::pair<InstanceId, InstanceId>{0, 1});
    } else if (k == 3) {
      pairs.push_back({0, 1});
      pairs.push_back({2, static_cast<InstanceId>(unit01(rng) < 0.5 ? 0 : 1)});
    } else {
      pairs.push_back({0, 1});
      pairs.push_back({2, 3});
    }

    // Usual partner of object o is o + 1 (mod num_objects).
    for (const auto& [subj, obj] : pairs)
      if (obj > subj && unit01(rng) < config.object_prior) inst_object[obj] = (inst_object[subj] + 1) % config.num_objects;

    for (const auto& [subj, obj] : pairs) {
      std::size_t a = pick_action(rng);
      if (unit01(rng) < config.action_prior) a = inst_object[subj] % config.num_actions;
      s.gt_actions.push_back({actions.base[a], subj, obj});
      s.caption.push_back(objects.base[inst_object[subj]]);
      s.caption.push_back(actions.base[a]);
      s.caption.push_back(objects.base[inst_object[obj]]);
    }
    const int fillers = pick_fillers(rng);
    for (int f = 0; f < fillers; ++f) s.caption.push_back(others[pick_other(rng)]);

    for (std::size_t i = 0; i < k; ++i) {
      s.gt_objects.push_back({objects.base[inst_object[i]], static_cast<InstanceId>(i)});
      Tensor frames({config.frames, config.d_vis});
      std::vector<double> look = appearance[inst_object[i]];
      for (auto& x : look) x += config.appearance_jitter * noise(rng);
      for (std::size_t t = 0; t < config.frames; ++t) {
        for (std::size_t d = 0; d < config.d_vis; ++d) frames.at(t, d) = look[d];
        for (std::size_t r = 0; r < s.gt_actions.size(); ++r) {
          const auto& rel = s.gt_actions[r];
          for (std::size_t role = 0; role < 2; ++role) {
            const InstanceId who = role == 0 ? rel.subject : rel.object;
            if (who != i) continue;
            const auto a = static_cast<std::size_t>(rel.action - actions.base[0]);
            const auto& m = motion[a][role];
            const double phase = 2.0 * std::numbers::pi * m.frequency * static_cast<double>(t) /
                                     static_cast<double>(config.frames) + m.phase;
            const double amp = config.motion_amplitude * std::sin(phase);
            for (std::size_t d = 0; d < config.d_vis; ++d) frames.at(t, d) += amp * m.direction[d];
          }
        }
        for (std::size_t d = 0; d < config.d_vis; ++d) frames.at(t, d) += config.tracklet_noise * noise(rng);
      }
      s.tracklets.emplace(static_cast<InstanceId>(i), std::move(frames));
    }
    world.corpus.push_back(std::move(s));
  }
  world.lexicon = Lexicon(std::move(entries));
  return world;
}

}  // namespace santa
