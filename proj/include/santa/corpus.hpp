#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "santa/lexicon.hpp"
#include "santa/tensor.hpp"

namespace santa {

using InstanceId = std::uint32_t;

enum class Split { train, eval };

struct ObjectAnnotation {
  TokenId token = 0;
  InstanceId instance = 0;
  auto operator<=>(const ObjectAnnotation&) const = default;
};

// An action verb relating exactly two object instances.
struct RelationTriple {
  TokenId action = 0;
  InstanceId subject = 0;
  InstanceId object = 0;
  auto operator<=>(const RelationTriple&) const = default;
};

/// One toy video: per-instance tracklets ([frames x d_vis] each), a caption,
/// and the gold object/action annotations.
struct VideoSample {
  std::string sample_id;
  Split split = Split::train;
  std::map<InstanceId, Tensor> tracklets;
  std::vector<TokenId> caption;
  std::vector<ObjectAnnotation> gt_objects;
  std::vector<RelationTriple> gt_actions;

  bool operator==(const VideoSample&) const = default;
};

TokenSet object_tokens(const VideoSample& sample);
TokenSet action_tokens(const VideoSample& sample);
std::vector<VideoSample> filter_split(std::span<const VideoSample> corpus, Split split);
// Document statistics over the captions of `samples`.
CorpusStats caption_stats(std::span<const VideoSample> samples);

// Throws UsageError describing the first violated sample invariant.
void validate_sample(const VideoSample& sample, const Lexicon& lexicon);

std::vector<VideoSample> read_corpus(std::istream& in, const Lexicon& lexicon);
void write_corpus(std::ostream& out, std::span<const VideoSample> corpus);
std::vector<VideoSample> load_corpus(const std::filesystem::path& path, const Lexicon& lexicon);
void save_corpus(const std::filesystem::path& path, std::span<const VideoSample> corpus);

// --- synthetic world -----------------------------------------------------------

struct WorldConfig {
  std::size_t num_objects = 12;
  std::size_t num_actions = 6;
  std::size_t vocab_other = 6;
  std::size_t num_train = 500;
  std::size_t num_eval = 100;
  std::size_t frames = 8;
  double tracklet_noise = 0.05;
  std::size_t d_vis = 32;
  std::size_t d_tok = 16;
  double motion_amplitude = 0.6;
  // Probability that a triple uses its subject's preferred action (language prior).
  double action_prior = 0.5;
  // Probability that a triple's object is its subject's usual partner (language prior).
  double object_prior = 0.0;
  // Per-instance deviation from the class appearance prototype.
  double appearance_jitter = 0.0;
};

struct World {
  Lexicon lexicon;
  std::vector<VideoSample> corpus;
};

World generate_world(std::uint64_t seed, const WorldConfig& config);

}  // namespace santa
