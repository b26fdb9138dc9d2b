#pragma once

// Toy multimodal captioner and the action squeezer.
//
// Video side: a shared per-frame encoder tanh(W x + b). Pooling every frame
// of every instance gives the video feature; pooling one instance's frames
// (with a temporal embedding added, so frame order matters) gives its
// tracklet feature.
//
// Text side: token + position embeddings, a causal mean over the prefix, and
// a two-layer residual MLP produce one hidden state per position; decoding
// adds the pooled video feature to every position. Contrastive text features
// are the hidden states computed without the video term, mean-pooled and
// projected.
//
// Action squeezer: learnable queries cross-attend over the per-frame tokens of
// the two participating instances, followed by a two-layer feedforward block.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "santa/autodiff.hpp"
#include "santa/corpus.hpp"
#include "santa/lexicon.hpp"

namespace santa {

struct ModelConfig {
  std::size_t d_vis = 32;
  std::size_t d_tok = 16;
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  std::size_t vocab = 0;
  std::size_t context_length = 12;
  std::size_t max_frames = 8;
  std::size_t num_queries = 16;
  double temperature = 0.2;
  std::uint64_t seed = 0;
  TokenId bos = 0;
  TokenId eos = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Default model config sized for a lexicon and corpus (vocabulary, d_vis, frame count).
ModelConfig model_config_for(const Lexicon& lexicon, std::span<const VideoSample> corpus, std::uint64_t seed);

enum class Param : std::size_t {
  frame_w,
  frame_b,
  frame_pos,
  video_proj,
  track_proj,
  tok_emb,
  tok_pos,
  mix_cur,
  mix_ctx,
  mix_vid,
  mix_b,
  mix_w2,
  mix_b2,
  lm_w,
  lm_b,
  text_proj,
  // action squeezer
  sq_queries,
  sq_wq,
  sq_wk,
  sq_wv,
  sq_role,
  sq_w1,
  sq_b1,
  sq_w2,
  sq_b2,
  count
};

inline constexpr std::size_t kNumParams = static_cast<std::size_t>(Param::count);
std::string_view param_name(Param p);
bool is_squeezer_param(Param p);

struct ModelState {
  ModelConfig config;
  std::vector<Tensor> params;  // indexed by Param

  const Tensor& operator[](Param p) const { return params[static_cast<std::size_t>(p)]; }
  Tensor& operator[](Param p) { return params[static_cast<std::size_t>(p)]; }
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool operator==(const ModelState&) const = default;
};

// Random initialization from config.seed.
ModelState init_model(const ModelConfig& config);

/// Parameters bound as graph variables: tape leaves for training, or
/// constants for inference when no tape is given.
class BoundModel {
 public:
  BoundModel(const ModelState& state, Tape* tape);
  // Wraps existing variables (one per Param, in order).
  BoundModel(const ModelConfig& config, std::span<const Var> vars);

  const Var& operator[](Param p) const { return vars_[static_cast<std::size_t>(p)]; }
  const ModelConfig& config() const noexcept { return config_; }
  std::span<const Var> vars() const noexcept { return vars_; }

 private:
  ModelConfig config_;
  std::vector<Var> vars_;
};

// --- encoders ------------------------------------------------------------------

// Mean of the per-frame features over every frame of every instance, one row
// per sample. This is what the decoder is conditioned on.
Var pool_videos(const BoundModel& m, std::span<const VideoSample* const> samples);
Var pool_video(const BoundModel& m, const VideoSample& sample);
// Unit-norm projection of the pooled features into the contrastive space.
Var encode_videos(const BoundModel& m, std::span<const VideoSample* const> samples);
Var encode_video(const BoundModel& m, const VideoSample& sample);

struct InstanceFeatures {
  Var frame_tokens;  // [total frames x d_model], per-frame features with temporal embedding
  Var pooled;        // [instances x d_model], unit rows
  std::vector<std::size_t> offsets;  // first frame row of each instance
  std::vector<std::size_t> lengths;
};
InstanceFeatures encode_instances(const BoundModel& m, std::span<const Tensor* const> tracklets);
Var encode_tracklet(const BoundModel& m, const Tensor& frames);

// Video and tracklet features of a batch, computed in one pass.
struct VisualContext {
  Var pooled;  // [n x d_model], decoder input
  Var videos;  // [n x d_model], contrastive features
  InstanceFeatures instances;
  std::vector<std::size_t> first_instance;  // per sample, row into instances.pooled
  std::vector<std::size_t> instance_count;
};
VisualContext encode_visual(const BoundModel& m, std::span<const VideoSample* const> samples);

// Hidden states for sequences that already start with <bos>; rows are
// concatenated in sequence order. `videos` ([n x d_model]) adds the visual
// conditioning term, one row per sequence.
Var text_hidden(const BoundModel& m, std::span<const std::vector<TokenId>> inputs, const Var* videos);
// Unit-norm text features of token sequences (no <bos>), one row each.
Var encode_texts(const BoundModel& m, std::span<const std::vector<TokenId>> texts);
Var encode_phrase(const BoundModel& m, std::span<const TokenId> phrase);
// Single-token phrase features, one row per token.
Var encode_tokens(const BoundModel& m, std::span<const TokenId> tokens);

// --- decoding --------------------------------------------------------------------

// Next-token logits at every input position, rows concatenated; sequence i
// is conditioned on row i of `videos` (pooled features).
Var decoder_logits(const BoundModel& m, std::span<const std::vector<TokenId>> inputs, const Var& videos);
// P(. | video, prefix) over the vocabulary, given the pooled video feature.
std::vector<double> decode_distribution(const BoundModel& m, const Var& video, std::span<const TokenId> prefix);
std::vector<double> decode_distribution(const ModelState& state, const Tensor& video, std::span<const TokenId> prefix);
// Unconstrained greedy decoding; stops at <eos> or after max_len tokens.
std::vector<TokenId> greedy_decode(const BoundModel& m, const VideoSample& sample, std::size_t max_len);
std::size_t max_caption_length(const ModelConfig& config);

// --- action squeezer -----------------------------------------------------------

// Raw squeezer outputs [num_queries x d_model] for the given instances' frame tokens.
Var squeeze_outputs(const BoundModel& m, std::span<const Var> instance_tokens);
// argmax_k cos(outputs_k, phrase); ties go to the lowest k.
std::size_t select_query(const Tensor& outputs, std::span<const double> phrase);

struct Squeezed {
  Var feature;  // unit-norm output of the selected query
  std::size_t query = 0;
};
// Requires exactly two instances. A frozen query index bypasses the argmax.
Squeezed action_squeeze(const BoundModel& m, std::span<const Var> instance_tokens, const Var& phrase,
                        std::optional<std::size_t> frozen_query = std::nullopt);

// --- checkpoints -----------------------------------------------------------------

void write_checkpoint(std::ostream& out, const ModelState& state);
ModelState read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace santa
