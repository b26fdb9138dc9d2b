#include "santa/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "santa/errors.hpp"

namespace santa {

namespace {

constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "frame_w", "frame_b", "frame_pos", "video_proj", "track_proj", "tok_emb", "tok_pos", "mix_cur", "mix_ctx",
    "mix_vid", "mix_b",   "mix_w2",    "mix_b2",     "lm_w",       "lm_b",    "text_proj",     "sq_queries", "sq_wq", "sq_wk",    "sq_wv",      "sq_role",    "sq_w1",   "sq_b1",     "sq_w2",     "sq_b2"};

Shape param_shape(const ModelConfig& c, Param p) {
  const auto d = c.d_model;
  switch (p) {
    case Param::frame_w: return {d, c.d_vis};
    case Param::frame_b: return {d};
    case Param::frame_pos: return {c.max_frames, d};
    case Param::video_proj: return {d, d};
    case Param::track_proj: return {d, d};
    case Param::tok_emb: return {c.vocab, c.d_tok};
    case Param::tok_pos: return {c.context_length, c.d_tok};
    case Param::mix_cur: return {d, c.d_tok};
    case Param::mix_ctx: return {d, c.d_tok};
    case Param::mix_vid: return {d, d};
    case Param::mix_b: return {d};
    case Param::mix_w2: return {d, d};
    case Param::mix_b2: return {d};
    case Param::lm_w: return {c.vocab, d};
    case Param::lm_b: return {c.vocab};
    case Param::text_proj: return {d, d};
    case Param::sq_queries: return {c.num_queries, d};
    case Param::sq_wq: return {d, d};
    case Param::sq_wk: return {d, d};
    case Param::sq_wv: return {d, d};
    case Param::sq_role: return {2, d};
    case Param::sq_w1: return {c.d_ff, d};
    case Param::sq_b1: return {c.d_ff};
    case Param::sq_w2: return {d, c.d_ff};
    case Param::sq_b2: return {d};
    case Param::count: break;
  }
  throw UsageError("bad parameter id");
}

// Standard deviation of the initial values; zero for biases.
double init_std(const ModelConfig& c, Param p) {
  switch (p) {
    case Param::frame_b:
    case Param::mix_b:
    case Param::mix_b2:
    case Param::lm_b:
    case Param::sq_b1:
    case Param::sq_b2:
      return 0.0;
    case Param::tok_emb:
    case Param::sq_queries:
      return 1.0;
    case Param::tok_pos:
    case Param::frame_pos:
    case Param::sq_role:
      return 0.5;
    default: {
      const auto shape = param_shape(c, p);
      return 1.0 / std::sqrt(static_cast<double>(shape[1]));
    }
  }
}

const std::vector<TokenId>& with_bos(std::vector<TokenId>& buf, TokenId bos, std::span<const TokenId> tokens) {
  buf.clear();
  buf.push_back(bos);
  buf.insert(buf.end(), tokens.begin(), tokens.end());
  return buf;
}

Var linear(const Var& x, const Var& w) { return matmul(x, w, false, true); }

Var linear(const Var& x, const Var& w, const Var& b) { return add_rowwise(matmul(x, w, false, true), b); }

// Rows of `frames` stacked into one constant matrix.
Tensor stack_frames(std::span<const Tensor* const> tracklets, std::size_t d_vis) {
  std::size_t rows = 0;
  for (const auto* t : tracklets) {
    if (t->rank() != 2 || t->cols() != d_vis)
      throw DimensionError("tracklet shape " + shape_str(t->shape()) + " does not match d_vis " + std::to_string(d_vis));
    rows += t->rows();
  }
  if (rows == 0) throw UsageError("no tracklet frames to encode");
  Tensor out({rows, d_vis});
  std::size_t r = 0;
  for (const auto* t : tracklets) {
    std::copy(t->data().begin(), t->data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * d_vis));
    r += t->rows();
  }
  return out;
}

// [groups x total] averaging matrix; group g averages `lengths[g]` rows starting at offsets[g].
Tensor pooling_matrix(std::span<const std::size_t> offsets, std::span<const std::size_t> lengths, std::size_t total) {
  Tensor p({offsets.size(), total});
  for (std::size_t g = 0; g < offsets.size(); ++g)
    for (std::size_t r = 0; r < lengths[g]; ++r) p.at(g, offsets[g] + r) = 1.0 / static_cast<double>(lengths[g]);
  return p;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_vis < 2 || d_tok < 2 || d_model < 2 || d_ff < 2 || vocab < 2 || context_length < 2 || max_frames < 1)
    throw UsageError("model config: dimensions must be >= 2");
  if (num_queries < 1) throw UsageError("model config: need at least one query");
  if (!(temperature > 0.0)) throw UsageError("model config: temperature must be > 0");
  if (bos >= vocab || eos >= vocab) throw UsageError("model config: <bos>/<eos> outside vocabulary");
}

ModelConfig model_config_for(const Lexicon& lexicon, std::span<const VideoSample> corpus, std::uint64_t seed) {
  ModelConfig c;
  c.vocab = lexicon.size();
  std::size_t frames = 0, d_vis = 0, longest = 0;
  for (const auto& s : corpus) {
    longest = std::max(longest, s.caption.size());
    for (const auto& [inst, t] : s.tracklets) {
      frames = std::max(frames, t.rows());
      d_vis = t.cols();
    }
  }
  if (frames == 0) throw UsageError("model_config_for: corpus has no tracklets");
  c.d_vis = d_vis;
  c.max_frames = frames;
  c.context_length = std::max(c.context_length, longest + 2);
  c.bos = lexicon.bos();
  c.eos = lexicon.eos();
  c.seed = seed;
  return c;
}

std::string_view param_name(Param p) { return kParamNames.at(static_cast<std::size_t>(p)); }

bool is_squeezer_param(Param p) { return static_cast<std::size_t>(p) >= static_cast<std::size_t>(Param::sq_queries); }

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

bool ModelState::all_finite() const {
  for (const auto& p : params)
    if (!p.all_finite()) return false;
  return true;
}

ModelState init_model(const ModelConfig& config) {
  config.validate();
  ModelState state;
  state.config = config;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto p = static_cast<Param>(i);
    Tensor t(param_shape(config, p));
    const double sd = init_std(config, p);
    if (sd > 0.0)
      for (auto& v : t.storage()) v = sd * normal(rng);
    state.params.push_back(std::move(t));
  }
  return state;
}

BoundModel::BoundModel(const ModelState& state, Tape* tape) : config_(state.config) {
  if (state.params.size() != kNumParams) throw UsageError("model state has the wrong number of parameters");
  vars_.reserve(kNumParams);
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (state.params[i].shape() != param_shape(config_, static_cast<Param>(i)))
      throw DimensionError("parameter " + std::string(kParamNames[i]) + " has shape " +
                           shape_str(state.params[i].shape()));
    vars_.push_back(tape ? tape->leaf(state.params[i], true) : constant(state.params[i]));
  }
}

BoundModel::BoundModel(const ModelConfig& config, std::span<const Var> vars) : config_(config) {
  if (vars.size() != kNumParams) throw UsageError("bound model needs one variable per parameter");
  for (std::size_t i = 0; i < kNumParams; ++i)
    if (vars[i].shape() != param_shape(config_, static_cast<Param>(i)))
      throw DimensionError("parameter " + std::string(kParamNames[i]) + " has shape " + shape_str(vars[i].shape()));
  vars_.assign(vars.begin(), vars.end());
}

// --- video side -------------------------------------------------------------------

Var pool_videos(const BoundModel& m, std::span<const VideoSample* const> samples) {
  if (samples.empty()) throw UsageError("encode_videos: no samples");
  std::vector<const Tensor*> frames;
  std::vector<std::size_t> offsets, lengths;
  std::size_t total = 0;
  for (const auto* s : samples) {
    if (s->tracklets.empty()) throw UsageError("sample '" + s->sample_id + "' has no tracklets");
    offsets.push_back(total);
    std::size_t n = 0;
    for (const auto& [inst, t] : s->tracklets) {
      frames.push_back(&t);
      n += t.rows();
    }
    lengths.push_back(n);
    total += n;
  }
  const Var stacked = constant(stack_frames(frames, m.config().d_vis));
  const Var z = tanh(linear(stacked, m[Param::frame_w], m[Param::frame_b]));
  return matmul(constant(pooling_matrix(offsets, lengths, total)), z);
}

Var encode_videos(const BoundModel& m, std::span<const VideoSample* const> samples) {
  return l2_normalize(linear(pool_videos(m, samples), m[Param::video_proj]));
}

Var pool_video(const BoundModel& m, const VideoSample& sample) {
  const VideoSample* one[] = {&sample};
  return reshape(pool_videos(m, one), {m.config().d_model});
}

Var encode_video(const BoundModel& m, const VideoSample& sample) {
  const VideoSample* one[] = {&sample};
  return reshape(encode_videos(m, one), {m.config().d_model});
}

InstanceFeatures encode_instances(const BoundModel& m, std::span<const Tensor* const> tracklets) {
  if (tracklets.empty()) throw UsageError("encode_instances: no tracklets");
  InstanceFeatures out;
  std::vector<std::size_t> positions;
  std::size_t total = 0;
  for (const auto* t : tracklets) {
    if (t->rows() > m.config().max_frames)
      throw DimensionError("tracklet has " + std::to_string(t->rows()) + " frames, model supports " +
                           std::to_string(m.config().max_frames));
    out.offsets.push_back(total);
    out.lengths.push_back(t->rows());
    for (std::size_t f = 0; f < t->rows(); ++f) positions.push_back(f);
    total += t->rows();
  }
  const Var stacked = constant(stack_frames(tracklets, m.config().d_vis));
  const Var pre = add(linear(stacked, m[Param::frame_w], m[Param::frame_b]), gather_rows(m[Param::frame_pos], positions));
  out.frame_tokens = tanh(pre);
  const Var pooled = matmul(constant(pooling_matrix(out.offsets, out.lengths, total)), out.frame_tokens);
  out.pooled = l2_normalize(linear(pooled, m[Param::track_proj]));
  return out;
}

VisualContext encode_visual(const BoundModel& m, std::span<const VideoSample* const> samples) {
  VisualContext out;
  out.pooled = pool_videos(m, samples);
  out.videos = l2_normalize(linear(out.pooled, m[Param::video_proj]));
  std::vector<const Tensor*> tracklets;
  for (const auto* s : samples) {
    out.first_instance.push_back(tracklets.size());
    out.instance_count.push_back(s->tracklets.size());
    for (const auto& [inst, t] : s->tracklets) tracklets.push_back(&t);
  }
  out.instances = encode_instances(m, tracklets);
  return out;
}

Var encode_tracklet(const BoundModel& m, const Tensor& frames) {
  const Tensor* one[] = {&frames};
  return reshape(encode_instances(m, one).pooled, {m.config().d_model});
}

// --- text side --------------------------------------------------------------------

Var text_hidden(const BoundModel& m, std::span<const std::vector<TokenId>> inputs, const Var* videos) {
  const auto& c = m.config();
  if (inputs.empty()) throw UsageError("text_hidden: no sequences");
  std::vector<std::size_t> tokens, positions, owner;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const auto& seq = inputs[s];
    if (seq.empty()) throw UsageError("text_hidden: empty sequence");
    if (seq.size() > c.context_length)
      throw UsageError("context overflow: sequence of " + std::to_string(seq.size()) + " inputs exceeds context length " +
                       std::to_string(c.context_length));
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] >= c.vocab) throw UsageError("token id " + std::to_string(seq[i]) + " outside vocabulary");
      tokens.push_back(seq[i]);
      positions.push_back(i);
      owner.push_back(s);
    }
  }
  const std::size_t n = tokens.size();
  // Block-diagonal causal mean over each sequence's prefix.
  Tensor causal({n, n});
  std::size_t start = 0;
  for (const auto& seq : inputs) {
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (std::size_t j = 0; j <= i; ++j) causal.at(start + i, start + j) = 1.0 / static_cast<double>(i + 1);
    start += seq.size();
  }
  const Var emb = gather_rows(m[Param::tok_emb], tokens);
  const Var x = add(emb, gather_rows(m[Param::tok_pos], positions));
  const Var ctx = matmul(constant(std::move(causal)), emb);
  Var pre = add_rowwise(add(linear(x, m[Param::mix_cur]), linear(ctx, m[Param::mix_ctx])), m[Param::mix_b]);
  if (videos) {
    if (videos->value().rows() != inputs.size())
      throw DimensionError("text_hidden: " + std::to_string(inputs.size()) + " sequences but video features " +
                           shape_str(videos->shape()));
    pre = add(pre, gather_rows(linear(*videos, m[Param::mix_vid]), owner));
  }
  const Var h1 = tanh(pre);
  return add(h1, tanh(linear(h1, m[Param::mix_w2], m[Param::mix_b2])));
}

Var encode_texts(const BoundModel& m, std::span<const std::vector<TokenId>> texts) {
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::size_t> offsets, lengths;
  std::size_t total = 0;
  for (const auto& t : texts) {
    if (t.empty()) throw UsageError("cannot encode an empty phrase");
    std::vector<TokenId> seq;
    with_bos(seq, m.config().bos, t);
    offsets.push_back(total + 1);
    lengths.push_back(t.size());
    total += seq.size();
    inputs.push_back(std::move(seq));
  }
  if (inputs.empty()) throw UsageError("encode_texts: no texts");
  const Var h = text_hidden(m, inputs, nullptr);
  const Var pooled = matmul(constant(pooling_matrix(offsets, lengths, total)), h);
  return l2_normalize(linear(pooled, m[Param::text_proj]));
}

Var encode_phrase(const BoundModel& m, std::span<const TokenId> phrase) {
  const std::vector<std::vector<TokenId>> one = {std::vector<TokenId>(phrase.begin(), phrase.end())};
  return reshape(encode_texts(m, one), {m.config().d_model});
}

Var encode_tokens(const BoundModel& m, std::span<const TokenId> tokens) {
  std::vector<std::vector<TokenId>> texts;
  texts.reserve(tokens.size());
  for (auto t : tokens) texts.push_back({t});
  return encode_texts(m, texts);
}

// --- decoding -----------------------------------------------------------------------

Var decoder_logits(const BoundModel& m, std::span<const std::vector<TokenId>> inputs, const Var& videos) {
  const Var h = text_hidden(m, inputs, &videos);
  return linear(h, m[Param::lm_w], m[Param::lm_b]);
}

std::vector<double> decode_distribution(const BoundModel& m, const Var& video, std::span<const TokenId> prefix) {
  const auto& c = m.config();
  if (prefix.size() >= c.context_length)
    throw UsageError("context overflow: prefix of " + std::to_string(prefix.size()) + " tokens, context length " +
                     std::to_string(c.context_length));
  std::vector<std::vector<TokenId>> inputs(1);
  with_bos(inputs[0], c.bos, prefix);
  const Var v = reshape(video, {1, c.d_model});
  const Var h = text_hidden(m, inputs, &v);
  const Var last = select_row(h, inputs[0].size() - 1);
  const Var probs = softmax(reshape(linear(last, m[Param::lm_w], m[Param::lm_b]), {c.vocab}));
  return probs.value().storage();
}

std::vector<double> decode_distribution(const ModelState& state, const Tensor& video, std::span<const TokenId> prefix) {
  const BoundModel m(state, nullptr);
  return decode_distribution(m, constant(video), prefix);
}

std::size_t max_caption_length(const ModelConfig& config) { return config.context_length - 1; }

std::vector<TokenId> greedy_decode(const BoundModel& m, const VideoSample& sample, std::size_t max_len) {
  const Var video = pool_video(m, sample);
  std::vector<TokenId> out;
  while (out.size() < max_len) {
    const auto dist = decode_distribution(m, video, out);
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i)
      if (dist[i] > dist[best]) best = i;
    if (best == m.config().eos) break;
    out.push_back(static_cast<TokenId>(best));
  }
  return out;
}

// --- action squeezer ------------------------------------------------------------------

Var squeeze_outputs(const BoundModel& m, std::span<const Var> instance_tokens) {
  if (instance_tokens.size() != 2)
    throw UsageError("action squeezer expects exactly 2 participating instances, got " +
                     std::to_string(instance_tokens.size()));
  const auto d = m.config().d_model;
  std::vector<Var> parts;
  for (std::size_t i = 0; i < instance_tokens.size(); ++i)
    parts.push_back(add_rowwise(instance_tokens[i], select_row(m[Param::sq_role], i)));
  const Var x = concat(parts, 0);
  const Var& queries = m[Param::sq_queries];
  const Var q = linear(queries, m[Param::sq_wq]);
  const Var k = linear(x, m[Param::sq_wk]);
  const Var v = linear(x, m[Param::sq_wv]);
  const Var attn = softmax(scale(matmul(q, k, false, true), 1.0 / std::sqrt(static_cast<double>(d))));
  const Var o = add(queries, matmul(attn, v));
  const Var ff = linear(tanh(linear(o, m[Param::sq_w1], m[Param::sq_b1])), m[Param::sq_w2], m[Param::sq_b2]);
  return add(o, ff);
}

std::size_t select_query(const Tensor& outputs, std::span<const double> phrase) {
  if (outputs.cols() != phrase.size())
    throw DimensionError("select_query: outputs " + shape_str(outputs.shape()) + " vs phrase of length " +
                         std::to_string(phrase.size()));
  double pn = 0.0;
  for (double v : phrase) pn += v * v;
  pn = std::sqrt(pn);
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t k = 0; k < outputs.rows(); ++k) {
    const auto row = outputs.row(k);
    double dotp = 0.0, rn = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      dotp += row[i] * phrase[i];
      rn += row[i] * row[i];
    }
    const double sim = dotp / (std::sqrt(rn) * pn);
    if (sim > best_sim) {
      best_sim = sim;
      best = k;
    }
  }
  return best;
}

Squeezed action_squeeze(const BoundModel& m, std::span<const Var> instance_tokens, const Var& phrase,
                        std::optional<std::size_t> frozen_query) {
  const Var outputs = squeeze_outputs(m, instance_tokens);
  Squeezed out;
  out.query = frozen_query ? *frozen_query : select_query(outputs.value(), phrase.value().data());
  if (out.query >= m.config().num_queries) throw UsageError("frozen query index out of range");
  out.feature = l2_normalize(select_row(outputs, out.query));
  return out;
}

}  // namespace santa
