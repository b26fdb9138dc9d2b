#include "santa/self_augment.hpp"

#include "santa/errors.hpp"

namespace santa {

TokenSet build_suppression_set(const VideoSample& sample, const Lexicon& lexicon) {
  TokenSet omega = expand_token_set(object_tokens(sample), lexicon);
  const TokenSet acts = expand_token_set(action_tokens(sample), lexicon);
  omega.insert(acts.begin(), acts.end());
  return omega;
}

std::vector<double> suppressed_distribution(std::span<const double> dist, const TokenSet& suppressed,
                                            std::size_t step) {
  std::vector<double> out(dist.begin(), dist.end());
  bool touched = false;
  for (auto t : suppressed)
    if (t < out.size()) touched = true;
  if (!touched) return out;

  double allowed = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (suppressed.count(static_cast<TokenId>(i)))
      out[i] = 0.0;
    else
      allowed += out[i];
  }
  if (!(allowed > 0.0)) throw DecodingError("suppression set covers the entire support", step);
  for (auto& p : out) p /= allowed;
  return out;
}

HallucinativeCaption generate_hallucinative(const BoundModel& snapshot, const VideoSample& sample,
                                            const TokenSet& suppressed, std::size_t max_length,
                                            std::uint64_t snapshot_id) {
  if (max_length < 1) throw UsageError("hallucinative decoding needs max_length >= 1");
  HallucinativeCaption out;
  out.source_id = sample.sample_id;
  out.max_length = max_length;
  out.snapshot = snapshot_id;
  const Var video = pool_video(snapshot, sample);
  const TokenId eos = snapshot.config().eos;
  while (out.tokens.size() < max_length) {
    const auto dist = suppressed_distribution(decode_distribution(snapshot, video, out.tokens), suppressed,
                                              out.tokens.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i)
      if (dist[i] > dist[best]) best = i;
    if (best == eos) break;
    out.tokens.push_back(static_cast<TokenId>(best));
  }
  return out;
}

std::vector<HallucinativeCaption> generate_negatives(const BoundModel& snapshot,
                                                     std::span<const VideoSample* const> samples,
                                                     const Lexicon& lexicon, std::uint64_t snapshot_id, Exec exec) {
  std::vector<HallucinativeCaption> out(samples.size());
  const auto limit = max_caption_length(snapshot.config());
  const auto one = [&](std::size_t i) {
    const auto& s = *samples[i];
    const auto len = std::min(std::max<std::size_t>(s.caption.size(), 1), limit);
    out[i] = generate_hallucinative(snapshot, s, build_suppression_set(s, lexicon), len, snapshot_id);
  };
  for_each_index(samples.size(), exec, one);
  return out;
}

}  // namespace santa
