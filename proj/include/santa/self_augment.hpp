#pragma once

// Hallucinative self-augmentation: greedy decoding from a frozen model with
// every ground-truth object/action token (and its synonyms and hypernyms)
// masked out, yielding the most plausible caption that describes nothing
// actually in the video. These captions are the hard negatives.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "santa/corpus.hpp"
#include "santa/lexicon.hpp"
#include "santa/model.hpp"
#include "santa/parallel.hpp"

namespace santa {

struct HallucinativeCaption {
  std::string source_id;
  std::vector<TokenId> tokens;
  std::size_t max_length = 0;
  std::uint64_t snapshot = 0;  // training step whose parameters produced it

  bool operator==(const HallucinativeCaption&) const = default;
};

// expand(gt objects) U expand(gt actions).
TokenSet build_suppression_set(const VideoSample& sample, const Lexicon& lexicon);

// Zeroes entries in `suppressed` and renormalizes over the rest. An empty
// intersection returns `dist` unchanged. Throws DecodingError when nothing
// with positive probability remains.
std::vector<double> suppressed_distribution(std::span<const double> dist, const TokenSet& suppressed,
                                            std::size_t step = 0);

// Greedy decoding under the suppressed distribution for at most max_length
// tokens (stops early at <eos>).
HallucinativeCaption generate_hallucinative(const BoundModel& snapshot, const VideoSample& sample,
                                            const TokenSet& suppressed, std::size_t max_length,
                                            std::uint64_t snapshot_id = 0);

// One caption per sample, max length = the sample's caption length.
std::vector<HallucinativeCaption> generate_negatives(const BoundModel& snapshot,
                                                     std::span<const VideoSample* const> samples,
                                                     const Lexicon& lexicon, std::uint64_t snapshot_id = 0,
                                                     Exec exec = Exec::parallel);

}  // namespace santa
