#pragma once

// Exact and weighted HalFscore.
//
// Hal (hallucination rate) and Cov (coverage) are computed per category
// (objects, actions) between the predicted token set P and the ground-truth
// set G, and combined into F1 = 2(1-Hal)Cov / ((1-Hal)+Cov).
//
// The weighted variant replaces exact matching in Hal by the best clamped
// cosine similarity between static token embeddings, and weights Cov by
// tf-idf computed over the evaluation captions.
//
// Empty-set conventions: P empty gives Hal = 0, G empty gives Cov = 1. Both
// cases are counted in the report flags.

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "santa/corpus.hpp"
#include "santa/lexicon.hpp"
#include "santa/parallel.hpp"

namespace santa {

struct PredictionSets {
  TokenSet objects;
  TokenSet actions;
};

// Partitions caption tokens by lexicon category; `other` tokens are dropped.
PredictionSets parse_prediction(std::span<const TokenId> caption, const Lexicon& lexicon);

double hal_exact(const TokenSet& predicted, const TokenSet& truth);
double cov_exact(const TokenSet& predicted, const TokenSet& truth);
double hal_weighted(const TokenSet& predicted, const TokenSet& truth, const Lexicon& lexicon);
double cov_weighted(const TokenSet& predicted, const TokenSet& truth, const CorpusStats& stats,
                    const TermCounts& truth_document);
double f1_score(double hal, double cov);

enum class Variant { exact = 0, weighted = 1 };
enum class MetricCategory { object = 0, action = 1 };

struct Scores {
  double hal = 0.0;
  double cov = 0.0;
  double f1 = 0.0;
};

struct SampleScores {
  std::array<std::array<Scores, 2>, 2> scores{};  // [variant][category]
  std::array<bool, 2> empty_prediction{};
  std::array<bool, 2> empty_truth{};
};

struct MetricReport {
  std::array<std::array<Scores, 2>, 2> scores{};  // [variant][category], macro-averaged
  std::size_t n_samples = 0;
  std::array<std::size_t, 2> empty_prediction{};  // per category
  std::array<std::size_t, 2> empty_truth{};
  // Mean paired video/caption cosine on the evaluated split, when a model supplied it.
  std::optional<double> alignment_gap;

  const Scores& at(Variant v, MetricCategory c) const {
    return scores[static_cast<int>(v)][static_cast<int>(c)];
  }
  bool operator==(const MetricReport&) const;
};

SampleScores score_sample(std::span<const TokenId> prediction, const VideoSample& truth, const Lexicon& lexicon,
                          const CorpusStats& stats);

// Scores one predicted caption per evaluation sample (keyed by sample_id) and
// macro-averages. Throws UsageError listing sample ids without a prediction.
MetricReport evaluate_corpus(const std::map<std::string, std::vector<TokenId>>& predictions,
                             std::span<const VideoSample> eval_corpus, const Lexicon& lexicon,
                             Exec exec = Exec::parallel);

// CSV columns: variant,category,Hal,Cov,F1,n_samples,alignment_gap
void write_report_csv(std::ostream& out, const MetricReport& report);
std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);

}  // namespace santa
