#pragma once

// Training objectives.
//
//   info_nce(a, p, N) = -log( phi(a,p) / (phi(a,p) + sum_n phi(a,n)) ),  phi(x,y) = exp(cos(x,y)/tau)
//   L_video = mean_j 1/2 [ info_nce(c_j, v_j, V-) + info_nce(v_j, c_j, C- U {ch_j}) ]
//   L_obj   = mean_p 1/2 [ info_nce(T_p, P_p, P-) + info_nce(P_p, T_p, T- U Th_p) ]
//   L_act   = same shape as L_obj with squeezed action features and verb phrases
//   L_total = alpha (L_obj + L_act) + beta L_video + L_g
//
// Negative pools are in-batch. Pools never contain an item with the anchor's
// own token id (same-class phrases/tracklets are not negatives). The
// hallucinated-caption features (ch, Th) are added only when negatives were
// generated for the batch.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "santa/autodiff.hpp"
#include "santa/corpus.hpp"
#include "santa/model.hpp"
#include "santa/self_augment.hpp"

namespace santa {

Var info_nce(const Var& anchor, const Var& positive, std::span<const Var> negatives, double tau);

struct ContrastiveBatch {
  struct Pair {
    Var visual;  // tracklet feature (objects) or squeezed feature (actions)
    Var phrase;
    TokenId token = 0;
    std::size_t sample = 0;
    std::size_t query = 0;  // selected squeezer query, actions only
  };

  VisualContext visual;
  std::vector<Var> video;
  std::vector<Var> caption;
  std::vector<std::optional<Var>> hallucinated_caption;
  std::vector<Pair> objects;
  std::vector<Pair> actions;
  std::vector<std::vector<Var>> hallucinated_objects;  // per sample, phrase features of C_h object tokens
  std::vector<std::vector<Var>> hallucinated_actions;
};

struct BatchRequest {
  bool captions = true;
  bool objects = true;
  bool actions = true;
  // Overrides the argmax query selection of each action triple, in batch order.
  std::optional<std::vector<std::size_t>> frozen_queries;
};

// `negatives` is empty or holds one hallucinated caption per sample.
ContrastiveBatch build_contrastive_batch(const BoundModel& model, std::span<const VideoSample* const> samples,
                                         std::span<const HallucinativeCaption> negatives, const Lexicon& lexicon,
                                         const BatchRequest& request = {});

Var l_video(const ContrastiveBatch& batch, double tau);
// Zero when the batch has no annotated objects / relation triples.
Var l_obj(const ContrastiveBatch& batch, double tau);
Var l_act(const ContrastiveBatch& batch, double tau);
// Mean next-token cross-entropy of the ground-truth captions (plus <eos>).
Var l_g(const BoundModel& model, std::span<const VideoSample* const> samples, const VisualContext& visual);

struct LossBreakdown {
  double l_g = 0.0;
  double l_video = 0.0;
  double l_obj = 0.0;
  double l_act = 0.0;
  double l_total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double tau = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

double total_loss(double l_g, double l_video, double l_obj, double l_act, double alpha, double beta);
Var total_loss(const Var& l_g, const Var& l_video, const Var& l_obj, const Var& l_act, double alpha, double beta);
LossBreakdown l_total(double l_g, double l_video, double l_obj, double l_act, double alpha, double beta, double tau);

// CSV with header step,L_g,L_video,L_obj,L_act,L_total.
void write_loss_header(std::ostream& out);
void write_loss_row(std::ostream& out, std::size_t step, const LossBreakdown& losses);

}  // namespace santa
