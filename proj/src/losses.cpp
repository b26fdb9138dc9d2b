#include "santa/losses.hpp"

#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <ostream>
#include <string>

#include "santa/errors.hpp"
#include "text_io.hpp"

namespace santa {

using textio::format_double;

namespace {

constexpr double kUnitTolerance = 1e-8;

void require_unit(const Var& v, const char* what) {
  const auto& x = v.value();
  if (x.rank() != 1) throw DimensionError(std::string("info_nce: ") + what + " must be rank 1, got " + shape_str(x.shape()));
  double n2 = 0.0;
  for (double e : x.storage()) n2 += e * e;
  if (std::abs(std::sqrt(n2) - 1.0) > kUnitTolerance)
    throw UsageError(std::string("info_nce: ") + what + " is not unit-normalized (norm " +
                     format_double(std::sqrt(n2)) + ")");
}

Var mean_of(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

Var zero_loss() { return constant(Tensor::scalar(0.0)); }

// Symmetric pair loss over (visual, phrase) pairs. `extra_text` adds per-sample
// hallucinated phrase features to the visual->text pool.
Var pair_loss(const std::vector<ContrastiveBatch::Pair>& pairs,
              const std::vector<std::vector<Var>>& extra_text, double tau) {
  std::vector<Var> terms;
  terms.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& a = pairs[p];
    std::vector<Var> phrase_negs, visual_negs;
    std::map<TokenId, bool> seen;
    for (const auto& b : pairs) {
      if (b.token == a.token) continue;
      visual_negs.push_back(b.visual);
      if (!seen[b.token]) {
        seen[b.token] = true;
        phrase_negs.push_back(b.phrase);
      }
    }
    if (a.sample < extra_text.size())
      for (const auto& h : extra_text[a.sample]) phrase_negs.push_back(h);
    const Var t2v = info_nce(a.phrase, a.visual, visual_negs, tau);
    const Var v2t = info_nce(a.visual, a.phrase, phrase_negs, tau);
    terms.push_back(scale(add(t2v, v2t), 0.5));
  }
  return mean_of(terms);
}

}  // namespace

Var info_nce(const Var& anchor, const Var& positive, std::span<const Var> negatives, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw UsageError("info_nce: temperature must be positive, got " + format_double(tau));
  require_unit(anchor, "anchor");
  require_unit(positive, "positive");
  for (const auto& n : negatives) require_unit(n, "negative");
  const std::size_t d = anchor.value().size();
  std::vector<Var> rows;
  rows.reserve(negatives.size() + 1);
  rows.push_back(positive);
  for (const auto& n : negatives) {
    if (n.value().size() != d)
      throw DimensionError("info_nce: negative of size " + std::to_string(n.value().size()) + ", anchor " +
                           std::to_string(d));
    rows.push_back(n);
  }
  if (positive.value().size() != d) throw DimensionError("info_nce: positive/anchor size mismatch");
  const Var sims = scale(reshape(matmul(concat(rows, 0), anchor, false, true), {rows.size()}), 1.0 / tau);
  const Var pos = element(sims, 0);
  if (negatives.empty()) return sub(pos, pos);
  return sub(log_sum_exp(sims), pos);
}

ContrastiveBatch build_contrastive_batch(const BoundModel& m, std::span<const VideoSample* const> samples,
                                         std::span<const HallucinativeCaption> negatives, const Lexicon& lexicon,
                                         const BatchRequest& request) {
  if (samples.empty()) throw UsageError("build_contrastive_batch: empty batch");
  if (!negatives.empty() && negatives.size() != samples.size())
    throw UsageError("build_contrastive_batch: " + std::to_string(negatives.size()) + " negatives for " +
                     std::to_string(samples.size()) + " samples");
  const std::size_t n = samples.size();
  ContrastiveBatch out;
  out.visual = encode_visual(m, samples);
  for (std::size_t i = 0; i < n; ++i) out.video.push_back(select_row(out.visual.videos, i));
  out.hallucinated_caption.resize(n);
  out.hallucinated_objects.resize(n);
  out.hallucinated_actions.resize(n);

  if (request.captions) {
    std::vector<std::vector<TokenId>> texts;
    std::vector<std::size_t> halluc_row(n, SIZE_MAX);
    for (const auto* s : samples) {
      if (s->caption.empty()) throw UsageError("sample " + s->sample_id + " has an empty caption");
      texts.push_back(s->caption);
    }
    for (std::size_t i = 0; i < negatives.size(); ++i)
      if (!negatives[i].tokens.empty()) {
        halluc_row[i] = texts.size();
        texts.push_back(negatives[i].tokens);
      }
    const Var feats = encode_texts(m, texts);
    for (std::size_t i = 0; i < n; ++i) {
      out.caption.push_back(select_row(feats, i));
      if (halluc_row[i] != SIZE_MAX) out.hallucinated_caption[i] = select_row(feats, halluc_row[i]);
    }
  }

  if (!request.objects && !request.actions) return out;

  // One batched encode for every phrase token the losses need.
  std::vector<TokenId> tokens;
  std::map<TokenId, std::size_t> token_row;
  auto want = [&](TokenId t) {
    if (token_row.emplace(t, tokens.size()).second) tokens.push_back(t);
  };
  std::vector<std::vector<TokenId>> h_obj(n), h_act(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (request.objects)
      for (const auto& o : samples[i]->gt_objects) want(o.token);
    if (request.actions)
      for (const auto& r : samples[i]->gt_actions) want(r.action);
    if (!negatives.empty()) {
      TokenSet seen;
      for (auto t : negatives[i].tokens) {
        if (!lexicon.contains(t) || !seen.insert(t).second) continue;
        const auto cat = lexicon.category(t);
        if (cat == Category::object && request.objects) h_obj[i].push_back(t);
        if (cat == Category::action && request.actions) h_act[i].push_back(t);
      }
      for (auto t : h_obj[i]) want(t);
      for (auto t : h_act[i]) want(t);
    }
  }
  if (tokens.empty()) return out;
  const Var phrases = encode_tokens(m, tokens);
  auto phrase = [&](TokenId t) { return select_row(phrases, token_row.at(t)); };
  for (std::size_t i = 0; i < n; ++i) {
    for (auto t : h_obj[i]) out.hallucinated_objects[i].push_back(phrase(t));
    for (auto t : h_act[i]) out.hallucinated_actions[i].push_back(phrase(t));
  }

  const InstanceFeatures& inst = out.visual.instances;
  auto row_of = [&](std::size_t i, InstanceId id) {
    auto it = samples[i]->tracklets.find(id);
    if (it == samples[i]->tracklets.end())
      throw UsageError("sample " + samples[i]->sample_id + " references missing instance " + std::to_string(id));
    return out.visual.first_instance[i] +
           static_cast<std::size_t>(std::distance(samples[i]->tracklets.begin(), it));
  };

  if (request.objects)
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& o : samples[i]->gt_objects)
        out.objects.push_back({select_row(inst.pooled, row_of(i, o.instance)), phrase(o.token), o.token, i, 0});

  if (request.actions) {
    std::size_t triple = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& r : samples[i]->gt_actions) {
        std::vector<Var> parts;
        for (auto id : {r.subject, r.object}) {
          const auto row = row_of(i, id);
          std::vector<std::size_t> frames(inst.lengths[row]);
          for (std::size_t f = 0; f < frames.size(); ++f) frames[f] = inst.offsets[row] + f;
          parts.push_back(gather_rows(inst.frame_tokens, frames));
        }
        std::optional<std::size_t> frozen;
        if (request.frozen_queries) {
          if (triple >= request.frozen_queries->size())
            throw UsageError("frozen query list has " + std::to_string(request.frozen_queries->size()) +
                             " entries, batch has more relation triples");
          frozen = (*request.frozen_queries)[triple];
        }
        const Var p = phrase(r.action);
        const Squeezed sq = action_squeeze(m, parts, p, frozen);
        out.actions.push_back({sq.feature, p, r.action, i, sq.query});
        ++triple;
      }
  }
  return out;
}

Var l_video(const ContrastiveBatch& batch, double tau) {
  const std::size_t n = batch.video.size();
  if (batch.caption.size() != n) throw UsageError("l_video: batch was built without caption features");
  std::vector<Var> terms;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Var> vneg, cneg;
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) {
        vneg.push_back(batch.video[i]);
        cneg.push_back(batch.caption[i]);
      }
    if (batch.hallucinated_caption[j]) cneg.push_back(*batch.hallucinated_caption[j]);
    const Var t2v = info_nce(batch.caption[j], batch.video[j], vneg, tau);
    const Var v2t = info_nce(batch.video[j], batch.caption[j], cneg, tau);
    terms.push_back(scale(add(t2v, v2t), 0.5));
  }
  return mean_of(terms);
}

Var l_obj(const ContrastiveBatch& batch, double tau) {
  if (batch.objects.empty()) return zero_loss();
  return pair_loss(batch.objects, batch.hallucinated_objects, tau);
}

Var l_act(const ContrastiveBatch& batch, double tau) {
  if (batch.actions.empty()) return zero_loss();
  return pair_loss(batch.actions, batch.hallucinated_actions, tau);
}

Var l_g(const BoundModel& m, std::span<const VideoSample* const> samples, const VisualContext& visual) {
  if (samples.empty()) throw UsageError("l_g: empty batch");
  const auto& c = m.config();
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::size_t> targets;
  for (const auto* s : samples) {
    std::vector<TokenId> in{c.bos};
    in.insert(in.end(), s->caption.begin(), s->caption.end());
    for (auto t : s->caption) targets.push_back(t);
    targets.push_back(c.eos);
    inputs.push_back(std::move(in));
  }
  return cross_entropy(decoder_logits(m, inputs, visual.pooled), targets);
}

double total_loss(double l_g, double l_video, double l_obj, double l_act, double alpha, double beta) {
  return alpha * (l_obj + l_act) + beta * l_video + l_g;
}

Var total_loss(const Var& lg, const Var& lv, const Var& lo, const Var& la, double alpha, double beta) {
  return add(add(scale(add(lo, la), alpha), scale(lv, beta)), lg);
}

LossBreakdown l_total(double lg, double lv, double lo, double la, double alpha, double beta, double tau) {
  return {lg, lv, lo, la, total_loss(lg, lv, lo, la, alpha, beta), alpha, beta, tau};
}

void write_loss_header(std::ostream& out) { out << "step,L_g,L_video,L_obj,L_act,L_total\n"; }

void write_loss_row(std::ostream& out, std::size_t step, const LossBreakdown& l) {
  out << step << ',' << format_double(l.l_g) << ',' << format_double(l.l_video) << ',' << format_double(l.l_obj)
      << ',' << format_double(l.l_act) << ',' << format_double(l.l_total) << '\n';
}

}  // namespace santa
