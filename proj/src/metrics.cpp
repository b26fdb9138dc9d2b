#include "santa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "santa/errors.hpp"
#include "text_io.hpp"

namespace santa {

PredictionSets parse_prediction(std::span<const TokenId> caption, const Lexicon& lexicon) {
  PredictionSets out;
  for (auto t : caption) {
    if (!lexicon.contains(t)) throw UsageError("prediction contains unknown token id " + std::to_string(t));
    switch (lexicon.category(t)) {
      case Category::object:
        out.objects.insert(t);
        break;
      case Category::action:
        out.actions.insert(t);
        break;
      case Category::other:
        break;
    }
  }
  return out;
}

namespace {

std::size_t intersection_size(const TokenSet& a, const TokenSet& b) {
  std::size_t n = 0;
  for (auto t : a) n += b.count(t);
  return n;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

double hal_exact(const TokenSet& predicted, const TokenSet& truth) {
  if (predicted.empty()) return 0.0;
  return 1.0 - static_cast<double>(intersection_size(predicted, truth)) / static_cast<double>(predicted.size());
}

double cov_exact(const TokenSet& predicted, const TokenSet& truth) {
  if (truth.empty()) return 1.0;
  return static_cast<double>(intersection_size(predicted, truth)) / static_cast<double>(truth.size());
}

double hal_weighted(const TokenSet& predicted, const TokenSet& truth, const Lexicon& lexicon) {
  if (predicted.empty()) return 0.0;
  if (truth.empty()) return 1.0;
  double matched = 0.0;
  for (auto p : predicted) {
    double best = 0.0;
    for (auto g : truth) best = std::max(best, std::clamp(cosine(lexicon.embedding(p), lexicon.embedding(g)), 0.0, 1.0));
    matched += best;
  }
  return std::clamp(1.0 - matched / static_cast<double>(predicted.size()), 0.0, 1.0);
}

double cov_weighted(const TokenSet& predicted, const TokenSet& truth, const CorpusStats& stats,
                    const TermCounts& truth_document) {
  if (truth.empty()) return 1.0;
  double num = 0.0, den = 0.0;
  for (auto g : truth) {
    const double w = tf_idf(g, truth_document, stats);
    den += w;
    if (predicted.count(g)) num += w;
  }
  if (den <= 0.0) return 1.0;
  return std::clamp(num / den, 0.0, 1.0);
}

double f1_score(double hal, double cov) {
  if (!(hal >= 0.0 && hal <= 1.0) || !(cov >= 0.0 && cov <= 1.0))
    throw UsageError("f1: hal and cov must lie in [0, 1], got " + std::to_string(hal) + ", " + std::to_string(cov));
  const double precision = 1.0 - hal;
  const double den = precision + cov;
  if (den == 0.0) return 0.0;
  return 2.0 * precision * cov / den;
}

bool MetricReport::operator==(const MetricReport& o) const {
  for (int v = 0; v < 2; ++v)
    for (int c = 0; c < 2; ++c) {
      const auto& a = scores[v][c];
      const auto& b = o.scores[v][c];
      if (a.hal != b.hal || a.cov != b.cov || a.f1 != b.f1) return false;
    }
  return n_samples == o.n_samples && empty_prediction == o.empty_prediction && empty_truth == o.empty_truth &&
         alignment_gap == o.alignment_gap;
}

SampleScores score_sample(std::span<const TokenId> prediction, const VideoSample& truth, const Lexicon& lexicon,
                          const CorpusStats& stats) {
  const auto pred = parse_prediction(prediction, lexicon);
  const std::array<TokenSet, 2> p = {pred.objects, pred.actions};
  const std::array<TokenSet, 2> g = {object_tokens(truth), action_tokens(truth)};
  const auto doc = term_counts(truth.caption);
  SampleScores s;
  for (int c = 0; c < 2; ++c) {
    s.empty_prediction[c] = p[c].empty();
    s.empty_truth[c] = g[c].empty();
    auto& ex = s.scores[static_cast<int>(Variant::exact)][c];
    ex.hal = hal_exact(p[c], g[c]);
    ex.cov = cov_exact(p[c], g[c]);
    ex.f1 = f1_score(ex.hal, ex.cov);
    auto& wt = s.scores[static_cast<int>(Variant::weighted)][c];
    wt.hal = hal_weighted(p[c], g[c], lexicon);
    wt.cov = cov_weighted(p[c], g[c], stats, doc);
    wt.f1 = f1_score(wt.hal, wt.cov);
  }
  return s;
}

MetricReport evaluate_corpus(const std::map<std::string, std::vector<TokenId>>& predictions,
                             std::span<const VideoSample> eval_corpus, const Lexicon& lexicon, Exec exec) {
  std::string missing;
  for (const auto& s : eval_corpus)
    if (!predictions.count(s.sample_id)) missing += (missing.empty() ? "" : ", ") + s.sample_id;
  if (!missing.empty()) throw UsageError("missing predictions for samples: " + missing);

  // Aggregate in sorted-id order so the result does not depend on corpus order.
  std::vector<const VideoSample*> order;
  for (const auto& s : eval_corpus) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->sample_id < b->sample_id; });

  const auto stats = caption_stats(eval_corpus);
  std::vector<SampleScores> per(order.size());
  for_each_index(order.size(), exec, [&](std::size_t i) {
    per[i] = score_sample(predictions.at(order[i]->sample_id), *order[i], lexicon, stats);
  });

  MetricReport report;
  report.n_samples = per.size();
  for (const auto& s : per)
    for (int v = 0; v < 2; ++v)
      for (int c = 0; c < 2; ++c) {
        report.scores[v][c].hal += s.scores[v][c].hal;
        report.scores[v][c].cov += s.scores[v][c].cov;
        report.scores[v][c].f1 += s.scores[v][c].f1;
        if (v == 0) {
          report.empty_prediction[c] += s.empty_prediction[c];
          report.empty_truth[c] += s.empty_truth[c];
        }
      }
  if (!per.empty())
    for (auto& row : report.scores)
      for (auto& sc : row) {
        const double d = static_cast<double>(per.size());
        sc.hal /= d;
        sc.cov /= d;
        sc.f1 /= d;
      }
  return report;
}

namespace {
constexpr const char* kVariantNames[2] = {"exact", "weighted"};
constexpr const char* kCategoryNames[2] = {"object", "action"};
}  // namespace

void write_report_csv(std::ostream& out, const MetricReport& report) {
  out << "variant,category,Hal,Cov,F1,n_samples,alignment_gap\n";
  const std::string gap = report.alignment_gap ? textio::format_double(*report.alignment_gap) : "NA";
  for (int v = 0; v < 2; ++v)
    for (int c = 0; c < 2; ++c) {
      const auto& s = report.scores[v][c];
      out << kVariantNames[v] << ',' << kCategoryNames[c] << ',' << textio::format_double(s.hal) << ','
          << textio::format_double(s.cov) << ',' << textio::format_double(s.f1) << ',' << report.n_samples << ','
          << gap << '\n';
    }
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  for (int v = 0; v < 2; ++v)
    for (int c = 0; c < 2; ++c) {
      const auto& s = report.scores[v][c];
      j["scores"][kVariantNames[v]][kCategoryNames[c]] = {{"Hal", s.hal}, {"Cov", s.cov}, {"F1", s.f1}};
    }
  j["n_samples"] = report.n_samples;
  for (int c = 0; c < 2; ++c) {
    j["flags"]["empty_prediction"][kCategoryNames[c]] = report.empty_prediction[c];
    j["flags"]["empty_ground_truth"][kCategoryNames[c]] = report.empty_truth[c];
  }
  j["alignment_gap"] = report.alignment_gap ? nlohmann::ordered_json(*report.alignment_gap) : nlohmann::ordered_json();
  return j.dump(2);
}

MetricReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricReport r;
  for (int v = 0; v < 2; ++v)
    for (int c = 0; c < 2; ++c) {
      const auto& s = j.at("scores").at(kVariantNames[v]).at(kCategoryNames[c]);
      r.scores[v][c] = {s.at("Hal").get<double>(), s.at("Cov").get<double>(), s.at("F1").get<double>()};
    }
  r.n_samples = j.at("n_samples").get<std::size_t>();
  for (int c = 0; c < 2; ++c) {
    r.empty_prediction[c] = j.at("flags").at("empty_prediction").at(kCategoryNames[c]).get<std::size_t>();
    r.empty_truth[c] = j.at("flags").at("empty_ground_truth").at(kCategoryNames[c]).get<std::size_t>();
  }
  if (!j.at("alignment_gap").is_null()) r.alignment_gap = j.at("alignment_gap").get<double>();
  return r;
}

}  // namespace santa
