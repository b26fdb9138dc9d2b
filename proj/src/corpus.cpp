#include "santa/corpus.hpp"

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "santa/errors.hpp"
#include "text_io.hpp"

namespace santa {

TokenSet object_tokens(const VideoSample& sample) {
  TokenSet out;
  for (const auto& o : sample.gt_objects) out.insert(o.token);
  return out;
}

TokenSet action_tokens(const VideoSample& sample) {
  TokenSet out;
  for (const auto& a : sample.gt_actions) out.insert(a.action);
  return out;
}

std::vector<VideoSample> filter_split(std::span<const VideoSample> corpus, Split split) {
  std::vector<VideoSample> out;
  for (const auto& s : corpus)
    if (s.split == split) out.push_back(s);
  return out;
}

CorpusStats caption_stats(std::span<const VideoSample> samples) {
  std::vector<std::vector<TokenId>> docs;
  docs.reserve(samples.size());
  for (const auto& s : samples) docs.push_back(s.caption);
  return build_corpus_stats(docs);
}

void validate_sample(const VideoSample& s, const Lexicon& lexicon) {
  const auto fail = [&](const std::string& what) { throw UsageError("sample '" + s.sample_id + "': " + what); };
  if (s.sample_id.empty()) throw UsageError("sample with empty id");
  std::size_t frames = 0, dim = 0;
  for (const auto& [inst, t] : s.tracklets) {
    if (t.rank() != 2) fail("tracklet " + std::to_string(inst) + " is not a frames x dim matrix");
    if (frames == 0) {
      frames = t.rows();
      dim = t.cols();
    } else if (t.rows() != frames || t.cols() != dim) {
      fail("tracklet " + std::to_string(inst) + " shape " + shape_str(t.shape()) + " differs from other tracklets");
    }
    if (!t.all_finite()) fail("tracklet " + std::to_string(inst) + " has non-finite values");
  }
  for (auto tok : s.caption)
    if (!lexicon.contains(tok)) fail("unknown token id " + std::to_string(tok) + " in caption");
  for (const auto& o : s.gt_objects) {
    if (!lexicon.contains(o.token)) fail("unknown token id " + std::to_string(o.token) + " in objects");
    if (lexicon.category(o.token) != Category::object) fail("object annotation token " + std::to_string(o.token) + " is not an object");
    if (!s.tracklets.count(o.instance)) fail("object instance " + std::to_string(o.instance) + " has no tracklet");
  }
  for (const auto& a : s.gt_actions) {
    if (!lexicon.contains(a.action)) fail("unknown token id " + std::to_string(a.action) + " in actions");
    if (lexicon.category(a.action) != Category::action) fail("action annotation token " + std::to_string(a.action) + " is not an action");
    if (!s.tracklets.count(a.subject) || !s.tracklets.count(a.object))
      fail("relation references an instance without a tracklet");
    if (a.subject == a.object) fail("relation must involve two distinct instances");
  }
}

namespace {

std::string join_tokens(std::span<const TokenId> ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::size_t need_index(std::string_view s, std::size_t line, const char* what) {
  auto v = textio::parse_index(s);
  if (!v) throw ParseError(std::string("malformed ") + what + " '" + std::string(s) + "'", line);
  return *v;
}

Tensor parse_frames(std::string_view body, std::size_t line) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  for (auto frame : textio::split(body, ';')) {
    const auto parts = textio::split(frame, ',');
    if (parts.empty()) throw ParseError("empty tracklet frame", line);
    if (rows == 0) cols = parts.size();
    if (parts.size() != cols) throw ParseError("tracklet frames have different dimensions", line);
    for (auto p : parts) {
      auto v = textio::parse_double(p);
      if (!v) throw ParseError("malformed tracklet value '" + std::string(p) + "'", line);
      data.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("tracklet without frames", line);
  return Tensor::matrix(rows, cols, std::move(data));
}

}  // namespace

std::vector<VideoSample> read_corpus(std::istream& in, const Lexicon& lexicon) {
  std::vector<VideoSample> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = textio::split(line, '\t');
    if (fields.size() != 6)
      throw ParseError("expected 6 tab-separated fields, got " + std::to_string(fields.size()), lineno);
    VideoSample s;
    s.sample_id = std::string(fields[0]);
    if (s.sample_id.empty()) throw ParseError("empty sample_id", lineno);
    if (!ids.insert(s.sample_id).second) throw ParseError("duplicate sample_id '" + s.sample_id + "'", lineno);
    if (fields[1] == "train")
      s.split = Split::train;
    else if (fields[1] == "eval")
      s.split = Split::eval;
    else
      throw ParseError("unknown split '" + std::string(fields[1]) + "'", lineno);

    for (auto tok : textio::split(fields[2], ' ')) {
      const auto id = need_index(tok, lineno, "caption token");
      if (id > UINT32_MAX || !lexicon.contains(static_cast<TokenId>(id)))
        throw ParseError("unknown token id " + std::to_string(id), lineno);
      s.caption.push_back(static_cast<TokenId>(id));
    }
    for (auto obj : textio::split(fields[3], ' ')) {
      const auto parts = textio::split(obj, '@');
      if (parts.size() != 2) throw ParseError("malformed object annotation '" + std::string(obj) + "'", lineno);
      const auto tok = need_index(parts[0], lineno, "object token");
      if (!lexicon.contains(static_cast<TokenId>(tok))) throw ParseError("unknown token id " + std::to_string(tok), lineno);
      s.gt_objects.push_back({static_cast<TokenId>(tok), static_cast<InstanceId>(need_index(parts[1], lineno, "instance"))});
    }
    for (auto act : textio::split(fields[4], ' ')) {
      const auto parts = textio::split(act, '@');
      if (parts.size() != 3) throw ParseError("malformed action triple '" + std::string(act) + "'", lineno);
      const auto tok = need_index(parts[0], lineno, "action token");
      if (!lexicon.contains(static_cast<TokenId>(tok))) throw ParseError("unknown token id " + std::to_string(tok), lineno);
      s.gt_actions.push_back({static_cast<TokenId>(tok),
                              static_cast<InstanceId>(need_index(parts[1], lineno, "instance")),
                              static_cast<InstanceId>(need_index(parts[2], lineno, "instance"))});
    }
    for (auto tr : textio::split(fields[5], ' ')) {
      const auto colon = tr.find(':');
      if (colon == std::string_view::npos || tr.size() < colon + 3 || tr[colon + 1] != '[' || tr.back() != ']')
        throw ParseError("malformed tracklet '" + std::string(tr.substr(0, 32)) + "'", lineno);
      const auto inst = static_cast<InstanceId>(need_index(tr.substr(0, colon), lineno, "instance"));
      if (s.tracklets.count(inst)) throw ParseError("duplicate tracklet instance " + std::to_string(inst), lineno);
      s.tracklets.emplace(inst, parse_frames(tr.substr(colon + 2, tr.size() - colon - 3), lineno));
    }
    try {
      validate_sample(s, lexicon);
    } catch (const UsageError& e) {
      throw ParseError(e.what(), lineno);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus(std::ostream& out, std::span<const VideoSample> corpus) {
  for (const auto& s : corpus) {
    out << s.sample_id << '\t' << (s.split == Split::train ? "train" : "eval") << '\t' << join_tokens(s.caption) << '\t';
    for (std::size_t i = 0; i < s.gt_objects.size(); ++i) {
      if (i) out << ' ';
      out << s.gt_objects[i].token << '@' << s.gt_objects[i].instance;
    }
    out << '\t';
    for (std::size_t i = 0; i < s.gt_actions.size(); ++i) {
      if (i) out << ' ';
      const auto& a = s.gt_actions[i];
      out << a.action << '@' << a.subject << '@' << a.object;
    }
    out << '\t';
    bool first = true;
    for (const auto& [inst, t] : s.tracklets) {
      if (!first) out << ' ';
      first = false;
      out << inst << ":[";
      for (std::size_t r = 0; r < t.rows(); ++r) {
        if (r) out << ';';
        for (std::size_t c = 0; c < t.cols(); ++c) {
          if (c) out << ',';
          out << textio::format_double(t.at(r, c));
        }
      }
      out << ']';
    }
    out << '\n';
  }
}

std::vector<VideoSample> load_corpus(const std::filesystem::path& path, const Lexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return read_corpus(in, lexicon);
}

void save_corpus(const std::filesystem::path& path, std::span<const VideoSample> corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
}

}  // namespace santa
