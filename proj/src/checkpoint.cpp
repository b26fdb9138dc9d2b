#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "santa/errors.hpp"
#include "santa/model.hpp"
#include "text_io.hpp"

namespace santa {

namespace {
constexpr std::string_view kMagic = "santa-checkpoint 1";
}

// Format: a magic line, a config line of key=value pairs, then per parameter a
// header line "param <name> <rank> <dims...>" followed by one line of values.
void write_checkpoint(std::ostream& out, const ModelState& state) {
  const auto& c = state.config;
  out << kMagic << '\n';
  out << "config d_vis=" << c.d_vis << " d_tok=" << c.d_tok << " d_model=" << c.d_model << " d_ff=" << c.d_ff
      << " vocab=" << c.vocab << " context_length=" << c.context_length << " max_frames=" << c.max_frames
      << " num_queries=" << c.num_queries << " temperature=" << textio::format_double(c.temperature)
      << " seed=" << c.seed << " bos=" << c.bos << " eos=" << c.eos << '\n';
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    const auto& t = state.params[i];
    out << "param " << param_name(static_cast<Param>(i)) << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (j) out << ' ';
      out << textio::format_double(t[j]);
    }
    out << '\n';
  }
}

ModelState read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("not a checkpoint file (bad magic)", lineno);
  ++lineno;
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0) throw ParseError("missing config line", lineno);

  ModelState state;
  auto& c = state.config;
  for (auto kv : textio::split(std::string_view(line).substr(7), ' ')) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ParseError("malformed config entry '" + std::string(kv) + "'", lineno);
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    if (key == "temperature") {
      auto v = textio::parse_double(val);
      if (!v) throw ParseError("malformed temperature", lineno);
      c.temperature = *v;
      continue;
    }
    auto v = textio::parse_index(val);
    if (!v) throw ParseError("malformed value for '" + std::string(key) + "'", lineno);
    if (key == "d_vis") c.d_vis = *v;
    else if (key == "d_tok") c.d_tok = *v;
    else if (key == "d_model") c.d_model = *v;
    else if (key == "d_ff") c.d_ff = *v;
    else if (key == "vocab") c.vocab = *v;
    else if (key == "context_length") c.context_length = *v;
    else if (key == "max_frames") c.max_frames = *v;
    else if (key == "num_queries") c.num_queries = *v;
    else if (key == "seed") c.seed = *v;
    else if (key == "bos") c.bos = static_cast<TokenId>(*v);
    else if (key == "eos") c.eos = static_cast<TokenId>(*v);
    else throw ParseError("unknown config key '" + std::string(key) + "'", lineno);
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw ParseError(e.what(), lineno);
  }

  for (std::size_t i = 0; i < kNumParams; ++i) {
    ++lineno;
    if (!std::getline(in, line)) throw ParseError("truncated checkpoint", lineno);
    const auto head = textio::split(line, ' ');
    if (head.size() < 3 || head[0] != "param" || head[1] != param_name(static_cast<Param>(i)))
      throw ParseError("expected parameter '" + std::string(param_name(static_cast<Param>(i))) + "'", lineno);
    auto rank = textio::parse_index(head[2]);
    if (!rank || head.size() != 3 + *rank) throw ParseError("malformed parameter shape", lineno);
    Shape shape;
    for (std::size_t r = 0; r < *rank; ++r) {
      auto d = textio::parse_index(head[3 + r]);
      if (!d) throw ParseError("malformed parameter shape", lineno);
      shape.push_back(*d);
    }
    ++lineno;
    if (!std::getline(in, line)) throw ParseError("truncated checkpoint", lineno);
    std::vector<double> values;
    for (auto tok : textio::split(line, ' ')) {
      auto v = textio::parse_double(tok);
      if (!v) throw ParseError("malformed parameter value '" + std::string(tok) + "'", lineno);
      values.push_back(*v);
    }
    try {
      state.params.emplace_back(shape, std::move(values));
    } catch (const DimensionError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  try {
    BoundModel check(state, nullptr);
  } catch (const std::exception& e) {
    throw ParseError(e.what(), lineno);
  }
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, state);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace santa
