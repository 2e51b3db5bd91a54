#include "wildseg/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace wildseg::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

Value parse_value(const std::string& key, const std::string& raw) {
  if (raw.empty()) fail("ConfigError", key);
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') fail("ConfigError", key);
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        const char e = raw[++i];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += raw[i];
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  std::string num;
  for (char c : raw) {
    if (c != '_') num += c;
  }
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), i);
  if (ec == std::errc() && p == num.data() + num.size()) return i;
  double d = 0.0;
  auto [q, ec2] = std::from_chars(num.data(), num.data() + num.size(), d);
  if (ec2 == std::errc() && q == num.data() + num.size()) return d;
  fail("ConfigError", key);
}

double as_double(const std::string& key, const Value& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  fail("ConfigError", key);
}

std::int64_t as_int(const std::string& key, const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  fail("ConfigError", key);
}

bool as_bool(const std::string& key, const Value& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  fail("ConfigError", key);
}

std::string as_string(const std::string& key, const Value& v) {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  fail("ConfigError", key);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const Value&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"input.frames_dir", [](auto& c, auto& k, auto& v) { c.frames_dir = as_string(k, v); }},
      {"input.pattern", [](auto& c, auto& k, auto& v) { c.pattern = as_string(k, v); }},
      {"input.frame_rate", [](auto& c, auto& k, auto& v) { c.frame_rate = as_double(k, v); }},
      {"input.matte_dir", [](auto& c, auto& k, auto& v) { c.matte_dir = as_string(k, v); }},
      {"input.matte_pattern", [](auto& c, auto& k, auto& v) { c.matte_pattern = as_string(k, v); }},
      {"input.matte_threshold", [](auto& c, auto& k, auto& v) { c.matte_threshold = static_cast<int>(as_int(k, v)); }},
      {"input.tau_bg", [](auto& c, auto& k, auto& v) { c.tau_bg = as_double(k, v); }},
      {"input.min_blob", [](auto& c, auto& k, auto& v) { c.min_blob = static_cast<int>(as_int(k, v)); }},
      {"input.truth_dir", [](auto& c, auto& k, auto& v) { c.truth_dir = as_string(k, v); }},
      {"run.out_dir", [](auto& c, auto& k, auto& v) { c.out_dir = as_string(k, v); }},
      {"run.frames", [](auto& c, auto& k, auto& v) { c.frames = static_cast<int>(as_int(k, v)); }},
      {"run.seed", [](auto& c, auto& k, auto& v) {
         const auto s = as_int(k, v);
         if (s < 0) fail("ConfigError", k);
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"edges.sigma", [](auto& c, auto& k, auto& v) { c.canny.sigma = as_double(k, v); }},
      {"edges.low", [](auto& c, auto& k, auto& v) { c.canny.low = as_double(k, v); }},
      {"edges.high", [](auto& c, auto& k, auto& v) { c.canny.high = as_double(k, v); }},
      {"edges.high_percentile", [](auto& c, auto& k, auto& v) { c.canny.high_percentile = as_double(k, v); }},
      {"edges.low_ratio", [](auto& c, auto& k, auto& v) { c.canny.low_ratio = as_double(k, v); }},
      {"track.gate", [](auto& c, auto& k, auto& v) { c.gate = as_double(k, v); }},
      {"track.min_length", [](auto& c, auto& k, auto& v) { c.min_length = static_cast<int>(as_int(k, v)); }},
      {"track.min_coverage", [](auto& c, auto& k, auto& v) { c.min_coverage = as_double(k, v); }},
      {"track.min_window", [](auto& c, auto& k, auto& v) { c.min_window = static_cast<int>(as_int(k, v)); }},
      {"track.feature_mode", [](auto& c, auto& k, auto& v) {
         try {
           c.feature_mode = tracking::parse_feature_mode(as_string(k, v));
         } catch (const Error&) {
           fail("ConfigError", k);
         }
       }},
      {"cluster.cut", [](auto& c, auto& k, auto& v) {
         const auto s = as_string(k, v);
         if (s == "auto") c.cut.kind = clustering::CutCriterion::Kind::Auto;
         else if (s == "k") c.cut.kind = clustering::CutCriterion::Kind::ExactK;
         else if (s == "threshold") c.cut.kind = clustering::CutCriterion::Kind::Threshold;
         else fail("ConfigError", k);
       }},
      {"cluster.k", [](auto& c, auto& k, auto& v) { c.cut.k = static_cast<int>(as_int(k, v)); }},
      {"cluster.threshold", [](auto& c, auto& k, auto& v) { c.cut.threshold = as_double(k, v); }},
      {"refine.enabled", [](auto& c, auto& k, auto& v) { c.refine = as_bool(k, v); }},
      {"refine.margin", [](auto& c, auto& k, auto& v) { c.train.margin = as_double(k, v); }},
      {"refine.learning_rate", [](auto& c, auto& k, auto& v) { c.train.learning_rate = as_double(k, v); }},
      {"refine.epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = static_cast<int>(as_int(k, v)); }},
      {"refine.batch_size", [](auto& c, auto& k, auto& v) { c.train.batch_size = static_cast<int>(as_int(k, v)); }},
      {"refine.rounds", [](auto& c, auto& k, auto& v) { c.train.rounds = static_cast<int>(as_int(k, v)); }},
      {"refine.r_sim", [](auto& c, auto& k, auto& v) { c.train.r_sim = as_double(k, v); }},
      {"refine.r_dis", [](auto& c, auto& k, auto& v) { c.train.r_dis = as_double(k, v); }},
      {"refine.d_out", [](auto& c, auto& k, auto& v) { c.train.d_out = static_cast<int>(as_int(k, v)); }},
      {"refine.r_sim_frac", [](auto& c, auto& k, auto& v) { c.r_sim_frac = as_double(k, v); }},
      {"refine.r_dis_frac", [](auto& c, auto& k, auto& v) { c.r_dis_frac = as_double(k, v); }},
      {"refine.position_gain", [](auto& c, auto& k, auto& v) { c.position_gain = as_double(k, v); }},
      {"refine.motion_gain", [](auto& c, auto& k, auto& v) { c.motion_gain = as_double(k, v); }},
      {"render.alpha", [](auto& c, auto& k, auto& v) { c.alpha = as_double(k, v); }},
      {"render.palette_size", [](auto& c, auto& k, auto& v) { c.palette_size = static_cast<int>(as_int(k, v)); }},
      {"eval.var_floor", [](auto& c, auto& k, auto& v) { c.var_floor = as_double(k, v); }},
      {"eval.iou_threshold", [](auto& c, auto& k, auto& v) { c.iou_threshold = as_double(k, v); }},
  };
  return table;
}

}  // namespace

Table parse_toml(const std::string& text) {
  Table out;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("ConfigError", "line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (!bare_key(section)) fail("ConfigError", "line " + std::to_string(lineno));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("ConfigError", "line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    if (!bare_key(key)) fail("ConfigError", "line " + std::to_string(lineno));
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full)) fail("ConfigError", full);
    out[full] = parse_value(full, trim(line.substr(eq + 1)));
  }
  return out;
}

void PipelineConfig::validate() const {
  if (!(frame_rate > 0.0)) fail("ConfigError", "input.frame_rate");
  if (matte_threshold < 0 || matte_threshold > 255) fail("ConfigError", "input.matte_threshold");
  if (!(tau_bg >= 0.0)) fail("ConfigError", "input.tau_bg");
  if (min_blob < 0) fail("ConfigError", "input.min_blob");
  if (frames && *frames < 0) fail("ConfigError", "run.frames");
  try {
    canny.validate();
  } catch (const Error& e) {
    fail("ConfigError", std::string("edges: ") + e.what());
  }
  if (!(gate >= 0.0)) fail("ConfigError", "track.gate");
  if (min_length < 2) fail("ConfigError", "track.min_length");
  if (!(min_coverage > 0.0 && min_coverage <= 1.0)) fail("ConfigError", "track.min_coverage");
  if (min_window < 2) fail("ConfigError", "track.min_window");
  if (cut.kind == clustering::CutCriterion::Kind::ExactK && cut.k < 1) fail("ConfigError", "cluster.k");
  if (cut.kind == clustering::CutCriterion::Kind::Threshold && !(cut.threshold >= 0.0)) {
    fail("ConfigError", "cluster.threshold");
  }
  if (!(train.margin > 0.0)) fail("ConfigError", "refine.margin");
  if (!(train.learning_rate > 0.0)) fail("ConfigError", "refine.learning_rate");
  if (train.epochs < 0) fail("ConfigError", "refine.epochs");
  if (train.batch_size < 1) fail("ConfigError", "refine.batch_size");
  if (train.rounds < 0) fail("ConfigError", "refine.rounds");
  if (train.d_out < 0) fail("ConfigError", "refine.d_out");
  if (train.r_sim < 0.0) fail("ConfigError", "refine.r_sim");
  if (train.r_dis < 0.0) fail("ConfigError", "refine.r_dis");
  if (train.r_sim > 0.0 && train.r_dis > 0.0 && !(train.r_sim < train.r_dis)) fail("ConfigError", "refine.r_sim");
  if (!(r_sim_frac > 0.0)) fail("ConfigError", "refine.r_sim_frac");
  if (!(r_dis_frac > 0.0)) fail("ConfigError", "refine.r_dis_frac");
  if (!(position_gain > 0.0)) fail("ConfigError", "refine.position_gain");
  if (!(motion_gain > 0.0)) fail("ConfigError", "refine.motion_gain");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("ConfigError", "render.alpha");
  if (palette_size < 0) fail("ConfigError", "render.palette_size");
  if (!(var_floor > 0.0)) fail("ConfigError", "eval.var_floor");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) fail("ConfigError", "eval.iou_threshold");
}

void apply_table(PipelineConfig& cfg, const Table& table) {
  const auto& known = setters();
  for (const auto& [key, value] : table) {
    const auto it = known.find(key);
    if (it == known.end()) fail("ConfigError", key);
    it->second(cfg, key, value);
  }
}

PipelineConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("IoError", "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig cfg;
  apply_table(cfg, parse_toml(ss.str()));
  return cfg;
}

std::map<std::string, std::string> canonical(const PipelineConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("auto"); };
  const char* cut_kind = c.cut.kind == clustering::CutCriterion::Kind::Auto     ? "auto"
                         : c.cut.kind == clustering::CutCriterion::Kind::ExactK ? "k"
                                                                                 : "threshold";
  return {
      {"input.frames_dir", c.frames_dir.string()},
      {"input.pattern", c.pattern},
      {"input.frame_rate", fmt(c.frame_rate)},
      {"input.matte_dir", c.matte_dir.string()},
      {"input.matte_pattern", c.matte_pattern},
      {"input.matte_threshold", std::to_string(c.matte_threshold)},
      {"input.tau_bg", fmt(c.tau_bg)},
      {"input.min_blob", std::to_string(c.min_blob)},
      {"input.truth_dir", c.truth_dir.string()},
      {"run.frames", c.frames ? std::to_string(*c.frames) : "all"},
      {"run.seed", std::to_string(c.seed)},
      {"edges.sigma", fmt(c.canny.sigma)},
      {"edges.low", opt(c.canny.low)},
      {"edges.high", opt(c.canny.high)},
      {"edges.high_percentile", fmt(c.canny.high_percentile)},
      {"edges.low_ratio", fmt(c.canny.low_ratio)},
      {"track.gate", fmt(c.gate)},
      {"track.min_length", std::to_string(c.min_length)},
      {"track.min_coverage", fmt(c.min_coverage)},
      {"track.min_window", std::to_string(c.min_window)},
      {"track.feature_mode", tracking::to_string(c.feature_mode)},
      {"cluster.cut", cut_kind},
      {"cluster.k", std::to_string(c.cut.k)},
      {"cluster.threshold", fmt(c.cut.threshold)},
      {"refine.enabled", c.refine ? "true" : "false"},
      {"refine.margin", fmt(c.train.margin)},
      {"refine.learning_rate", fmt(c.train.learning_rate)},
      {"refine.epochs", std::to_string(c.train.epochs)},
      {"refine.batch_size", std::to_string(c.train.batch_size)},
      {"refine.rounds", std::to_string(c.train.rounds)},
      {"refine.r_sim", fmt(c.train.r_sim)},
      {"refine.r_dis", fmt(c.train.r_dis)},
      {"refine.d_out", std::to_string(c.train.d_out)},
      {"refine.r_sim_frac", fmt(c.r_sim_frac)},
      {"refine.r_dis_frac", fmt(c.r_dis_frac)},
      {"refine.position_gain", fmt(c.position_gain)},
      {"refine.motion_gain", fmt(c.motion_gain)},
      {"render.alpha", fmt(c.alpha)},
      {"render.palette_size", std::to_string(c.palette_size)},
      {"eval.var_floor", fmt(c.var_floor)},
      {"eval.iou_threshold", fmt(c.iou_threshold)},
  };
}

}  // namespace wildseg::config
