#include "amenable/experiment/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace amenable::experiment {

namespace fs = std::filesystem;

std::string Value::where() const {
  if (line == 0) return source.empty() ? "<default>" : source;
  return source + ":" + std::to_string(line);
}

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
}

bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class ValueParser {
 public:
  ValueParser(std::string_view text, std::string source, std::size_t line)
      : text_(text), source_(std::move(source)), line_(line) {}

  Value parse_all() {
    Value v = parse();
    skip_ws();
    if (pos_ != text_.size()) error("unexpected text after value: '" + std::string(text_.substr(pos_)) + "'");
    return v;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    if (line_ == 0) throw ConfigError(source_ + ": " + msg);
    fail(source_, line_, msg);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  Value make(decltype(Value::data) d) const { return Value{std::move(d), line_, source_}; }

  Value parse() {
    skip_ws();
    if (pos_ >= text_.size()) error("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_list();
    return parse_bare();
  }

  Value parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\') {
        if (pos_ >= text_.size()) error("unterminated escape");
        const char e = text_[pos_++];
        switch (e) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: error(std::string("unknown escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= text_.size()) error("unterminated string");
    ++pos_;
    return make(std::move(out));
  }

  Value parse_list() {
    ++pos_;
    Value::List items;
    for (;;) {
      skip_ws();
      if (pos_ >= text_.size()) error("unterminated list");
      if (text_[pos_] == ']') {
        ++pos_;
        break;
      }
      Value item = parse();
      if (std::holds_alternative<Value::List>(item.data)) error("nested lists are not supported");
      items.push_back(std::move(item));
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (pos_ >= text_.size()) error("unterminated list");
      if (text_[pos_] != ']') error("expected ',' or ']' in list");
    }
    return make(std::move(items));
  }

  Value parse_bare() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' && text_[pos_] != ' ' &&
           text_[pos_] != '\t')
      ++pos_;
    std::string_view tok = text_.substr(start, pos_ - start);
    if (tok == "true") return make(true);
    if (tok == "false") return make(false);
    std::string_view num = tok;
    if (!num.empty() && num.front() == '+') num.remove_prefix(1);
    const bool real = num.find_first_of(".eE") != std::string_view::npos || num == "inf" || num == "-inf" ||
                      num == "nan";
    if (!real) {
      std::int64_t i = 0;
      const auto r = std::from_chars(num.data(), num.data() + num.size(), i);
      if (r.ec == std::errc() && r.ptr == num.data() + num.size() && !num.empty()) return make(i);
    } else {
      double d = 0;
      const auto r = std::from_chars(num.data(), num.data() + num.size(), d);
      if (r.ec == std::errc() && r.ptr == num.data() + num.size()) return make(d);
    }
    error("cannot parse value '" + std::string(tok) + "' (strings need double quotes)");
  }

  std::string_view text_;
  std::string source_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
      continue;
    }
    if (c == '"') in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Value parse_value(const std::string& text, const std::string& source) {
  return ValueParser(trim(text), source, 0).parse_all();
}

Document parse_document(const std::string& text, const std::string& source) {
  Document doc;
  std::set<std::string> sections;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(source, line_no, "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty() || name.front() == '.' || name.back() == '.' || name.find("..") != std::string::npos)
        fail(source, line_no, "malformed section name '" + name + "'");
      for (char c : name)
        if (!is_key_char(c) && c != '.') fail(source, line_no, "malformed section name '" + name + "'");
      if (!sections.insert(name).second) fail(source, line_no, "duplicate section [" + name + "]");
      section = name;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(source, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char))
      fail(source, line_no, "malformed key '" + key + "'");
    if (section.empty()) fail(source, line_no, "key '" + key + "' appears before any [section]");
    const std::string dotted = section + "." + key;
    if (doc.count(dotted)) fail(source, line_no, "duplicate key " + dotted);
    doc[dotted] = ValueParser(trim(line.substr(eq + 1)), source, line_no).parse_all();
  }
  return doc;
}

Document parse_document_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_document(ss.str(), path.string());
}

namespace {

std::string fmt_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out + "\"";
}

// Enumerations bind through string proxies.
struct Choice {
  std::string current;
  std::function<void(const std::string&)> set;
};

// Visits every configuration field with its dotted key. The order is the
// documentation order and the application order (task.kind precedes the
// task fields it resets).
template <typename V>
void bind_all(ExperimentConfig& c, V& v) {
  auto& d = c.data;
  v.field("data.train", d.train);
  v.field("data.validation", d.validation);
  v.field("data.holdout", d.holdout);
  v.field("data.height", d.height);
  v.field("data.width", d.width);
  v.field("data.channels", d.channels);
  v.field("data.target_rate", d.target_rate);
  v.field("data.radius_min", d.radius_min);
  v.field("data.radius_max", d.radius_max);
  v.field("data.contrast_min", d.contrast_min);
  v.field("data.contrast_max", d.contrast_max);
  v.field("data.background_min", d.background_min);
  v.field("data.background_max", d.background_max);
  v.field("data.texture_amplitude", d.texture_amplitude);
  v.field("data.pixel_noise", d.pixel_noise);
  v.field("data.artefact_rate", d.artefact_rate);
  v.field("data.artefact_in_roi_rate", d.artefact_in_roi_rate);
  v.field("data.artefact_kind_weights", d.artefact_kind_weights);
  v.field("data.artefact_severity_min", d.artefact_severity_min);
  v.field("data.artefact_severity_max", d.artefact_severity_max);
  v.field("data.hard_rate", d.hard_rate);
  v.field("data.low_contrast_share", d.low_contrast_share);
  v.field("data.hard_severity_min", d.hard_severity_min);
  v.field("data.hard_severity_max", d.hard_severity_max);
  v.field("data.strength.noise_sigma", d.strength.noise_sigma);
  v.field("data.strength.stripe_amplitude", d.strength.stripe_amplitude);
  v.field("data.strength.blur_radius", d.strength.blur_radius);
  v.field("data.strength.misalign_pixels", d.strength.misalign_pixels);

  auto& t = c.trainer;
  v.choice("task.kind", Choice{to_string(t.task.kind), [&](const std::string& s) {
                                 t.task = TaskSpec::of_kind(task_kind_from_string(s));
                               }});
  v.field("task.width", t.task.width);
  v.field("task.threshold", t.task.threshold);
  v.field("task.dice_weight", t.task.loss.dice_weight);
  v.field("task.dice_smooth", t.task.loss.dice_smooth);
  v.choice("task.optimizer", Choice{nn::to_string(t.predictor_optimizer.kind), [&](const std::string& s) {
                                      t.predictor_optimizer.kind = nn::optimizer_kind_from_string(s);
                                    }});
  v.field("task.learning_rate", t.predictor_optimizer.learning_rate);

  v.choice("trainer.mode", Choice{to_string(t.mode), [&](const std::string& s) { t.mode = train_mode_from_string(s); }});
  v.field("trainer.seed", t.seed);
  v.field("trainer.batch_size", t.batch_size);
  v.field("trainer.steps", t.steps);
  v.field("trainer.episodes", t.episodes);
  v.field("trainer.max_updates", t.max_updates);
  v.field("trainer.convergence_window", t.convergence_window);
  v.field("trainer.convergence_tolerance", t.convergence_tolerance);
  v.field("trainer.validation_size", t.validation_size);
  v.field("trainer.predictor_reset_interval", t.predictor_reset_interval);
  v.field("trainer.checkpoint_interval", t.checkpoint_interval);
  v.field("trainer.predictor_warmup_steps", t.predictor_warmup_steps);
  v.choice("trainer.pathwise_source", Choice{to_string(t.pathwise_source), [&](const std::string& s) {
                                               t.pathwise_source = pathwise_source_from_string(s);
                                             }});
  v.field("trainer.controller_width", t.controller.width);
  v.field("trainer.controller_hidden", t.controller.hidden);

  v.choice("reward.strategy", Choice{to_string(t.reward.strategy), [&](const std::string& s) {
                                       t.reward.strategy = reward_strategy_from_string(s);
                                     }});
  v.field("reward.s_rej", t.reward.s_rej);
  v.field("reward.alpha", t.reward.alpha);
  v.field("reward.phi", t.reward.phi);
  v.field("reward.selective_keep_lowest", t.reward.selective_keep_lowest);

  auto& p = t.policy;
  v.choice("policy.rule", Choice{to_string(p.rule), [&](const std::string& s) { p.rule = update_rule_from_string(s); }});
  v.choice("policy.optimizer", Choice{nn::to_string(p.optimizer.kind), [&](const std::string& s) {
                                        p.optimizer.kind = nn::optimizer_kind_from_string(s);
                                      }});
  v.field("policy.learning_rate", p.optimizer.learning_rate);
  v.field("policy.entropy_coef", p.entropy_coef);
  v.field("policy.gamma", p.gamma);
  v.field("policy.clip_ratio", p.clip_ratio);
  v.field("policy.epochs", p.epochs);
  v.field("policy.normalize_returns", p.normalize_returns);
  v.field("policy.pathwise_weight", p.pathwise_weight);
  v.field("policy.standardize_pathwise", p.standardize_pathwise);
  v.field("policy.regression_weight", p.regression_weight);

  v.field("evaluation.ks", c.evaluation.ks);
  v.field("evaluation.kappa_k", c.evaluation.kappa_k);
  v.field("evaluation.quadrant_k", c.evaluation.quadrant_k);

  v.field("study.seeds", c.study.seeds);
  v.field("study.phis", c.study.phis);
  v.field("study.s_rejs", c.study.s_rejs);
  v.field("study.jobs", c.study.jobs);

  v.field("output.dir", c.output.dir);
}

const char* type_name(const Value& v) {
  switch (v.data.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "real";
    case 3: return "string";
    default: return "list";
  }
}

class Loader {
 public:
  explicit Loader(const Document& doc) : doc_(doc) {}

  template <typename T>
  void field(const std::string& key, T& ref) {
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    used_.insert(key);
    assign(key, it->second, ref);
  }

  void choice(const std::string& key, const Choice& c) {
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    used_.insert(key);
    const auto* s = std::get_if<std::string>(&it->second.data);
    if (!s) mismatch(key, it->second, "string");
    try {
      c.set(*s);
    } catch (const Error& e) {
      throw ConfigError(it->second.where() + ": " + key + ": " + e.what());
    }
  }

  void check_unknown() const {
    for (const auto& [k, v] : doc_)
      if (!used_.count(k)) throw ConfigError(v.where() + ": unknown key " + k);
  }

 private:
  [[noreturn]] static void mismatch(const std::string& key, const Value& v, const std::string& want) {
    throw ConfigError(v.where() + ": " + key + " expects " + want + ", got " + type_name(v));
  }

  static double as_real(const std::string& key, const Value& v) {
    if (const auto* d = std::get_if<double>(&v.data)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
    mismatch(key, v, "number");
  }

  static std::uint64_t as_count(const std::string& key, const Value& v) {
    const auto* i = std::get_if<std::int64_t>(&v.data);
    if (!i) mismatch(key, v, "integer");
    if (*i < 0) throw ConfigError(v.where() + ": " + key + " must be >= 0");
    return static_cast<std::uint64_t>(*i);
  }

  static const Value::List& as_list(const std::string& key, const Value& v) {
    const auto* l = std::get_if<Value::List>(&v.data);
    if (!l) mismatch(key, v, "list");
    return *l;
  }

  static void assign(const std::string& key, const Value& v, double& ref) { ref = as_real(key, v); }
  static void assign(const std::string& key, const Value& v, std::size_t& ref) { ref = as_count(key, v); }
  static void assign(const std::string& key, const Value& v, bool& ref) {
    const auto* b = std::get_if<bool>(&v.data);
    if (!b) mismatch(key, v, "boolean");
    ref = *b;
  }
  static void assign(const std::string& key, const Value& v, std::string& ref) {
    const auto* s = std::get_if<std::string>(&v.data);
    if (!s) mismatch(key, v, "string");
    ref = *s;
  }
  static void assign(const std::string& key, const Value& v, std::vector<double>& ref) {
    ref.clear();
    for (const auto& item : as_list(key, v)) ref.push_back(as_real(key, item));
  }
  static void assign(const std::string& key, const Value& v, std::vector<std::uint64_t>& ref) {
    ref.clear();
    for (const auto& item : as_list(key, v)) ref.push_back(as_count(key, item));
  }

  const Document& doc_;
  std::set<std::string> used_;
};

class Dumper {
 public:
  template <typename T>
  void field(const std::string& key, const T& ref) {
    emit(key, format(ref));
  }
  void choice(const std::string& key, const Choice& c) { emit(key, quote(c.current)); }
  std::string text() const { return os_.str(); }

 private:
  void emit(const std::string& key, const std::string& value) {
    const auto dot = key.rfind('.');
    const std::string section = key.substr(0, dot);
    if (section != section_) {
      if (!section_.empty()) os_ << '\n';
      os_ << '[' << section << "]\n";
      section_ = section;
    }
    os_ << key.substr(dot + 1) << " = " << value << '\n';
  }

  static std::string format(double v) { return fmt_real(v); }
  static std::string format(std::size_t v) { return std::to_string(v); }
  static std::string format(bool v) { return v ? "true" : "false"; }
  static std::string format(const std::string& v) { return quote(v); }
  template <typename T>
  static std::string format(const std::vector<T>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format(v[i]);
    return s + "]";
  }

  std::ostringstream os_;
  std::string section_;
};

class KeyLister {
 public:
  template <typename T>
  void field(const std::string& key, const T&) {
    keys.push_back(key);
  }
  void choice(const std::string& key, const Choice&) { keys.push_back(key); }
  std::vector<std::string> keys;
};

}  // namespace

std::vector<std::string> known_keys() {
  ExperimentConfig c;
  KeyLister l;
  bind_all(c, l);
  return l.keys;
}

std::string env_name(const std::string& dotted_key) {
  std::string out = "AMENABLE_";
  for (char ch : dotted_key) out.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return out;
}

void apply_env_overrides(Document& doc, const EnvLookup& getenv) {
  for (const auto& key : known_keys()) {
    const std::string name = env_name(key);
    if (auto text = getenv(name)) doc[key] = parse_value(*text, name);
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

ExperimentConfig resolve(const Document& doc) {
  ExperimentConfig c;
  Loader loader(doc);
  bind_all(c, loader);
  loader.check_unknown();
  c.data.min_train = 8 * c.trainer.batch_size;
  return c;
}

std::string to_text(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  Dumper d;
  bind_all(copy, d);
  return d.text();
}

void ExperimentConfig::validate() const {
  if (data.artefact_kind_weights.size() != 4)
    throw ConfigError("data.artefact_kind_weights needs 4 entries (noise, stripe, blur, channel_misalign)");
  data.validate();
  trainer.validate(data.train);
  if (evaluation.ks.empty()) throw ConfigError("evaluation.ks must not be empty");
  for (std::size_t i = 0; i < evaluation.ks.size(); ++i) {
    const double k = evaluation.ks[i];
    if (!(k >= 0.0 && k < 1.0)) throw ConfigError("evaluation.ks entries must lie in [0,1)");
    if (i > 0 && !(k > evaluation.ks[i - 1])) throw ConfigError("evaluation.ks must be strictly increasing");
  }
  for (double k : {evaluation.kappa_k, evaluation.quadrant_k})
    if (!(k > 0.0 && k < 1.0)) throw ConfigError("evaluation.kappa_k and evaluation.quadrant_k must lie in (0,1)");
  if (study.seeds.empty()) throw ConfigError("study.seeds must not be empty");
  for (double phi : study.phis)
    if (!(phi >= 0.0 && phi <= 1.0)) throw ConfigError("study.phis entries must lie in [0,1]");
  for (double s : study.s_rejs)
    if (!(s >= 0.0 && s < 1.0)) throw ConfigError("study.s_rejs entries must lie in [0,1)");
  if (study.jobs == 0) throw ConfigError("study.jobs must be >= 1");
  if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

ExperimentConfig load_config(const std::optional<fs::path>& path, const EnvLookup& getenv) {
  Document doc = path ? parse_document_file(*path) : Document{};
  apply_env_overrides(doc, getenv);
  ExperimentConfig c = resolve(doc);
  c.validate();
  return c;
}

}  // namespace amenable::experiment
