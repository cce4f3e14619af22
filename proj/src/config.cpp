#include "unit/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

namespace unit::config {

namespace {

using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using Value = std::variant<Scalar, std::vector<Scalar>>;

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a])) != 0) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])) != 0) --b;
  return std::string(s.substr(a, b - a));
}

// Position of a '#' comment start outside double quotes, or npos.
std::size_t comment_start(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return i;
    }
  }
  return std::string_view::npos;
}

Scalar parse_scalar(const std::string& text) {
  if (text.empty()) throw ConfigError("empty value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') throw ConfigError("unterminated string " + text);
    std::string out;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      char c = text[i];
      if (c == '\\' && i + 2 < text.size()) {
        const char e = text[++i];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: throw ConfigError(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    return out;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  std::string digits;
  for (char c : text) {
    if (c != '_') digits.push_back(c);
  }
  std::int64_t i = 0;
  auto [ip, iec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
  if (iec == std::errc() && ip == digits.data() + digits.size()) return i;
  const char* begin = digits.data();
  if (!digits.empty() && digits.front() == '+') ++begin;
  double d = 0.0;
  auto [dp, dec] = std::from_chars(begin, digits.data() + digits.size(), d);
  if (dec == std::errc() && dp == digits.data() + digits.size()) return d;
  throw ConfigError("cannot parse value " + text);
}

Value parse_value(const std::string& text) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw ConfigError("unterminated array " + text);
    std::vector<Scalar> items;
    const std::string inner = trim(std::string_view(text).substr(1, text.size() - 2));
    if (inner.empty()) return items;
    std::string current;
    bool in_string = false;
    for (char c : inner) {
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        items.push_back(parse_scalar(trim(current)));
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    if (!trim(current).empty()) items.push_back(parse_scalar(trim(current)));
    return items;
  }
  return parse_scalar(text);
}

const Scalar& scalar_of(const Value& v, const std::string& key) {
  if (const auto* s = std::get_if<Scalar>(&v)) return *s;
  throw ConfigError(key + " expects a scalar, got an array");
}

std::string as_string(const Value& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&scalar_of(v, key))) return *s;
  throw ConfigError(key + " expects a string");
}

std::int64_t as_int(const Value& v, const std::string& key) {
  if (const auto* i = std::get_if<std::int64_t>(&scalar_of(v, key))) return *i;
  throw ConfigError(key + " expects an integer");
}

double scalar_double(const Scalar& s, const std::string& key) {
  if (const auto* d = std::get_if<double>(&s)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  throw ConfigError(key + " expects a number");
}

double as_double(const Value& v, const std::string& key) { return scalar_double(scalar_of(v, key), key); }

bool as_bool(const Value& v, const std::string& key) {
  if (const auto* b = std::get_if<bool>(&scalar_of(v, key))) return *b;
  throw ConfigError(key + " expects true or false");
}

const std::vector<Scalar>& as_array(const Value& v, const std::string& key) {
  if (const auto* a = std::get_if<std::vector<Scalar>>(&v)) return *a;
  throw ConfigError(key + " expects an array");
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // keep it a float on re-read
  return s;
}

struct Field {
  std::function<void(ExperimentConfig&, const Value&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Field string_field(Member member) {
  return {[member](ExperimentConfig& c, const Value& v, const std::string& k) { member(c) = as_string(v, k); },
          [member](const ExperimentConfig& c) { return quote(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename T, typename Member>
Field int_field(Member member) {
  return {[member](ExperimentConfig& c, const Value& v, const std::string& k) {
            const auto i = as_int(v, k);
            if constexpr (std::is_unsigned_v<T>) {
              if (i < 0) throw ConfigError(k + " must be non-negative");
            }
            member(c) = static_cast<T>(i);
          },
          [member](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Member>
Field double_field(Member member) {
  return {[member](ExperimentConfig& c, const Value& v, const std::string& k) { member(c) = as_double(v, k); },
          [member](const ExperimentConfig& c) { return fmt_double(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Member>
Field bool_field(Member member) {
  return {[member](ExperimentConfig& c, const Value& v, const std::string& k) { member(c) = as_bool(v, k); },
          [member](const ExperimentConfig& c) {
            return std::string(member(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["seed"] = int_field<std::uint64_t>([](ExperimentConfig& c) -> std::uint64_t& { return c.seed; });
    f["out"] = string_field([](ExperimentConfig& c) -> std::string& { return c.out; });

    f["dataset.format"] = string_field([](ExperimentConfig& c) -> std::string& { return c.dataset.format; });
    f["dataset.interactions"] = string_field([](ExperimentConfig& c) -> std::string& { return c.dataset.interactions; });
    f["dataset.items"] = string_field([](ExperimentConfig& c) -> std::string& { return c.dataset.items; });
    f["dataset.ratings"] = string_field([](ExperimentConfig& c) -> std::string& { return c.dataset.ratings; });
    f["dataset.movies"] = string_field([](ExperimentConfig& c) -> std::string& { return c.dataset.movies; });
    f["dataset.prepared"] = string_field([](ExperimentConfig& c) -> std::string& { return c.dataset.prepared; });
    f["dataset.min_seq_len"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.dataset.min_seq_len; });
    f["dataset.popularity_floor"] =
        double_field([](ExperimentConfig& c) -> double& { return c.dataset.popularity_floor; });

    f["encoder.kind"] = string_field([](ExperimentConfig& c) -> std::string& { return c.encoder.kind; });
    f["encoder.dim"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.encoder.dim; });
    f["encoder.seed"] = int_field<std::uint64_t>([](ExperimentConfig& c) -> std::uint64_t& { return c.encoder.seed; });
    f["encoder.cache"] = string_field([](ExperimentConfig& c) -> std::string& { return c.encoder.cache; });

    f["model.kind"] = {[](ExperimentConfig& c, const Value& v, const std::string& k) {
                         try {
                           c.model.kind = seq::parse_backbone(as_string(v, k));
                         } catch (const ConfigError&) {
                           throw;
                         } catch (const Error& e) {
                           throw ConfigError(e.what());
                         }
                       },
                       [](const ExperimentConfig& c) { return quote(seq::to_string(c.model.kind)); }};
    f["model.layer_dims"] = {[](ExperimentConfig& c, const Value& v, const std::string& k) {
                               std::vector<int> dims;
                               for (const auto& s : as_array(v, k)) {
                                 const auto* i = std::get_if<std::int64_t>(&s);
                                 if (i == nullptr) throw ConfigError(k + " expects integers");
                                 dims.push_back(static_cast<int>(*i));
                               }
                               c.layer_dims = std::move(dims);
                             },
                             [](const ExperimentConfig& c) {
                               std::string s = "[";
                               for (std::size_t i = 0; i < c.layer_dims.size(); ++i) {
                                 s += (i ? ", " : "") + std::to_string(c.layer_dims[i]);
                               }
                               return s + "]";
                             }};
    f["model.d"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.model.d; });
    f["model.max_len"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.model.max_len; });
    f["model.n_blocks"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.model.n_blocks; });
    f["model.n_heads"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.model.n_heads; });
    f["model.dropout"] = double_field([](ExperimentConfig& c) -> double& { return c.model.dropout; });
    f["model.mask_rate"] = double_field([](ExperimentConfig& c) -> double& { return c.model.mask_rate; });

    f["train.epochs"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.train.epochs; });
    f["train.batch_size"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.train.batch_size; });
    f["train.learning_rate"] = double_field([](ExperimentConfig& c) -> double& { return c.train.learning_rate; });
    f["train.negatives"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.train.negatives_per_positive; });
    f["train.eval_every"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.train.eval_every; });
    f["train.k"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.train.eval_k; });
    f["train.exclude_history"] = bool_field([](ExperimentConfig& c) -> bool& { return c.train.exclude_history; });
    f["train.eval_candidates"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.train.eval_candidates; });
    f["train.log_wall_time"] = bool_field([](ExperimentConfig& c) -> bool& { return c.train.log_wall_time; });

    f["uniformity.strategy"] = {[](ExperimentConfig& c, const Value& v, const std::string& k) {
                                  try {
                                    c.uniformity.strategy = uni::parse_strategy(as_string(v, k));
                                  } catch (const ConfigError&) {
                                    throw;
                                  } catch (const Error& e) {
                                    throw ConfigError(e.what());
                                  }
                                },
                                [](const ExperimentConfig& c) { return quote(uni::to_string(c.uniformity.strategy)); }};
    f["uniformity.t"] = double_field([](ExperimentConfig& c) -> double& { return c.uniformity.t; });
    f["uniformity.lambda"] = double_field([](ExperimentConfig& c) -> double& { return c.uniformity.lambda; });
    f["uniformity.gamma"] = double_field([](ExperimentConfig& c) -> double& { return c.uniformity.gamma; });
    f["uniformity.measure_sample"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.uniformity.measure_sample; });
    f["uniformity.measure_t"] = double_field([](ExperimentConfig& c) -> double& { return c.uniformity.measure_t; });

    f["analysis.max_pairs"] = int_field<std::size_t>([](ExperimentConfig& c) -> std::size_t& { return c.analysis.max_pairs; });
    f["analysis.pop_fraction"] = double_field([](ExperimentConfig& c) -> double& { return c.analysis.pop_fraction; });
    f["analysis.kde_grid"] = int_field<int>([](ExperimentConfig& c) -> int& { return c.analysis.kde_grid; });
    f["analysis.kde_bandwidth"] = double_field([](ExperimentConfig& c) -> double& { return c.analysis.kde_bandwidth; });

    f["sweep.gammas"] = {[](ExperimentConfig& c, const Value& v, const std::string& k) {
                           std::vector<double> g;
                           for (const auto& s : as_array(v, k)) g.push_back(scalar_double(s, k));
                           c.sweep_gammas = std::move(g);
                         },
                         [](const ExperimentConfig& c) {
                           std::string s = "[";
                           for (std::size_t i = 0; i < c.sweep_gammas.size(); ++i) {
                             s += (i ? ", " : "") + fmt_double(c.sweep_gammas[i]);
                           }
                           return s + "]";
                         }};
    return f;
  }();
  return table;
}

void assign(ExperimentConfig& config, const std::string& key, const Value& value) {
  const auto& f = fields();
  auto it = f.find(key);
  if (it == f.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(config, value, key);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(dataset.format == "jsonl" || dataset.format == "movielens", "dataset.format must be jsonl or movielens");
  check(dataset.min_seq_len >= 2, "dataset.min_seq_len must be >= 2");
  check(dataset.popularity_floor > 0.0, "dataset.popularity_floor must be > 0");
  check(encoder.kind == "hash" || encoder.kind == "external", "encoder.kind must be hash or external");
  check(encoder.kind == "external" || encoder.dim >= 8, "encoder.dim must be >= 8");
  check(encoder.kind == "hash" || !encoder.cache.empty(), "encoder.cache is required for the external encoder");
  check(!layer_dims.empty(), "model.layer_dims must not be empty");
  for (int d : layer_dims) check(d > 0, "model.layer_dims entries must be positive");
  check(layer_dims.back() == model.d, "last model.layer_dims entry must equal model.d");
  check(analysis.max_pairs > 0, "analysis.max_pairs must be positive");
  check(analysis.pop_fraction > 0.0 && analysis.pop_fraction < 1.0, "analysis.pop_fraction must be in (0, 1)");
  check(analysis.kde_grid >= 16, "analysis.kde_grid must be >= 16");
  check(analysis.kde_bandwidth > 0.0, "analysis.kde_bandwidth must be > 0");
  for (double g : sweep_gammas) check(g >= 0.0, "sweep.gammas entries must be >= 0");
  try {
    model.validate();
    train.validate();
    uniformity.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

text::TextEncoderSpec ExperimentConfig::encoder_spec() const {
  text::TextEncoderSpec spec;
  spec.kind = encoder.kind == "external" ? text::EncoderKind::external_cache : text::EncoderKind::hash_features;
  spec.output_dim = encoder.dim;
  spec.hash_seed = encoder.seed;
  spec.cache_path = encoder.cache;
  return spec;
}

ExperimentConfig parse(const std::string& text, const std::string& origin) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cut = comment_start(line);
    const std::string body = trim(cut == std::string::npos ? std::string_view(line) : std::string_view(line).substr(0, cut));
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      assign(config, section.empty() ? key : section + "." + key, parse_value(value));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return config;
}

ExperimentConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value_text) {
  assign(config, key, parse_value(trim(value_text)));
}

std::string serialize(const ExperimentConfig& config) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::vector<std::pair<std::string, std::string>> top;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      top.emplace_back(key, field.get(config));
    } else {
      sections[key.substr(0, dot)].emplace_back(key.substr(dot + 1), field.get(config));
    }
  }
  std::string out;
  for (const auto& [k, v] : top) out += k + " = " + v + "\n";
  for (const auto& [name, entries] : sections) {
    out += "\n[" + name + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  }
  return out;
}

}  // namespace unit::config
