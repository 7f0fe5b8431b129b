#include "nqsite/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nqsite {
namespace {

std::string trim(const std::string& s) {
  const auto* ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream os;
  os << origin;
  if (line > 0) os << ":" << line;
  os << ": " << msg;
  throw std::runtime_error(os.str());
}

double parse_double(const std::string& v, const std::string& origin, int line,
                    const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(origin, line, "invalid number for " + key + ": '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& v, const std::string& origin, int line,
                       const std::string& key) {
  std::int64_t x = 0;
  // Accept scientific-notation integers such as 1e5 for the sample counts.
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec == std::errc() && p == v.data() + v.size()) return x;
  const double d = parse_double(v, origin, line, key);
  const auto rounded = static_cast<std::int64_t>(d);
  if (static_cast<double>(rounded) != d)
    fail(origin, line, "expected integer for " + key + ": '" + v + "'");
  return rounded;
}

bool parse_bool(const std::string& v, const std::string& origin, int line,
                const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(origin, line, "expected boolean for " + key + ": '" + v + "'");
}

// One entry per recognized key; both config formats funnel through this
// table so they accept exactly the same schema.
using Setter = std::function<void(RunConfig&, const std::string& value,
                                  const std::string& origin, int line)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"lattice.d_lat",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.d_lat = static_cast<int>(parse_int(v, o, l, "lattice.d_lat"));
       }},
      {"lattice.j1",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.j1 = parse_double(v, o, l, "lattice.j1");
       }},
      {"lattice.j2_over_j1",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.j2_over_j1 = parse_double(v, o, l, "lattice.j2_over_j1");
       }},
      {"model.d_p",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.d_p = static_cast<int>(parse_int(v, o, l, "model.d_p"));
       }},
      {"model.d_enc",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.d_enc = static_cast<int>(parse_int(v, o, l, "model.d_enc"));
       }},
      {"model.width",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.width = static_cast<int>(parse_int(v, o, l, "model.width"));
       }},
      {"model.depth",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.depth = static_cast<int>(parse_int(v, o, l, "model.depth"));
       }},
      {"model.a_sat",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.a_sat = parse_double(v, o, l, "model.a_sat");
       }},
      {"model.activation",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         try {
           c.activation = activation_from_string(v);
         } catch (const std::exception& e) {
           fail(o, l, e.what());
         }
       }},
      {"sampler.n_walkers",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.n_walkers = static_cast<int>(parse_int(v, o, l, "sampler.n_walkers"));
       }},
      {"sampler.n_skip",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.n_skip = static_cast<int>(parse_int(v, o, l, "sampler.n_skip"));
       }},
      {"sampler.n_warmup",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         if (v == "auto") {
           c.n_warmup = -1;
         } else {
           c.n_warmup = parse_int(v, o, l, "sampler.n_warmup");
         }
       }},
      {"train.total_steps",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.total_steps = static_cast<std::uint64_t>(parse_int(v, o, l, "train.total_steps"));
       }},
      {"train.alpha0",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.alpha0 = parse_double(v, o, l, "train.alpha0");
       }},
      {"train.alpha_f",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.alpha_f = parse_double(v, o, l, "train.alpha_f");
       }},
      {"train.beta1",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.beta1 = parse_double(v, o, l, "train.beta1");
       }},
      {"train.beta2",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.beta2 = parse_double(v, o, l, "train.beta2");
       }},
      {"train.adam_eps",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.adam_eps = parse_double(v, o, l, "train.adam_eps");
       }},
      {"train.n_energy_samples",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.n_energy_samples =
             static_cast<std::uint64_t>(parse_int(v, o, l, "train.n_energy_samples"));
       }},
      {"train.n_final_samples",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.n_final_samples =
             static_cast<std::uint64_t>(parse_int(v, o, l, "train.n_final_samples"));
       }},
      {"train.ema_decay",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.ema_decay = parse_double(v, o, l, "train.ema_decay");
       }},
      {"train.loss",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         if (v == "ite") {
           c.loss = LossKind::ite;
         } else if (v == "e_loss") {
           c.loss = LossKind::e_loss;
         } else {
           fail(o, l, "train.loss must be 'ite' or 'e_loss', got '" + v + "'");
         }
       }},
      {"train.e3_mode",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         if (v == "approximate") {
           c.e3_mode = E3Mode::approximate;
         } else if (v == "exact") {
           c.e3_mode = E3Mode::exact;
         } else {
           fail(o, l, "train.e3_mode must be 'approximate' or 'exact', got '" + v + "'");
         }
       }},
      {"train.max_steps_per_epoch",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.max_steps_per_epoch =
             static_cast<std::uint64_t>(parse_int(v, o, l, "train.max_steps_per_epoch"));
       }},
      {"train.degeneracy_tol",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.degeneracy_tol = parse_double(v, o, l, "train.degeneracy_tol");
       }},
      {"train.blocked_se",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.blocked_se = parse_bool(v, o, l, "train.blocked_se");
       }},
      {"train.checkpoint_every",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.checkpoint_every =
             static_cast<std::uint64_t>(parse_int(v, o, l, "train.checkpoint_every"));
       }},
      {"run.mode",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         if (v == "mcmc") {
           c.mode = RunMode::mcmc;
         } else if (v == "exact") {
           c.mode = RunMode::exact_sum;
         } else {
           fail(o, l, "run.mode must be 'mcmc' or 'exact', got '" + v + "'");
         }
       }},
      {"run.seed",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         c.seed = static_cast<std::uint64_t>(parse_int(v, o, l, "run.seed"));
       }},
      {"run.ed_reference",
       [](RunConfig& c, const std::string& v, const std::string& o, int l) {
         if (v != "auto" && v != "on" && v != "off")
           fail(o, l, "run.ed_reference must be 'auto', 'on', or 'off', got '" + v + "'");
         c.ed_reference = v;
       }},
  };
  return table;
}

void apply_key(RunConfig& cfg, const std::string& full_key, const std::string& value,
               const std::string& origin, int line) {
  const auto it = setters().find(full_key);
  if (it == setters().end()) fail(origin, line, "unknown key '" + full_key + "'");
  it->second(cfg, value, origin, line);
}

RunConfig parse_sectioned(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "malformed section header '" + raw + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(origin, line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, line_no, "expected 'key = value', got '" + raw + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");
    if (value.empty()) fail(origin, line_no, "empty value for '" + key + "'");
    // A dotted key is already fully qualified (the canonical dump uses this
    // form), otherwise the enclosing [section] supplies the prefix.
    if (key.find('.') != std::string::npos) {
      apply_key(cfg, key, value, origin, line_no);
      continue;
    }
    if (section.empty()) fail(origin, line_no, "key '" + key + "' outside any [section]");
    apply_key(cfg, section + "." + key, value, origin, line_no);
  }
  return cfg;
}

std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw std::runtime_error("expected scalar, got " + v.dump());
}

RunConfig parse_json(const std::string& text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(origin, 0, std::string("JSON parse error: ") + e.what());
  }
  if (!doc.is_object()) fail(origin, 0, "top-level JSON value must be an object");
  RunConfig cfg;
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object())
      fail(origin, 0, "section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      std::string scalar;
      try {
        scalar = json_scalar_to_string(value);
      } catch (const std::exception& e) {
        fail(origin, 0, "key '" + section + "." + key + "': " + e.what());
      }
      apply_key(cfg, section + "." + key, scalar, origin, 0);
    }
  }
  return cfg;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string to_string(RunMode m) { return m == RunMode::mcmc ? "mcmc" : "exact"; }
std::string to_string(LossKind k) { return k == LossKind::ite ? "ite" : "e_loss"; }

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  const auto first = text.find_first_not_of(" \t\r\n");
  RunConfig cfg;
  if (first != std::string::npos && text[first] == '{') {
    cfg = parse_json(text, origin);
  } else {
    cfg = parse_sectioned(text, origin);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate_config(const RunConfig& cfg) {
  validate_architecture(cfg.architecture());
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error("invalid config: " + msg);
  };
  require(cfg.j1 != 0.0, "lattice.j1 must be nonzero");
  require(cfg.n_walkers >= 1, "sampler.n_walkers must be >= 1");
  require(cfg.n_skip >= 1, "sampler.n_skip must be >= 1");
  require(cfg.alpha0 > 0 && cfg.alpha_f > 0,
          "train.alpha0 and train.alpha_f must be positive");
  require(cfg.beta1 >= 0 && cfg.beta1 < 1, "train.beta1 must lie in [0, 1)");
  require(cfg.beta2 >= 0 && cfg.beta2 < 1, "train.beta2 must lie in [0, 1)");
  require(cfg.adam_eps > 0, "train.adam_eps must be positive");
  require(cfg.n_energy_samples >= 2, "train.n_energy_samples must be >= 2");
  require(cfg.n_final_samples >= 1, "train.n_final_samples must be >= 1");
  require(cfg.ema_decay >= 0 && cfg.ema_decay < 1, "train.ema_decay must lie in [0, 1)");
  require(cfg.max_steps_per_epoch >= 1, "train.max_steps_per_epoch must be >= 1");
  require(cfg.degeneracy_tol >= 0, "train.degeneracy_tol must be >= 0");
  if (cfg.mode == RunMode::exact_sum) {
    require(cfg.d_lat * cfg.d_lat <= 32,
            "run.mode = exact requires d_lat^2 <= 32 sites");
  }
}

std::string canonical_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "lattice.d_lat = " << cfg.d_lat << "\n";
  os << "lattice.j1 = " << fmt17(cfg.j1) << "\n";
  os << "lattice.j2_over_j1 = " << fmt17(cfg.j2_over_j1) << "\n";
  os << "model.a_sat = " << fmt17(cfg.a_sat) << "\n";
  os << "model.activation = " << to_string(cfg.activation) << "\n";
  os << "model.d_enc = " << cfg.d_enc << "\n";
  os << "model.d_p = " << cfg.d_p << "\n";
  os << "model.depth = " << cfg.depth << "\n";
  os << "model.width = " << cfg.width << "\n";
  os << "run.ed_reference = " << cfg.ed_reference << "\n";
  os << "run.mode = " << to_string(cfg.mode) << "\n";
  os << "run.seed = " << cfg.seed << "\n";
  os << "sampler.n_skip = " << cfg.n_skip << "\n";
  os << "sampler.n_walkers = " << cfg.n_walkers << "\n";
  os << "sampler.n_warmup = " << cfg.resolved_warmup() << "\n";
  os << "train.adam_eps = " << fmt17(cfg.adam_eps) << "\n";
  os << "train.alpha0 = " << fmt17(cfg.alpha0) << "\n";
  os << "train.alpha_f = " << fmt17(cfg.alpha_f) << "\n";
  os << "train.beta1 = " << fmt17(cfg.beta1) << "\n";
  os << "train.beta2 = " << fmt17(cfg.beta2) << "\n";
  os << "train.blocked_se = " << (cfg.blocked_se ? "true" : "false") << "\n";
  os << "train.checkpoint_every = " << cfg.checkpoint_every << "\n";
  os << "train.degeneracy_tol = " << fmt17(cfg.degeneracy_tol) << "\n";
  os << "train.e3_mode = "
     << (cfg.e3_mode == E3Mode::approximate ? "approximate" : "exact") << "\n";
  os << "train.ema_decay = " << fmt17(cfg.ema_decay) << "\n";
  os << "train.loss = " << to_string(cfg.loss) << "\n";
  os << "train.max_steps_per_epoch = " << cfg.max_steps_per_epoch << "\n";
  os << "train.n_energy_samples = " << cfg.n_energy_samples << "\n";
  os << "train.n_final_samples = " << cfg.n_final_samples << "\n";
  os << "train.total_steps = " << cfg.total_steps << "\n";
  return os.str();
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = canonical_config(cfg);
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nqsite
