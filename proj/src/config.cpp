#include "badam/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "badam/errors.hpp"

namespace badam {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::regress: return "regress";
    case ExperimentKind::prune: return "prune";
    case ExperimentKind::bandit: return "bandit";
    case ExperimentKind::train: return "train";
  }
  return "?";
}

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error([&] {
        std::string s;
        for (const auto& d : diagnostics) s += (s.empty() ? "" : "\n") + d;
        return s;
      }()),
      diagnostics_(std::move(diagnostics)) {}

ExperimentConfig defaults_for(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::regress:
      c.seeds = {0, 1, 2, 3, 4};
      c.network = {.hidden = {100, 100, 100, 100}, .dropout = 0.05, .init = InitScheme::fan_in};
      c.training = {.epochs = 200, .batch_size = 16, .clip_norm = 5.0};
      c.prior.sigma = 0.1;
      c.regress.task.n_train = 2000;
      c.regress.task.n_test = 2000;
      break;
    case ExperimentKind::prune:
      c.seeds = {0, 1, 2, 3, 4};
      c.network = {.hidden = {400, 400}, .dropout = 0.25, .init = InitScheme::fan_in};
      c.training = {.epochs = 20, .batch_size = 128, .clip_norm = 0.0};
      c.prior.sigma = 0.1;
      c.data.source = DataSource::idx;
      break;
    case ExperimentKind::bandit:
      c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
      c.network = {.hidden = {100, 100}, .dropout = 0.0, .init = InitScheme::uniform, .init_scale = 0.3};
      c.optimizer.eta = 0.1;
      c.optimizer.lr_schedule = LrSchedule::inverse_decay;
      c.training = {.epochs = 1, .batch_size = 512, .clip_norm = 5.0};
      c.prior.sigma = 0.2;
      break;
    case ExperimentKind::train:
      c.network = {.hidden = {100, 100}, .dropout = 0.0, .init = InitScheme::fan_in};
      c.training = {.epochs = 50, .batch_size = 32, .clip_norm = 5.0};
      c.prior.sigma = 0.1;
      break;
  }
  return c;
}

namespace {

// ---------------------------------------------------------------------------
// Scalar parsing. Each parser throws std::invalid_argument with a message
// describing what was expected.

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a finite real number, got '" + s + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

template <class E>
E parse_enum(const std::string& s, const std::vector<std::pair<const char*, E>>& table) {
  std::string allowed;
  for (const auto& [name, value] : table) {
    if (s == name) return value;
    allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  }
  throw std::invalid_argument("expected one of {" + allowed + "}, got '" + s + "'");
}

template <class E>
std::string enum_name(E v, const std::vector<std::pair<const char*, E>>& table) {
  for (const auto& [name, value] : table)
    if (value == v) return name;
  return "?";
}

const std::vector<std::pair<const char*, ExperimentKind>> kKinds{{"regress", ExperimentKind::regress},
                                                                {"prune", ExperimentKind::prune},
                                                                {"bandit", ExperimentKind::bandit},
                                                                {"train", ExperimentKind::train}};
const std::vector<std::pair<const char*, InitScheme>> kInits{{"uniform", InitScheme::uniform},
                                                             {"fan_in", InitScheme::fan_in}};
const std::vector<std::pair<const char*, Method>> kMethods{
    {"ogd", Method::ogd}, {"adagrad", Method::adagrad}, {"adam", Method::adam}};
const std::vector<std::pair<const char*, LrSchedule>> kSchedules{{"constant", LrSchedule::constant},
                                                                 {"inverse_decay", LrSchedule::inverse_decay}};
const std::vector<std::pair<const char*, EffectiveN::Mode>> kNModes{{"fixed", EffectiveN::Mode::fixed},
                                                                    {"t_times_batch", EffectiveN::Mode::t_times_batch}};
const std::vector<std::pair<const char*, DataSource>> kSources{
    {"regress", DataSource::regress}, {"idx", DataSource::idx}, {"csv", DataSource::csv}};
const std::vector<std::pair<const char*, EnvKind>> kEnvs{{"wheel", EnvKind::wheel},
                                                         {"csv_dataset", EnvKind::csv_dataset}};

// ---------------------------------------------------------------------------
// Field registry: one entry per key, owning both directions of conversion.

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, const fs::path& base)> set;
  std::function<ordered_json(const ExperimentConfig&)> get;

  std::string name() const { return section + "." + key; }
};

Field real(std::string sec, std::string key, std::function<double&(ExperimentConfig&)> m) {
  return {sec, key, [m](ExperimentConfig& c, const std::string& v, const fs::path&) { m(c) = parse_double(v); },
          [m](const ExperimentConfig& c) { return ordered_json(m(const_cast<ExperimentConfig&>(c))); }};
}

template <class U>
Field count(std::string sec, std::string key, std::function<U&(ExperimentConfig&)> m) {
  return {sec, key,
          [m](ExperimentConfig& c, const std::string& v, const fs::path&) { m(c) = static_cast<U>(parse_uint(v)); },
          [m](const ExperimentConfig& c) { return ordered_json(m(const_cast<ExperimentConfig&>(c))); }};
}

Field flag(std::string sec, std::string key, std::function<bool&(ExperimentConfig&)> m) {
  return {sec, key, [m](ExperimentConfig& c, const std::string& v, const fs::path&) { m(c) = parse_bool(v); },
          [m](const ExperimentConfig& c) { return ordered_json(m(const_cast<ExperimentConfig&>(c))); }};
}

Field text(std::string sec, std::string key, std::function<std::string&(ExperimentConfig&)> m) {
  return {sec, key, [m](ExperimentConfig& c, const std::string& v, const fs::path&) { m(c) = v; },
          [m](const ExperimentConfig& c) { return ordered_json(m(const_cast<ExperimentConfig&>(c))); }};
}

/// Input paths are anchored at the config file's directory and stored
/// absolute, so the resolved JSON runs from anywhere.
Field input_path(std::string sec, std::string key, std::function<fs::path&(ExperimentConfig&)> m) {
  return {sec, key,
          [m](ExperimentConfig& c, const std::string& v, const fs::path& base) {
            if (v.empty()) {
              m(c).clear();
              return;
            }
            const fs::path p(v);
            m(c) = fs::weakly_canonical(p.is_absolute() ? p : base / p);
          },
          [m](const ExperimentConfig& c) { return ordered_json(m(const_cast<ExperimentConfig&>(c)).string()); }};
}

template <class E>
Field choice(std::string sec, std::string key, std::function<E&(ExperimentConfig&)> m,
             const std::vector<std::pair<const char*, E>>& table) {
  return {sec, key,
          [m, &table](ExperimentConfig& c, const std::string& v, const fs::path&) { m(c) = parse_enum(v, table); },
          [m, &table](const ExperimentConfig& c) {
            return ordered_json(enum_name(m(const_cast<ExperimentConfig&>(c)), table));
          }};
}

template <class T, class Parse, class Show>
Field list(std::string sec, std::string key, std::function<std::vector<T>&(ExperimentConfig&)> m, Parse parse,
           Show show) {
  return {sec, key,
          [m, parse](ExperimentConfig& c, const std::string& v, const fs::path&) {
            std::vector<T> out;
            for (const auto& item : split_list(v)) out.push_back(parse(item));
            m(c) = std::move(out);
          },
          [m, show](const ExperimentConfig& c) {
            ordered_json arr = ordered_json::array();
            for (const auto& x : m(const_cast<ExperimentConfig&>(c))) arr.push_back(show(x));
            return arr;
          }};
}

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = [] {
    using C = ExperimentConfig;
    auto as_size = [](const std::string& s) { return static_cast<std::size_t>(parse_uint(s)); };
    auto ident = [](const auto& x) { return x; };
    std::vector<Field> f;
    // experiment
    f.push_back(choice<ExperimentKind>("experiment", "kind", [](C& c) -> auto& { return c.kind; }, kKinds));
    f.push_back(count<std::uint64_t>("experiment", "master_seed", [](C& c) -> auto& { return c.master_seed; }));
    f.push_back(list<std::uint64_t>("experiment", "seeds", [](C& c) -> auto& { return c.seeds; }, parse_uint, ident));
    f.push_back({"experiment", "output_dir",
                 [](C& c, const std::string& v, const fs::path&) { c.output_dir = v; },
                 [](const C& c) { return ordered_json(c.output_dir.string()); }});
    f.push_back(count<std::size_t>("experiment", "workers", [](C& c) -> auto& { return c.workers; }));
    // network
    f.push_back(list<std::size_t>("network", "hidden", [](C& c) -> auto& { return c.network.hidden; }, as_size, ident));
    f.push_back(real("network", "dropout", [](C& c) -> auto& { return c.network.dropout; }));
    f.push_back(choice<InitScheme>("network", "init", [](C& c) -> auto& { return c.network.init; }, kInits));
    f.push_back(real("network", "init_scale", [](C& c) -> auto& { return c.network.init_scale; }));
    // optimizer
    f.push_back(choice<Method>("optimizer", "method", [](C& c) -> auto& { return c.optimizer.method; }, kMethods));
    f.push_back(real("optimizer", "eta", [](C& c) -> auto& { return c.optimizer.eta; }));
    f.push_back(real("optimizer", "beta1", [](C& c) -> auto& { return c.optimizer.beta1; }));
    f.push_back(real("optimizer", "beta2", [](C& c) -> auto& { return c.optimizer.beta2; }));
    f.push_back(real("optimizer", "epsilon", [](C& c) -> auto& { return c.optimizer.epsilon; }));
    f.push_back(flag("optimizer", "bias_correct_lr", [](C& c) -> auto& { return c.optimizer.bias_correct_lr; }));
    f.push_back(
        choice<LrSchedule>("optimizer", "lr_schedule", [](C& c) -> auto& { return c.optimizer.lr_schedule; }, kSchedules));
    // training
    f.push_back(count<std::size_t>("training", "epochs", [](C& c) -> auto& { return c.training.epochs; }));
    f.push_back(count<std::size_t>("training", "batch_size", [](C& c) -> auto& { return c.training.batch_size; }));
    f.push_back(real("training", "clip_norm", [](C& c) -> auto& { return c.training.clip_norm; }));
    // prior
    f.push_back(real("prior", "sigma", [](C& c) -> auto& { return c.prior.sigma; }));
    f.push_back(flag("prior", "improper", [](C& c) -> auto& { return c.prior.improper; }));
    // effective_n
    f.push_back(choice<EffectiveN::Mode>("effective_n", "mode", [](C& c) -> auto& { return c.effective_n.mode; }, kNModes));
    f.push_back(real("effective_n", "value", [](C& c) -> auto& { return c.effective_n.fixed_value; }));
    // data
    f.push_back(choice<DataSource>("data", "source", [](C& c) -> auto& { return c.data.source; }, kSources));
    f.push_back(input_path("data", "train_images", [](C& c) -> auto& { return c.data.train_images; }));
    f.push_back(input_path("data", "train_labels", [](C& c) -> auto& { return c.data.train_labels; }));
    f.push_back(input_path("data", "test_images", [](C& c) -> auto& { return c.data.test_images; }));
    f.push_back(input_path("data", "test_labels", [](C& c) -> auto& { return c.data.test_labels; }));
    f.push_back(count<std::size_t>("data", "train_subset", [](C& c) -> auto& { return c.data.train_subset; }));
    f.push_back(count<std::size_t>("data", "test_subset", [](C& c) -> auto& { return c.data.test_subset; }));
    f.push_back(input_path("data", "csv_path", [](C& c) -> auto& { return c.data.csv_path; }));
    f.push_back(text("data", "csv_label", [](C& c) -> auto& { return c.data.csv_label; }));
    f.push_back(list<std::string>(
        "data", "csv_categorical", [](C& c) -> auto& { return c.data.csv_categorical; }, ident, ident));
    f.push_back(count<std::size_t>("data", "csv_subsample", [](C& c) -> auto& { return c.data.csv_subsample; }));
    // regress
    f.push_back(count<std::size_t>("regress", "n_train", [](C& c) -> auto& { return c.regress.task.n_train; }));
    f.push_back(count<std::size_t>("regress", "n_test", [](C& c) -> auto& { return c.regress.task.n_test; }));
    f.push_back(real("regress", "train_lo", [](C& c) -> auto& { return c.regress.task.train_lo; }));
    f.push_back(real("regress", "train_hi", [](C& c) -> auto& { return c.regress.task.train_hi; }));
    f.push_back(real("regress", "test_lo", [](C& c) -> auto& { return c.regress.task.test_lo; }));
    f.push_back(real("regress", "test_hi", [](C& c) -> auto& { return c.regress.task.test_hi; }));
    f.push_back(real("regress", "noise_std", [](C& c) -> auto& { return c.regress.task.noise_std; }));
    f.push_back(
        count<std::size_t>("regress", "predictive_samples", [](C& c) -> auto& { return c.regress.predictive_samples; }));
    f.push_back(real("regress", "obs_noise", [](C& c) -> auto& { return c.regress.obs_noise; }));
    // prune
    f.push_back(list<double>(
        "prune", "fractions", [](C& c) -> auto& { return c.prune.fractions; }, parse_double, ident));
    f.push_back(list<PruneCriterion>(
        "prune", "criteria", [](C& c) -> auto& { return c.prune.criteria; },
        [](const std::string& s) {
          try {
            return prune_criterion_from_string(s);
          } catch (const ContractError&) {
            throw std::invalid_argument("expected snr or magnitude_const_var, got '" + s + "'");
          }
        },
        [](PruneCriterion p) { return to_string(p); }));
    f.push_back(count<std::size_t>("prune", "phase2_epochs", [](C& c) -> auto& { return c.prune.phase2_epochs; }));
    f.push_back(real("prune", "phase2_beta2", [](C& c) -> auto& { return c.prune.phase2_beta2; }));
    f.push_back(
        flag("prune", "phase2_bias_correct_lr", [](C& c) -> auto& { return c.prune.phase2_bias_correct_lr; }));
    // bandit
    f.push_back(choice<EnvKind>("bandit", "env", [](C& c) -> auto& { return c.bandit.env; }, kEnvs));
    f.push_back(real("bandit", "delta", [](C& c) -> auto& { return c.bandit.wheel.delta; }));
    f.push_back(real("bandit", "mu_inner", [](C& c) -> auto& { return c.bandit.wheel.mu_inner; }));
    f.push_back(real("bandit", "mu_low", [](C& c) -> auto& { return c.bandit.wheel.mu_low; }));
    f.push_back(real("bandit", "mu_high", [](C& c) -> auto& { return c.bandit.wheel.mu_high; }));
    f.push_back(real("bandit", "reward_std", [](C& c) -> auto& { return c.bandit.wheel.reward_std; }));
    f.push_back(count<std::size_t>("bandit", "horizon", [](C& c) -> auto& { return c.bandit.horizon; }));
    f.push_back(list<AgentKind>(
        "bandit", "agents", [](C& c) -> auto& { return c.bandit.agents; },
        [](const std::string& s) {
          try {
            return agent_kind_from_string(s);
          } catch (const ContractError&) {
            throw std::invalid_argument("expected one of {badam_thompson, mc_dropout, greedy, uniform}, got '" + s +
                                        "'");
          }
        },
        [](AgentKind k) { return to_string(k); }));
    f.push_back(count<std::size_t>("bandit", "warmup_pulls", [](C& c) -> auto& { return c.bandit.warmup_pulls; }));
    f.push_back(count<std::size_t>("bandit", "train_every", [](C& c) -> auto& { return c.bandit.train_every; }));
    f.push_back(count<std::size_t>("bandit", "train_steps", [](C& c) -> auto& { return c.bandit.train_steps; }));
    f.push_back(real("bandit", "greedy_beta1", [](C& c) -> auto& { return c.bandit.greedy_beta1; }));
    f.push_back(real("bandit", "mc_dropout_rate", [](C& c) -> auto& { return c.bandit.mc_dropout_rate; }));
    return f;
  }();
  return fields;
}

struct Assignment {
  std::string key;  // as written; may be unqualified for overrides
  std::string value;
  std::string origin;
  fs::path base;
  bool allow_unqualified = false;
};

std::string json_scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v.get<double>());
    return {buf, res.ptr};
  }
  throw std::invalid_argument("unsupported JSON value " + v.dump());
}

void collect_json(const std::string& text, const fs::path& base, const std::string& origin,
                  std::vector<Assignment>& out, std::vector<std::string>& diags) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    diags.push_back(origin + ": invalid JSON: " + e.what());
    return;
  }
  if (!doc.is_object()) {
    diags.push_back(origin + ": top level must be an object of sections");
    return;
  }
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) {
      diags.push_back(origin + ": section '" + section + "' must be an object");
      continue;
    }
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      try {
        std::string s;
        if (value.is_array()) {
          for (const auto& item : value) s += (s.empty() ? "" : ",") + json_scalar_text(item);
        } else {
          s = json_scalar_text(value);
        }
        out.push_back({name, s, origin, base, false});
      } catch (const std::invalid_argument& e) {
        diags.push_back(origin + ": " + name + ": " + e.what());
      }
    }
  }
}

void collect_text(const std::string& text, const fs::path& base, const std::string& origin,
                  std::vector<Assignment>& out, std::vector<std::string>& diags) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::map<std::string, std::size_t> seen;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string where = origin + ":" + std::to_string(lineno);
    // Comments: whole-line '#' or ';', or ' #' after a value.
    if (const auto hash = line.find(" #"); hash != std::string::npos) line.erase(hash);
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        diags.push_back(where + ": malformed section header '" + s + "'");
        continue;
      }
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      diags.push_back(where + ": expected 'key = value', got '" + s + "'");
      continue;
    }
    if (section.empty()) {
      diags.push_back(where + ": key outside of any [section]");
      continue;
    }
    const std::string name = section + "." + trim(std::string_view(s).substr(0, eq));
    std::string value = trim(std::string_view(s).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (auto it = seen.find(name); it != seen.end()) {
      diags.push_back(where + ": " + name + " already set on line " + std::to_string(it->second));
      continue;
    }
    seen[name] = lineno;
    out.push_back({name, value, where, base, false});
  }
}

/// Maps an assignment key to a registry entry, or explains why it can't.
const Field* lookup(const Assignment& a, std::string& error) {
  const auto& fields = registry();
  for (const auto& f : fields)
    if (f.name() == a.key) return &f;
  if (a.allow_unqualified && a.key.find('.') == std::string::npos) {
    std::vector<const Field*> hits;
    for (const auto& f : fields)
      if (f.key == a.key) hits.push_back(&f);
    if (hits.size() == 1) return hits.front();
    if (hits.size() > 1) {
      error = "ambiguous key '" + a.key + "' (could be";
      for (const auto* h : hits) error += " " + h->name();
      error += ")";
      return nullptr;
    }
  }
  error = "unknown key '" + a.key + "'";
  return nullptr;
}

ExperimentConfig resolve(const std::vector<Assignment>& assignments, std::vector<std::string> diags) {
  // The experiment kind picks the defaults, so find its final value first.
  std::optional<ExperimentKind> kind;
  std::vector<std::pair<const Field*, const Assignment*>> resolved;
  for (const auto& a : assignments) {
    std::string error;
    const Field* f = lookup(a, error);
    if (!f) {
      diags.push_back(a.origin + ": " + error);
      continue;
    }
    resolved.emplace_back(f, &a);
    if (f->name() == "experiment.kind") {
      try {
        kind = parse_enum(a.value, kKinds);
      } catch (const std::invalid_argument& e) {
        diags.push_back(a.origin + ": experiment.kind: " + e.what());
      }
    }
  }
  if (!kind) {
    if (diags.empty()) diags.push_back("experiment.kind: required (one of regress, prune, bandit, train)");
    throw ConfigError(std::move(diags));
  }

  ExperimentConfig cfg = defaults_for(*kind);
  for (const auto& [f, a] : resolved) {
    try {
      f->set(cfg, a->value, a->base);
    } catch (const std::invalid_argument& e) {
      diags.push_back(a->origin + ": " + f->name() + ": " + e.what());
    }
  }
  for (auto& p : validate(cfg)) diags.push_back(std::move(p));
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return cfg;
}

bool looks_like_json(const std::string& text) {
  const auto b = text.find_first_not_of(" \t\r\n");
  return b != std::string::npos && text[b] == '{';
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir,
                              const std::vector<std::string>& overrides, const std::string& origin) {
  std::vector<Assignment> assignments;
  std::vector<std::string> diags;
  if (looks_like_json(text))
    collect_json(text, base_dir, origin, assignments, diags);
  else
    collect_text(text, base_dir, origin, assignments, diags);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      diags.push_back("--override " + o + ": expected key=value");
      continue;
    }
    // Override paths are relative to the working directory.
    assignments.push_back({trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "--override " + o, fs::current_path(), true});
  }
  return resolve(assignments, std::move(diags));
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot open config file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  const fs::path base = fs::absolute(path).parent_path();
  return parse_config(ss.str(), base, overrides, path.string());
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> d;
  auto check = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) d.push_back(field + ": " + msg);
  };
  // The module validators already name the offending field.
  auto contract = [&](auto&& fn) {
    try {
      fn();
    } catch (const ContractError& e) {
      d.push_back(e.what());
    }
  };
  auto readable = [&](const fs::path& p, const std::string& field) {
    if (p.empty())
      d.push_back(field + ": required for this experiment");
    else if (!fs::is_regular_file(p))
      d.push_back(field + ": file not found: " + p.string());
  };

  check(!c.seeds.empty(), "experiment.seeds", "must list at least one seed");
  check(c.workers >= 1, "experiment.workers", "must be at least 1");
  check(!c.output_dir.empty(), "experiment.output_dir", "must be nonempty");

  check(!c.network.hidden.empty(), "network.hidden", "must list at least one layer width");
  for (auto h : c.network.hidden) check(h > 0, "network.hidden", "layer widths must be positive");
  check(c.network.dropout >= 0.0 && c.network.dropout < 1.0, "network.dropout", "must lie in [0, 1)");
  if (c.network.init == InitScheme::uniform)
    check(c.network.init_scale > 0.0, "network.init_scale", "must be positive for uniform init");

  contract([&] { c.optimizer.validate(); });
  check(c.training.epochs >= 1, "training.epochs", "must be at least 1");
  check(c.training.batch_size >= 1, "training.batch_size", "must be at least 1");
  check(c.training.clip_norm >= 0.0, "training.clip_norm", "must be >= 0 (0 disables clipping)");
  contract([&] { c.prior.validate(); });
  if (c.effective_n.mode == EffectiveN::Mode::fixed)
    check(c.effective_n.fixed_value > 0.0, "effective_n.value", "must be positive");

  switch (c.kind) {
    case ExperimentKind::regress:
      contract([&] { c.regress.task.validate(); });
      check(c.regress.predictive_samples >= 2, "regress.predictive_samples", "must be at least 2");
      check(c.regress.obs_noise >= 0.0, "regress.obs_noise", "must be >= 0");
      break;
    case ExperimentKind::prune: {
      check(c.data.source == DataSource::idx, "data.source", "prune needs idx data");
      readable(c.data.train_images, "data.train_images");
      readable(c.data.train_labels, "data.train_labels");
      readable(c.data.test_images, "data.test_images");
      readable(c.data.test_labels, "data.test_labels");
      PruneSpec spec{c.prune.fractions, c.prune.criteria, c.seeds};
      contract([&] { spec.validate(); });
      check(c.prune.phase2_epochs >= 1, "prune.phase2_epochs", "must be at least 1");
      check(c.prune.phase2_beta2 >= 0.0 && c.prune.phase2_beta2 < 1.0, "prune.phase2_beta2", "must lie in [0, 1)");
      break;
    }
    case ExperimentKind::bandit:
      check(!c.bandit.agents.empty(), "bandit.agents", "must list at least one agent");
      check(c.bandit.train_every >= 1, "bandit.train_every", "must be at least 1");
      check(c.bandit.train_steps >= 1, "bandit.train_steps", "must be at least 1");
      check(c.bandit.greedy_beta1 >= 0.0 && c.bandit.greedy_beta1 < 1.0, "bandit.greedy_beta1", "must lie in [0, 1)");
      check(c.bandit.mc_dropout_rate >= 0.0 && c.bandit.mc_dropout_rate < 1.0, "bandit.mc_dropout_rate",
            "must lie in [0, 1)");
      check(!c.prior.improper, "prior.improper", "bandit agents need a proper prior");
      if (c.bandit.env == EnvKind::wheel) {
        contract([&] { c.bandit.wheel.validate(); });
        check(c.bandit.horizon >= c.bandit.warmup_pulls * kWheelArms, "bandit.horizon",
              "must cover the warmup rounds (warmup_pulls x arms)");
      } else {
        readable(c.data.csv_path, "data.csv_path");
        check(!c.data.csv_label.empty(), "data.csv_label", "required for the csv_dataset environment");
        check(c.bandit.horizon >= 1, "bandit.horizon", "must be positive");
      }
      break;
    case ExperimentKind::train:
      if (c.data.source == DataSource::regress) {
        contract([&] { c.regress.task.validate(); });
      } else if (c.data.source == DataSource::idx) {
        readable(c.data.train_images, "data.train_images");
        readable(c.data.train_labels, "data.train_labels");
      } else {
        readable(c.data.csv_path, "data.csv_path");
        check(!c.data.csv_label.empty(), "data.csv_label", "required for csv data");
      }
      break;
  }
  return d;
}

ordered_json to_json(const ExperimentConfig& cfg) {
  ordered_json doc = ordered_json::object();
  for (const auto& f : registry()) doc[f.section][f.key] = f.get(cfg);
  return doc;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : registry()) keys.push_back(f.name());
  return keys;
}

std::vector<std::size_t> network_layers(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t output_dim) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.network.hidden.begin(), cfg.network.hidden.end());
  sizes.push_back(output_dim);
  return sizes;
}

BanditConfig bandit_config(const ExperimentConfig& c) {
  BanditConfig b;
  b.env = c.bandit.env;
  b.wheel = c.bandit.wheel;
  b.horizon = c.bandit.horizon;
  b.agents = c.bandit.agents;
  b.loop = {.warmup_pulls = c.bandit.warmup_pulls, .train_every = c.bandit.train_every};
  b.neural.hidden = c.network.hidden;
  b.neural.init = c.network.init;
  b.neural.init_scale = c.network.init_scale;
  b.neural.optimizer = c.optimizer;
  b.neural.clip_norm = c.training.clip_norm;
  b.neural.train_steps = c.bandit.train_steps;
  b.neural.batch_size = c.training.batch_size;
  b.neural.dropout = c.network.dropout;
  b.neural.prior = c.prior;
  b.neural.effective_n = c.effective_n;
  b.greedy_beta1 = c.bandit.greedy_beta1;
  b.mc_dropout_rate = c.bandit.mc_dropout_rate;
  return b;
}

DualPhaseConfig dual_phase_config(const ExperimentConfig& c) {
  DualPhaseConfig d;
  d.phase1_train = c.training;
  d.phase1_opt = c.optimizer;
  d.phase2_train = c.training;
  d.phase2_train.epochs = c.prune.phase2_epochs;
  d.phase2_opt = c.optimizer;
  d.phase2_opt.beta2 = c.prune.phase2_beta2;
  d.phase2_opt.bias_correct_lr = c.prune.phase2_bias_correct_lr;
  return d;
}

}  // namespace badam
