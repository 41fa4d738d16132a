#include "nbandit/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace nbandit::cli {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Typed access to one section with "section.key" diagnostics.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string raw(const std::string& key) const { return trim(tree_->get<std::string>(key)); }

  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(field(key) + ": expected a number, got '" + v + "'");
    }
  }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    try {
      std::size_t used = 0;
      const long x = std::stol(v, &used);
      if (used != v.size() || x < -2147483647L || x > 2147483647L) throw std::invalid_argument(v);
      return static_cast<int>(x);
    } catch (const std::exception&) {
      throw ConfigError(field(key) + ": expected an integer, got '" + v + "'");
    }
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError(field(key) + ": expected on/off, got '" + v + "'");
  }

  std::vector<double> reals(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(raw(key))) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError(field(key) + ": bad list entry '" + item + "'");
      }
    }
    if (out.empty()) throw ConfigError(field(key) + ": empty list");
    return out;
  }

  void only(const std::set<std::string>& allowed) const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!child.empty()) throw ConfigError(field(key) + ": nested keys are not supported");
      if (!allowed.count(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  std::string name_;
  const pt::ptree* tree_;
};

Section section(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return Section(name, it == root.not_found() ? nullptr : &it->second);
}

AlgorithmType parse_type(const std::string& s, const std::string& where) {
  if (s == "neural_gcb") return AlgorithmType::neural_gcb;
  if (s == "neural_ucb") return AlgorithmType::neural_ucb;
  if (s == "lin_ucb") return AlgorithmType::lin_ucb;
  if (s == "random") return AlgorithmType::random;
  throw ConfigError(where + ": unknown algorithm type '" + s + "'");
}

template <class F>
void guarded(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

std::string to_string(AlgorithmType t) {
  switch (t) {
    case AlgorithmType::neural_gcb: return "neural_gcb";
    case AlgorithmType::neural_ucb: return "neural_ucb";
    case AlgorithmType::lin_ucb: return "lin_ucb";
    case AlgorithmType::random: return "random";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (horizon < 1) throw ConfigError("[experiment] horizon: must be >= 1");
  if (seeds.empty()) throw ConfigError("[experiment] seeds: must not be empty");
  if (algorithms.empty()) throw ConfigError("[experiment] algorithms: must not be empty");
  std::set<std::string> names;
  for (const auto& a : algorithms)
    if (!names.insert(a.name).second) throw ConfigError("[experiment] algorithms: duplicate entry " + a.name);
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("[experiment] seeds: duplicate seed");
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentConfig cfg;

  const Section exp = section(root, "experiment");
  exp.only({"horizon", "seeds", "algorithms", "output", "wall_clock"});
  cfg.horizon = exp.integer("horizon", cfg.horizon);
  if (!exp.has("seeds")) throw ConfigError(exp.field("seeds") + ": required");
  for (const auto& item : split_list(exp.raw("seeds"))) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size() || item.front() == '-') throw std::invalid_argument(item);
      cfg.seeds.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(exp.field("seeds") + ": bad seed '" + item + "'");
    }
  }
  cfg.output = exp.str("output", cfg.output.string());
  cfg.wall_clock = exp.boolean("wall_clock", cfg.wall_clock);

  const Section env = section(root, "environment");
  env.only({"kind", "dim", "actions", "noise", "rescale", "path", "per_class"});
  auto& e = cfg.environment;
  e.kind = env.str("kind", e.kind);
  if (e.kind != "h1" && e.kind != "h2" && e.kind != "h3" && !e.is_dataset())
    throw ConfigError(env.field("kind") + ": expected h1, h2, h3, mushroom or statlog");
  e.dim = env.integer("dim", e.dim);
  e.actions = env.integer("actions", e.actions);
  e.noise = env.real("noise", e.noise);
  e.rescale = env.real("rescale", e.rescale);
  e.path = env.str("path", "");
  e.per_class = env.integer("per_class", e.per_class);
  if (e.dim < 1) throw ConfigError(env.field("dim") + ": must be >= 1");
  if (e.actions < 1) throw ConfigError(env.field("actions") + ": must be >= 1");
  if (!(e.noise >= 0.0)) throw ConfigError(env.field("noise") + ": must be >= 0");
  if (!(e.rescale > 0.0)) throw ConfigError(env.field("rescale") + ": must be positive");
  if (e.is_dataset() && e.path.empty()) throw ConfigError(env.field("path") + ": required for dataset environments");
  if (e.per_class < 1) throw ConfigError(env.field("per_class") + ": must be >= 1");

  const Section net = section(root, "network");
  net.only({"depth", "width", "smoothness"});
  NetConfig base_net;
  base_net.depth = net.integer("depth", 1);
  base_net.width = net.integer("width", 32);
  base_net.smoothness = net.integer("smoothness", 1);

  const Section tr = section(root, "train");
  tr.only({"lambda", "eta", "epochs"});
  TrainSpec base_train;
  base_train.lambda = tr.real("lambda", base_train.lambda);
  base_train.eta = tr.real("eta", base_train.eta);
  base_train.epochs = tr.integer("epochs", base_train.epochs);

  const Section conf = section(root, "confidence");
  conf.only({"rkhs_norm", "noise", "delta"});
  ConfidenceParams base_conf;
  base_conf.rkhs_norm = conf.real("rkhs_norm", base_conf.rkhs_norm);
  base_conf.noise = conf.real("noise", base_conf.noise);
  base_conf.delta = conf.real("delta", base_conf.delta);

  if (!exp.has("algorithms")) throw ConfigError(exp.field("algorithms") + ": required");
  for (const auto& entry : split_list(exp.raw("algorithms"))) {
    AlgorithmSpec a;
    a.name = entry;
    const Section sec = section(root, entry);
    const std::string type_name = sec.str("type", entry.substr(0, entry.find(':')));
    a.type = parse_type(type_name, sec.field("type"));

    a.net = base_net;
    a.net.depth = sec.integer("depth", a.net.depth);
    a.net.width = sec.integer("width", a.net.width);
    a.net.smoothness = sec.integer("smoothness", a.net.smoothness);
    a.train = base_train;
    a.train.eta = sec.real("eta", a.train.eta);
    a.train.epochs = sec.integer("epochs", a.train.epochs);
    a.confidence = base_conf;
    a.confidence.rkhs_norm = sec.real("rkhs_norm", a.confidence.rkhs_norm);
    a.confidence.noise = sec.real("noise", a.confidence.noise);

    switch (a.type) {
      case AlgorithmType::neural_gcb:
      case AlgorithmType::neural_ucb: {
        std::set<std::string> keys{"type",  "depth",     "width", "smoothness", "lambda", "eta",
                                   "epochs", "rkhs_norm", "noise", "delta",      "batch",  "q"};
        if (a.type == AlgorithmType::neural_gcb)
          keys.insert({"sigma0", "eta0", "alpha0", "time_varying_beta"});
        sec.only(keys);
        a.train.lambda = sec.real("lambda", a.train.lambda);
        a.confidence.lambda = a.train.lambda;
        a.confidence.delta = sec.real("delta", a.confidence.delta);
        guarded(sec.field("batch"), [&] { a.batch.mode = parse_batch_mode(sec.str("batch", "fixed")); });
        a.batch.q = sec.reals("q", {1.0});
        guarded(sec.field("q"), [&] { a.batch.validate(); });
        a.sigma0 = sec.real("sigma0", a.sigma0);
        a.eta0 = sec.real("eta0", a.eta0);
        a.alpha0 = sec.real("alpha0", a.alpha0);
        a.time_varying_beta = sec.boolean("time_varying_beta", a.time_varying_beta);
        guarded(sec.field("network"), [&] {
          NetConfig probe = a.net;
          probe.input_dim = 1;
          probe.validate();
        });
        guarded(sec.field("confidence"), [&] { a.confidence.validate(); });
        if (!(a.train.eta > 0.0)) throw ConfigError(sec.field("eta") + ": must be positive");
        if (a.train.epochs < 0) throw ConfigError(sec.field("epochs") + ": must be >= 0");
        if (!(a.sigma0 > 0.0)) throw ConfigError(sec.field("sigma0") + ": must be positive");
        if (!(a.eta0 > 0.0)) throw ConfigError(sec.field("eta0") + ": must be positive");
        break;
      }
      case AlgorithmType::lin_ucb:
        sec.only({"type", "lambda", "delta"});
        a.lin_lambda = sec.real("lambda", a.lin_lambda);
        a.lin_delta = sec.real("delta", base_conf.delta);
        if (!(a.lin_lambda > 0.0)) throw ConfigError(sec.field("lambda") + ": must be positive");
        if (!(a.lin_delta > 0.0 && a.lin_delta < 1.0)) throw ConfigError(sec.field("delta") + ": must lie in (0,1)");
        break;
      case AlgorithmType::random:
        sec.only({"type"});
        break;
    }
    cfg.algorithms.push_back(std::move(a));
  }

  std::set<std::string> known{"experiment", "environment", "network", "train", "confidence"};
  for (const auto& a : cfg.algorithms) known.insert(a.name);
  for (const auto& [name, child] : root)
    if (!known.count(name)) throw ConfigError("[" + name + "]: section is not used by any listed algorithm");

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
  if (spec.is_dataset()) {
    Dataset data = load_uci(spec.path, parse_uci_kind(spec.kind), spec.per_class, derive_seed(seed, streams::kProblem));
    return classification_to_bandit(std::move(data), spec.noise, seed);
  }
  Rng problem(derive_seed(seed, streams::kProblem));
  RewardModel model = make_synthetic_model(parse_reward_kind(spec.kind), spec.dim, spec.noise, problem);
  model.scale = spec.rescale;
  return std::make_unique<SyntheticEnv>(std::move(model), spec.dim, spec.actions, seed);
}

std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, int horizon, const Environment& env,
                                    std::uint64_t seed) {
  // Every policy gets the run seed itself, so neural policies of one run
  // start from the same initial weights.
  const std::uint64_t pseed = seed;
  NetConfig net = spec.net;
  net.input_dim = env.context_dim();
  switch (spec.type) {
    case AlgorithmType::neural_gcb: {
      GcbConfig g;
      g.horizon = horizon;
      g.sigma0 = spec.sigma0;
      g.eta0 = spec.eta0;
      g.alpha0 = spec.alpha0;
      g.batch = spec.batch;
      g.net = net;
      g.train = spec.train;
      g.confidence = spec.confidence;
      g.time_varying_beta = spec.time_varying_beta;
      return std::make_unique<NeuralGcb>(g, pseed);
    }
    case AlgorithmType::neural_ucb: {
      NeuralUcbConfig u;
      u.batch = spec.batch;
      u.net = net;
      u.train = spec.train;
      u.confidence = spec.confidence;
      return std::make_unique<NeuralUcb>(u, pseed);
    }
    case AlgorithmType::lin_ucb: {
      LinUcbConfig l;
      l.lambda = spec.lin_lambda;
      l.delta = spec.lin_delta;
      l.horizon = horizon;
      l.num_actions = env.num_actions();
      return std::make_unique<LinUcb>(l, env.context_dim());
    }
    case AlgorithmType::random:
      return std::make_unique<UniformRandom>(pseed);
  }
  throw std::logic_error("unhandled algorithm type");
}

}  // namespace nbandit::cli
