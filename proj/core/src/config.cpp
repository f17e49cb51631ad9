#include "hfadapt/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "hfadapt/error.hpp"
#include "hfadapt/rng.hpp"

namespace hfadapt {

using nlohmann::json;

namespace {

// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + label() + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned())
          throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key_path(key) + "' has the wrong type (" +
                        std::string(v.type_name()) + ")");
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, key_path(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown config key '" + key_path(k) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_adam(Section& s, AdamConfig& a) {
  s.read("lr", a.lr);
  s.read("beta1", a.beta1);
  s.read("beta2", a.beta2);
  s.read("adam_eps", a.eps);
}

json adam_json(const AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"adam_eps", a.eps}};
}

RunConfig from_json(const json& root) {
  RunConfig cfg;
  Section r(root, "");
  r.read("seed", cfg.seed);
  {
    auto s = r.child("paths");
    s.read("mnist_dir", cfg.paths.mnist_dir);
    s.read("fashion_dir", cfg.paths.fashion_dir);
    s.finish();
  }
  {
    auto s = r.child("noise");
    s.read("density", cfg.noise.density);
    s.read("salt_fraction", cfg.noise.salt_fraction);
    s.read("sigma", cfg.noise.sigma);
    s.finish();
  }
  {
    auto s = r.child("data");
    s.read("source_class", cfg.data.source_class);
    s.read("source_train", cfg.data.source_train);
    s.read("source_val", cfg.data.source_val);
    s.read("target_labeled", cfg.data.target_labeled);
    s.read("target_eval", cfg.data.target_eval);
    s.finish();
  }
  {
    auto s = r.child("arch");
    s.read("resolution", cfg.arch.resolution);
    s.read("base_width", cfg.arch.base_width);
    s.read("depth", cfg.arch.depth);
    s.read("use_dropout", cfg.arch.use_dropout);
    s.read("patch_output", cfg.arch.patch_output);
    s.finish();
  }
  {
    auto s = r.child("pretrain");
    s.read("epochs", cfg.pretrain.epochs);
    s.read("batch", cfg.pretrain.batch);
    read_adam(s, cfg.pretrain.adam);
    s.read("l1_weight", cfg.pretrain.l1_weight);
    s.read("checkpoint_every", cfg.pretrain.checkpoint_every);
    s.finish();
  }
  {
    auto s = r.child("oracle");
    s.read("tau_db", cfg.oracle.tau_db);
    s.finish();
  }
  {
    auto s = r.child("reward");
    s.read("epochs", cfg.reward.epochs);
    s.read("batch", cfg.reward.batch);
    read_adam(s, cfg.reward.adam);
    s.read("holdout", cfg.reward.holdout);
    s.read("per_patch", cfg.reward.per_patch);
    s.read("balance_classes", cfg.reward.balance_classes);
    s.finish();
  }
  {
    auto s = r.child("adapt");
    s.read("alpha", cfg.adapt.alpha);
    s.read("epsilon", cfg.adapt.epsilon);
    s.read("snapshot_interval", cfg.adapt.snapshot_interval);
    s.read("epochs", cfg.adapt.epochs);
    s.read("batch", cfg.adapt.batch);
    read_adam(s, cfg.adapt.adam);
    s.read("reward_only", cfg.adapt.reward_only);
    s.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

json as_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["paths"] = {{"mnist_dir", c.paths.mnist_dir}, {"fashion_dir", c.paths.fashion_dir}};
  j["noise"] = {{"density", c.noise.density},
                {"salt_fraction", c.noise.salt_fraction},
                {"sigma", c.noise.sigma}};
  j["data"] = {{"source_class", c.data.source_class},
               {"source_train", c.data.source_train},
               {"source_val", c.data.source_val},
               {"target_labeled", c.data.target_labeled},
               {"target_eval", c.data.target_eval}};
  j["arch"] = {{"resolution", c.arch.resolution},
               {"base_width", c.arch.base_width},
               {"depth", c.arch.depth},
               {"use_dropout", c.arch.use_dropout},
               {"patch_output", c.arch.patch_output}};
  json pre = adam_json(c.pretrain.adam);
  pre["epochs"] = c.pretrain.epochs;
  pre["batch"] = c.pretrain.batch;
  pre["l1_weight"] = c.pretrain.l1_weight;
  pre["checkpoint_every"] = c.pretrain.checkpoint_every;
  j["pretrain"] = pre;
  j["oracle"] = {{"tau_db", c.oracle.tau_db}};
  json rw = adam_json(c.reward.adam);
  rw["epochs"] = c.reward.epochs;
  rw["batch"] = c.reward.batch;
  rw["holdout"] = c.reward.holdout;
  rw["per_patch"] = c.reward.per_patch;
  rw["balance_classes"] = c.reward.balance_classes;
  j["reward"] = rw;
  json ad = adam_json(c.adapt.adam);
  ad["alpha"] = c.adapt.alpha;
  ad["epsilon"] = c.adapt.epsilon;
  ad["snapshot_interval"] = c.adapt.snapshot_interval;
  ad["epochs"] = c.adapt.epochs;
  ad["batch"] = c.adapt.batch;
  ad["reward_only"] = c.adapt.reward_only;
  j["adapt"] = ad;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  noise.validate();
  arch.validate();
  pretrain.validate();
  oracle.validate();
  reward.validate();
  adapt.validate();
  if (data.source_class < 0 || data.source_class > 9) throw ConfigError("data.source_class must be in 0..9");
  if (data.source_train < 1) throw ConfigError("data.source_train must be >= 1");
  if (data.target_labeled < 2) throw ConfigError("data.target_labeled must be >= 2");
  if (data.target_eval < 1) throw ConfigError("data.target_eval must be >= 1");
  if (arch.resolution < 28) throw ConfigError("arch.resolution must be >= 28 (native image size)");
}

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const RunConfig& cfg) { return as_json(cfg).dump(2) + "\n"; }

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json root = as_json(cfg);
  json* node = &root;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object() || !node->contains(path[i])) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    node = &(*node)[path[i]];
  }
  if (!node->is_object() || !node->contains(path.back())) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  (*node)[path.back()] = value;
  cfg = from_json(root);
}

RunConfig with_derived_seeds(RunConfig cfg) {
  cfg.noise.seed = mix_seed(cfg.seed, 0x6e6f697365);  // per-dataset seeds mix in further keys
  cfg.pretrain.seed = mix_seed(cfg.seed, 1);
  cfg.reward.seed = mix_seed(cfg.seed, 2);
  cfg.adapt.seed = mix_seed(cfg.seed, 3);
  return cfg;
}

}  // namespace hfadapt
