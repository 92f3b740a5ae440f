#include "cli/config.hpp"

#include "semcom/error.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <functional>
#include <iomanip>
#include <sstream>

namespace semcom::cli {

namespace {

struct Key {
  std::string name;
  std::function<YAML::Node()> get;
  std::function<void(const YAML::Node&)> set;
};

template <typename T>
T convert(const std::string& key, const YAML::Node& n) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for '" + key + "'");
  }
}

template <typename T>
Key plain(const std::string& name, T& ref) {
  return {name, [&ref] { return YAML::Node(ref); }, [&ref, name](const YAML::Node& n) { ref = convert<T>(name, n); }};
}

template <typename T>
Key scaled(const std::string& name, T& ref, double factor) {
  return {name, [&ref, factor] { return YAML::Node(ref / factor); },
          [&ref, name, factor](const YAML::Node& n) { ref = convert<double>(name, n) * factor; }};
}

template <typename T>
Key list(const std::string& name, std::vector<T>& ref) {
  return {name,
          [&ref] {
            YAML::Node n(YAML::NodeType::Sequence);
            for (const auto& v : ref) n.push_back(v);
            n.SetStyle(YAML::EmitterStyle::Flow);
            return n;
          },
          [&ref, name](const YAML::Node& n) {
            if (!n.IsSequence()) throw ConfigError("'" + name + "' expects a list");
            ref = convert<std::vector<T>>(name, n);
          }};
}

template <typename E>
Key enumeration(const std::string& name, E& ref, std::function<E(const std::string&)> parse,
                std::function<std::string(E)> print) {
  return {name, [&ref, print] { return YAML::Node(print(ref)); },
          [&ref, name, parse](const YAML::Node& n) { ref = parse(convert<std::string>(name, n)); }};
}

std::vector<Key> registry(RunConfig& c) {
  std::vector<Key> k;
  k.push_back(plain("seed", c.seed));

  k.push_back(plain("data.source", c.data.source));
  k.push_back({"data.root", [&c] { return YAML::Node(c.data.spec.root.string()); },
               [&c](const YAML::Node& n) { c.data.spec.root = convert<std::string>("data.root", n); }});
  k.push_back(plain("data.split", c.data.spec.split));
  k.push_back(plain("data.val_split", c.data.val_split));
  k.push_back(plain("data.crop_h", c.data.spec.crop_h));
  k.push_back(plain("data.crop_w", c.data.spec.crop_w));
  k.push_back(plain("data.random_crop", c.data.spec.random_crop));
  k.push_back(plain("data.flip", c.data.spec.flip));
  k.push_back(plain("data.photometric", c.data.spec.photometric));
  k.push_back(plain("data.n_classes", c.data.spec.n_classes));
  k.push_back(plain("data.synthetic.train_images", c.data.synthetic_train));
  k.push_back(plain("data.synthetic.val_images", c.data.synthetic_val));
  k.push_back(plain("data.synthetic.h", c.data.synthetic_h));
  k.push_back(plain("data.synthetic.w", c.data.synthetic_w));

  k.push_back(plain("codec.embed_dim", c.codec.embed_dim));
  k.push_back(list("codec.depths", c.codec.depths));
  k.push_back(list("codec.heads", c.codec.heads));
  k.push_back(plain("codec.window", c.codec.window));
  k.push_back(plain("codec.mlp_ratio", c.codec.mlp_ratio));
  k.push_back(plain("codec.k", c.codec.k_channels));
  k.push_back(plain("codec.aggregator_activation", c.codec.aggregator_activation));

  k.push_back(enumeration<ChannelMode>("channel.mode", c.channel.mode, parse_channel_mode,
                                       [](ChannelMode m) { return to_string(m); }));
  k.push_back(plain("channel.snr_db", c.channel.snr_db));
  k.push_back(scaled("channel.velocity_kmh", c.channel.velocity_mps, 1.0 / 3.6));
  k.push_back(scaled("channel.carrier_ghz", c.channel.carrier_hz, 1e9));
  k.push_back(scaled("channel.bandwidth_mhz", c.channel.bandwidth_hz, 1e6));
  k.push_back(plain("channel.link_budget", c.channel.link_budget));
  k.push_back(plain("channel.shadowing_std_db", c.channel.shadowing_std_db));
  k.push_back(plain("channel.tx_power_dbm", c.channel.tx_power_dbm));
  k.push_back(plain("channel.path_loss_db", c.channel.path_loss_db));
  k.push_back(plain("channel.noise_figure_db", c.channel.noise_figure_db));
  k.push_back(enumeration<Equalizer>("channel.equalizer", c.channel.equalizer, parse_equalizer,
                                     [](Equalizer e) { return to_string(e); }));
  k.push_back(plain("channel.seed", c.channel.seed));

  k.push_back(plain("loss.b1", c.loss.b1));
  k.push_back(plain("loss.b2", c.loss.b2));
  k.push_back(plain("loss.iou", c.loss.use_iou));
  k.push_back(plain("loss.class_weights", c.loss.use_weights));
  k.push_back(plain("loss.aux", c.loss.aux_enabled));
  k.push_back(plain("loss.ohem.enabled", c.loss.ohem_enabled));
  k.push_back(plain("loss.ohem.thresh", c.loss.ohem_thresh));
  k.push_back(plain("loss.ohem.min_kept", c.loss.ohem_min_kept));
  k.push_back(plain("loss.ohem.on_iou", c.loss.ohem_on_iou));
  k.push_back(list("loss.important", c.important));

  k.push_back(plain("train.iterations", c.train.iterations));
  k.push_back(plain("train.batch_size", c.train.batch_size));
  k.push_back(plain("train.lr", c.train.adam.lr));
  k.push_back(plain("train.warmup", c.train.adam.warmup_iterations));
  k.push_back(plain("train.clip_norm", c.train.adam.clip_norm));
  k.push_back(plain("train.snr_low_db", c.train.snr_low_db));
  k.push_back(plain("train.snr_high_db", c.train.snr_high_db));
  k.push_back(plain("train.channel", c.train.channel_enabled));
  k.push_back(plain("train.augment", c.train.augment));
  k.push_back(plain("train.checkpoint_every", c.train.checkpoint_every));
  k.push_back(plain("train.log_every", c.train.log_every));
  k.push_back(plain("train.init_from", c.init_from));

  k.push_back(plain("eval.snr_low_db", c.eval.snr_low_db));
  k.push_back(plain("eval.snr_high_db", c.eval.snr_high_db));
  k.push_back(plain("eval.snr_step_db", c.eval.snr_step_db));
  k.push_back(list("eval.velocities_kmh", c.eval.velocities_kmh));
  k.push_back(plain("eval.realizations", c.eval.realizations));
  k.push_back(plain("eval.batch_size", c.eval.batch_size));
  k.push_back(list("eval.classes", c.eval.classes));

  k.push_back(plain("baseline.jpeg_quality", c.baseline.jpeg_quality));
  k.push_back(plain("baseline.target_r", c.baseline.target_r));
  k.push_back(plain("baseline.qam_order", c.baseline.qam_order));
  k.push_back(plain("baseline.bp_iterations", c.baseline.bp_iterations));
  k.push_back(enumeration<LdpcAlgorithm>("baseline.decoder", c.baseline.decoder, parse_ldpc_algorithm,
                                         [](LdpcAlgorithm a) { return to_string(a); }));
  k.push_back(plain("baseline.minsum_scale", c.baseline.minsum_scale));
  k.push_back(plain("baseline.interleave", c.baseline.interleave));
  k.push_back(plain("baseline.segmenter", c.baseline.segmenter));
  return k;
}

constexpr const char* kWeightsPrefix = "loss.weights.";

void set_key(RunConfig& cfg, const std::string& key, const YAML::Node& value) {
  if (key.rfind(kWeightsPrefix, 0) == 0) {
    const std::string cls = key.substr(std::strlen(kWeightsPrefix));
    if (cls.empty()) throw ConfigError("unknown config key '" + key + "'");
    cfg.balance[cls] = convert<double>(key, value);
    return;
  }
  for (auto& k : registry(cfg)) {
    if (k.name == key) {
      k.set(value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_node(RunConfig& cfg, const YAML::Node& node, const std::string& prefix) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string name = kv.first.as<std::string>();
      const std::string key = prefix.empty() ? name : prefix + "." + name;
      // A mapping under loss.weights holds per-class values; every other
      // mapping is a nesting level.
      apply_node(cfg, kv.second, key);
    }
    return;
  }
  if (prefix.empty()) {
    if (node.IsNull()) return;
    throw ConfigError("config root must be a mapping");
  }
  set_key(cfg, prefix, node);
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  c.data.spec.crop_h = 64;
  c.data.spec.crop_w = 64;
  c.data.spec.n_classes = 5;
  c.data.spec.photometric = false;
  c.codec = CodecConfig::toy(5, 32);
  c.loss.ohem_min_kept = 0.19;
  c.train.iterations = 2000;
  c.train.batch_size = 8;
  c.train.adam.lr = 1e-3;
  return c;
}

std::vector<std::string> known_keys() {
  RunConfig c;
  std::vector<std::string> out;
  for (const auto& k : registry(c)) out.push_back(k.name);
  return out;
}

void apply_yaml_text(RunConfig& cfg, const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  apply_node(cfg, root, "");
}

void apply_yaml_file(RunConfig& cfg, const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file " + path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  apply_node(cfg, root, "");
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  YAML::Node n;
  try {
    n = YAML::Load(value);
  } catch (const YAML::Exception&) {
    n = YAML::Node(value);
  }
  if (n.IsNull()) n = YAML::Node(value);
  set_key(cfg, key, n);
}

void apply_env(RunConfig& cfg, char** envp) {
  if (!envp) return;
  const std::string prefix = "SEMCOM_";
  for (char** e = envp; *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(prefix.size(), eq - prefix.size());
    if (name == "CONFIG") continue;
    std::string key;
    for (std::size_t i = 0; i < name.size(); ++i) {
      if (name[i] == '_' && i + 1 < name.size() && name[i + 1] == '_') {
        key += '.';
        ++i;
      } else {
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(name[i])));
      }
    }
    apply_override(cfg, key, entry.substr(eq + 1));
  }
}

std::vector<std::string> class_names(const RunConfig& cfg) {
  if (cfg.data.source == "cityscapes") {
    return std::vector<std::string>(kCityscapesClassNames.begin(), kCityscapesClassNames.end());
  }
  return synthetic_class_names(cfg.data.spec.n_classes);
}

std::vector<int> eval_subset(const RunConfig& cfg) {
  const auto names = class_names(cfg);
  std::vector<int> out;
  for (const auto& n : cfg.eval.classes) out.push_back(class_index(names, n));
  return out;
}

void resolve(RunConfig& cfg) {
  auto& d = cfg.data;
  if (d.source != "synthetic" && d.source != "cityscapes") {
    throw ConfigError("data.source must be synthetic or cityscapes (got '" + d.source + "')");
  }
  if (d.source == "cityscapes" && d.spec.n_classes != kCityscapesClasses) {
    throw ConfigError("data.n_classes must be 19 for cityscapes");
  }
  d.spec.validate();
  if (d.source == "synthetic") {
    if (d.synthetic_h % 32 != 0 || d.synthetic_w % 32 != 0 || d.synthetic_h <= 0 || d.synthetic_w <= 0) {
      throw ConfigError("data.synthetic.h and data.synthetic.w must be positive multiples of 32");
    }
    if (d.spec.crop_h > d.synthetic_h || d.spec.crop_w > d.synthetic_w) {
      throw ConfigError("data crop exceeds the synthetic image size");
    }
    if (d.synthetic_train < 1 || d.synthetic_val < 1) throw ConfigError("synthetic image counts must be >= 1");
  }
  cfg.codec.n_classes = d.spec.n_classes;
  cfg.codec.validate();
  cfg.channel.validate();

  const auto names = class_names(cfg);
  const int n = static_cast<int>(names.size());
  if (cfg.important.empty()) {
    if (d.source == "cityscapes") {
      const ClassWeights def = cityscapes_default_weights();
      for (int i = 0; i < n; ++i) {
        if (def.important[i]) cfg.important.push_back(names[i]);
      }
    } else {
      cfg.important.push_back(names[synthetic_rare_class(n)]);
    }
  }
  std::vector<bool> important(n, false);
  for (const auto& name : cfg.important) important[class_index(names, name)] = true;

  std::vector<double> balance(n, 1.0);
  if (d.source == "cityscapes") {
    const ClassWeights def = cityscapes_default_weights();
    for (int i = 0; i < n; ++i) balance[i] = def.w[i] / (def.important[i] ? 1.5 : 1.0);
  }
  for (const auto& [name, value] : cfg.balance) balance[class_index(names, name)] = value;
  cfg.balance.clear();
  for (int i = 0; i < n; ++i) cfg.balance[names[i]] = balance[i];
  cfg.loss.weights = class_weights(balance, important);
  cfg.loss.validate(n);

  cfg.train.seed = train_seed(cfg);
  cfg.train.validate();
  cfg.baseline.validate();
  if (cfg.eval.realizations < 1 || cfg.eval.batch_size < 1) throw ConfigError("eval.realizations and eval.batch_size must be >= 1");
  snr_range(cfg.eval.snr_low_db, cfg.eval.snr_high_db, cfg.eval.snr_step_db);
  eval_subset(cfg);
}

namespace {

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const YAML::Node& value) {
  if (i + 1 == parts.size()) {
    node[parts[i]] = value;
    return;
  }
  // Copy construction shares the child, so writes land in the parent tree.
  YAML::Node child = node[parts[i]];
  set_path(child, parts, i + 1, value);
}

}  // namespace

std::string to_yaml(const RunConfig& cfg) {
  RunConfig copy = cfg;
  YAML::Node root(YAML::NodeType::Map);
  for (const auto& k : registry(copy)) {
    std::vector<std::string> parts;
    std::stringstream ss(k.name);
    std::string part;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    set_path(root, parts, 0, k.get());
  }
  YAML::Node weights = root["loss"]["weights"];
  for (const auto& [name, value] : copy.balance) weights[name] = value;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = to_yaml(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str().substr(0, 10);
}

std::uint64_t model_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, {11}); }
std::uint64_t train_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, {12}); }
std::uint64_t eval_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, {13, cfg.channel.seed}); }

std::unique_ptr<Dataset> make_train_dataset(const RunConfig& cfg) {
  if (cfg.data.source == "cityscapes") {
    DatasetSpec spec = cfg.data.spec;
    return load_cityscapes(spec);
  }
  return std::make_unique<InMemoryDataset>(gen_synthetic(cfg.data.synthetic_train, cfg.data.synthetic_h,
                                                         cfg.data.synthetic_w, cfg.data.spec.n_classes,
                                                         derive_seed(cfg.seed, {21})));
}

std::unique_ptr<Dataset> make_val_dataset(const RunConfig& cfg) {
  if (cfg.data.source == "cityscapes") {
    DatasetSpec spec = cfg.data.spec;
    spec.split = cfg.data.val_split;
    return load_cityscapes(spec);
  }
  return std::make_unique<InMemoryDataset>(gen_synthetic(cfg.data.synthetic_val, cfg.data.synthetic_h,
                                                         cfg.data.synthetic_w, cfg.data.spec.n_classes,
                                                         derive_seed(cfg.seed, {22})));
}

EvalConfig make_eval_config(const RunConfig& cfg) {
  EvalConfig e;
  e.snr_grid = snr_range(cfg.eval.snr_low_db, cfg.eval.snr_high_db, cfg.eval.snr_step_db);
  e.n_realizations = cfg.eval.realizations;
  e.batch_size = cfg.eval.batch_size;
  e.seed = eval_seed(cfg);
  return e;
}

}  // namespace semcom::cli
