#pragma once

#include "semcom/baseline.hpp"
#include "semcom/channel.hpp"
#include "semcom/codec.hpp"
#include "semcom/data.hpp"
#include "semcom/loss.hpp"
#include "semcom/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace semcom::cli {

struct DataSettings {
  std::string source = "synthetic";  // synthetic | cityscapes
  DatasetSpec spec;
  std::string val_split = "val";
  int synthetic_train = 512;
  int synthetic_val = 64;
  int synthetic_h = 64;
  int synthetic_w = 64;
};

struct EvalSettings {
  double snr_low_db = 1.0;
  double snr_high_db = 25.0;
  double snr_step_db = 3.0;
  std::vector<double> velocities_kmh{50.0, 120.0};
  int realizations = 1;
  int batch_size = 8;
  std::vector<std::string> classes;  // mIoU subset; empty = all classes
};

// Everything a command needs, resolved from defaults, the config file,
// SEMCOM_* environment variables and --dotted.key=value flags (in that order).
struct RunConfig {
  std::uint64_t seed = 0;
  DataSettings data;
  CodecConfig codec;
  ChannelConfig channel;
  LossConfig loss;
  std::vector<std::string> important;       // loss.important
  std::map<std::string, double> balance;    // loss.weights.<class>
  TrainConfig train;
  std::string init_from;                    // train.init_from
  EvalSettings eval;
  BaselineConfig baseline;
};

// Toy synthetic defaults.
RunConfig default_config();

// Every fixed key in canonical order (dynamic loss.weights.<class> keys excluded).
std::vector<std::string> known_keys();

void apply_yaml_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_yaml_text(RunConfig& cfg, const std::string& text);
// value is parsed as YAML (so "false", "3", "[1, 2]" all work).
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);
// SEMCOM_LOSS__OHEM__ENABLED=false -> loss.ohem.enabled = false. SEMCOM_CONFIG is ignored here.
void apply_env(RunConfig& cfg, char** envp);

// Checks ranges, fills derived fields (class weights, seeds) and throws ConfigError on problems.
void resolve(RunConfig& cfg);

std::vector<std::string> class_names(const RunConfig& cfg);
std::vector<int> eval_subset(const RunConfig& cfg);

// Canonical YAML for the resolved config; loading it reproduces the run.
std::string to_yaml(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Seeds of the independent components.
std::uint64_t model_seed(const RunConfig& cfg);
std::uint64_t train_seed(const RunConfig& cfg);
std::uint64_t eval_seed(const RunConfig& cfg);

std::unique_ptr<Dataset> make_train_dataset(const RunConfig& cfg);
std::unique_ptr<Dataset> make_val_dataset(const RunConfig& cfg);
EvalConfig make_eval_config(const RunConfig& cfg);

}  // namespace semcom::cli
