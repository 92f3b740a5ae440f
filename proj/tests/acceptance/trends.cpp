#include "report.hpp"

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "semcom/checkpoint.hpp"
#include "semcom/trainer.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

namespace semcom::acceptance {

namespace {

namespace fs = std::filesystem;
using cli::RunConfig;

constexpr int kSeeds = 3;
constexpr int kIterations = 2000;
constexpr double kMinMiou19 = 0.85;
constexpr double kCliffDrop = 0.3;
constexpr double kCliffSpanDb = 4.0;
constexpr double kSemanticMaxDrop = 0.15;
constexpr int kEvalRealizations = 2;
constexpr int kAblationIterations = 20;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

std::string list(const std::vector<double>& v, int precision = 4) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v[i], precision);
  return s + "]";
}

// The shipped toy configuration for one seed.
RunConfig toy_config(int seed) {
  RunConfig c = cli::default_config();
  c.seed = static_cast<std::uint64_t>(seed);
  c.train.iterations = kIterations;
  return c;
}

struct Trained {
  std::unique_ptr<SemanticCodec> model;
  std::vector<double> losses;
};

// Trains each (variant, seed) once. SEMCOM_ACCEPTANCE_CACHE names a directory
// where checkpoints and loss traces are kept across runs.
class ModelStore {
 public:
  ModelStore() {
    if (const char* dir = std::getenv("SEMCOM_ACCEPTANCE_CACHE"); dir && *dir) cache_ = dir;
  }

  Trained& get(const std::string& variant, RunConfig cfg) {
    cli::resolve(cfg);
    const std::string key = variant + "-seed" + std::to_string(cfg.seed) + "-" + cli::config_hash(cfg);
    auto it = models_.find(key);
    if (it != models_.end()) return it->second;
    Trained t;
    if (!cache_.empty() && fs::exists(cache_ / (key + ".ckpt")) && fs::exists(cache_ / (key + ".loss"))) {
      t.model = codec_from_checkpoint(load_checkpoint(cache_ / (key + ".ckpt")));
      std::ifstream is(cache_ / (key + ".loss"));
      for (double v; is >> v;) t.losses.push_back(v);
      std::cout << "  loaded " << key << " from cache" << std::endl;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      std::cout << "  training " << key << std::flush;
      t.model = std::make_unique<SemanticCodec>(cfg.codec, cli::model_seed(cfg));
      const auto data = cli::make_train_dataset(cfg);
      Trainer trainer(*t.model, cfg.train, cfg.channel, cfg.loss, cfg.data.spec);
      trainer.run(*data, nullptr, {}, [&](std::uint64_t, const StepResult& r) { t.losses.push_back(r.loss); });
      std::cout << " (" << num(seconds_since(t0), 0) << " s)" << std::endl;
      if (!cache_.empty()) {
        fs::create_directories(cache_);
        save_checkpoint(cache_ / (key + ".ckpt"), make_checkpoint(*t.model, t.losses.size(), nullptr, nullptr));
        std::ofstream os(cache_ / (key + ".loss"));
        os.precision(17);
        for (double v : t.losses) os << v << '\n';
      }
    }
    return models_.emplace(key, std::move(t)).first->second;
  }

 private:
  fs::path cache_;
  std::map<std::string, Trained> models_;
};

EvalConfig eval_config(const RunConfig& cfg, std::vector<double> grid) {
  EvalConfig ec = cli::make_eval_config(cfg);
  ec.snr_grid = std::move(grid);
  ec.n_realizations = kEvalRealizations;
  return ec;
}

std::vector<double> miou_curve(const std::vector<EvalPoint>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) out.push_back(miou(p.cm));
  return out;
}

// Largest mIoU loss when the SNR falls by at most span_db: max over a < b of m[b] - m[a].
double largest_drop(const std::vector<double>& snr, const std::vector<double>& m, double span_db) {
  double worst = 0.0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size() && snr[b] - snr[a] <= span_db + 1e-9; ++b) worst = std::max(worst, m[b] - m[a]);
  }
  return worst;
}

class Trends {
 public:
  Outcome training_works() {
    Outcome o{9, "training works", false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> m19;
    std::vector<double> early;
    std::vector<double> late;
    for (int s = 0; s < kSeeds; ++s) {
      const RunConfig cfg = toy_config(s);
      const Trained& t = store_.get("semantic-k32", cfg);
      m19.push_back(miou(snr_points(s)[2].cm));
      const auto& l = t.losses;
      early.push_back(std::accumulate(l.begin(), l.begin() + 200, 0.0) / 200.0);
      late.push_back(std::accumulate(l.end() - 201, l.end(), 0.0) / 201.0);
    }
    const bool loss_down = mean(late) < mean(early);
    o.pass = mean(m19) >= kMinMiou19 && loss_down;
    o.detail = "mean mIoU at 19 dB " + num(mean(m19)) + " (per seed " + list(m19) + ", need >= " + num(kMinMiou19, 2) +
               "); mean loss iters 1-200 " + num(mean(early)) + ", iters 1800-2000 " + num(mean(late));
    o.seconds = seconds_since(t0);
    return o;
  }

  Outcome snr_monotone() {
    Outcome o{10, "SNR monotone trend", false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> m(3, 0.0);
    for (int s = 0; s < kSeeds; ++s) {
      const auto& pts = snr_points(s);
      for (int i = 0; i < 3; ++i) m[i] += miou(pts[i].cm) / kSeeds;
    }
    o.pass = m[2] >= m[1] && m[1] >= m[0];
    o.detail = "mean mIoU at 1/10/19 dB " + list(m);
    o.seconds = seconds_since(t0);
    return o;
  }

  Outcome cliff() {
    Outcome o{11, "cliff effect", false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> grid;
    for (int s = 1; s <= 20; ++s) grid.push_back(s);
    std::vector<double> sem(grid.size(), 0.0);
    std::vector<double> base(grid.size(), 0.0);
    std::vector<double> decoded(grid.size(), 0.0);
    for (int s = 0; s < kSeeds; ++s) {
      RunConfig cfg = toy_config(s);
      const Trained& t = store_.get("semantic-k32", cfg);
      cli::resolve(cfg);
      ChannelConfig awgn = cfg.channel;
      awgn.mode = ChannelMode::Awgn;
      BaselineConfig b = cfg.baseline;
      b.qam_order = 4;
      const auto val = cli::make_val_dataset(cfg);
      const EvalConfig ec = eval_config(cfg, grid);
      const auto sp = miou_curve(evaluate(*t.model, *val, awgn, ec));
      const auto bp = evaluate_baseline(*t.model, *val, awgn, b, ec);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        sem[i] += sp[i] / kSeeds;
        base[i] += miou(bp[i].cm) / kSeeds;
        decoded[i] += bp[i].decode_success / kSeeds;
      }
    }
    const double base_drop = largest_drop(grid, base, kCliffSpanDb);
    const double sem_drop = largest_drop(grid, sem, kCliffSpanDb);
    o.pass = base_drop >= kCliffDrop && sem_drop <= kSemanticMaxDrop;
    o.detail = "AWGN 4-QAM, 1..20 dB; baseline largest 4 dB drop " + num(base_drop) + " (need >= " + num(kCliffDrop, 2) +
               "), semantic " + num(sem_drop) + " (need <= " + num(kSemanticMaxDrop, 2) + "); baseline mIoU " +
               list(base, 3) + "; JPEG decoded " + list(decoded, 2) + "; semantic mIoU " + list(sem, 3);
    o.seconds = seconds_since(t0);
    return o;
  }

  Outcome compression_trend() {
    Outcome o{12, "compression trend", false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> m;
    for (int k : {32, 8, 2}) {
      double sum = 0.0;
      for (int s = 0; s < kSeeds; ++s) {
        RunConfig cfg = toy_config(s);
        cfg.codec.k_channels = k;
        const Trained& t = store_.get("semantic-k" + std::to_string(k), cfg);
        cli::resolve(cfg);
        const auto val = cli::make_val_dataset(cfg);
        sum += miou(evaluate(*t.model, *val, cfg.channel, eval_config(cfg, {cfg.channel.snr_db}))[0].cm);
      }
      m.push_back(sum / kSeeds);
    }
    o.pass = m[0] >= m[1] && m[1] >= m[2];
    o.detail = "mean mIoU at 10 dB for K = 32/8/2 (R = 24/96/384): " + list(m);
    o.seconds = seconds_since(t0);
    return o;
  }

  Outcome importance_direction() {
    Outcome o{13, "importance-loss direction", false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> weighted;
    std::vector<double> plain;
    std::string rare_name;
    for (int s = 0; s < kSeeds; ++s) {
      RunConfig imp = toy_config(s);
      RunConfig ce = imp;
      ce.loss.use_iou = false;
      ce.loss.use_weights = false;
      ce.loss.ohem_enabled = false;
      cli::resolve(imp);
      const int rare = class_index(cli::class_names(imp), imp.important.front());
      rare_name = imp.important.front();
      const auto val = cli::make_val_dataset(imp);
      const EvalConfig ec = eval_config(imp, {1.0, 10.0, 19.0});
      for (auto [cfg, out] : {std::pair{&imp, &weighted}, std::pair{&ce, &plain}}) {
        const Trained& t = store_.get(cfg == &imp ? "semantic-k32" : "uniform-ce", *cfg);
        ConfusionMatrix cm(imp.codec.n_classes);
        for (const auto& p : evaluate(*t.model, *val, imp.channel, ec)) cm.merge(p.cm);
        out->push_back(iou_per_class(cm)[rare].value_or(0.0));
      }
    }
    o.pass = mean(weighted) > mean(plain);
    o.detail = rare_name + " IoU (pooled over 1/10/19 dB): importance-aware " + num(mean(weighted)) + " " + list(weighted) +
               " vs uniform CE " + num(mean(plain)) + " " + list(plain);
    o.seconds = seconds_since(t0);
    return o;
  }

  Outcome ablation_harness() {
    Outcome o{14, "ablation harness", false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path base = fs::temp_directory_path() / "semcom_acceptance_ablate";
    fs::remove_all(base);
    const std::vector<std::string> args{"semcom",
                                        "--out",
                                        base.string(),
                                        "ablate",
                                        "--axis",
                                        "stb_combo",
                                        "--train.iterations=" + std::to_string(kAblationIterations),
                                        "--data.synthetic.train_images=32",
                                        "--data.synthetic.val_images=8"};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    char* envp[] = {nullptr};
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), envp, out, err);

    std::vector<std::vector<std::string>> table;
    int transfers = 0;
    if (code == 0) {
      for (const auto& e : fs::directory_iterator(base)) {
        std::ifstream is(e.path() / "ablation.csv");
        for (std::string line; std::getline(is, line);) {
          std::vector<std::string> cells;
          std::stringstream ss(line);
          for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
          table.push_back(cells);
        }
      }
      std::istringstream log(out.str());
      for (std::string line; std::getline(log, line);) transfers += line.find("transferred") != std::string::npos;
    }
    const std::vector<std::string> header{"class", "[3 5 7 9]", "[2 2 2 18]", "[2 2 9 9]", "[2 2 18 2]"};
    bool shape_ok = table.size() == 1 + 5 + 1 && table.front().size() == header.size();
    bool header_ok = shape_ok;
    if (shape_ok) {
      for (const auto& h : header) {
        header_ok = header_ok && std::find(table.front().begin(), table.front().end(), h) != table.front().end();
      }
      for (const auto& row : table) shape_ok = shape_ok && row.size() == header.size();
    }
    fs::remove_all(base);
    o.pass = code == 0 && shape_ok && header_ok && transfers == 3;
    o.detail = "exit " + std::to_string(code) + "; table " + std::to_string(table.size()) + " rows x " +
               std::to_string(table.empty() ? 0 : table.front().size()) + " columns; " + std::to_string(transfers) +
               " variants initialised by transfer" + (code == 0 ? "" : "; " + err.str());
    o.seconds = seconds_since(t0);
    return o;
  }

 private:
  // Default-channel evaluation of the reference model at 1, 10 and 19 dB.
  const std::vector<EvalPoint>& snr_points(int seed) {
    auto it = snr_points_.find(seed);
    if (it != snr_points_.end()) return it->second;
    RunConfig cfg = toy_config(seed);
    const Trained& t = store_.get("semantic-k32", cfg);
    cli::resolve(cfg);
    const auto val = cli::make_val_dataset(cfg);
    return snr_points_[seed] = evaluate(*t.model, *val, cfg.channel, eval_config(cfg, {1.0, 10.0, 19.0}));
  }

  ModelStore store_;
  std::map<int, std::vector<EvalPoint>> snr_points_;
};

}  // namespace

std::vector<Outcome> run_trends(const std::vector<int>& only) {
  Trends t;
  std::vector<Outcome> out;
  const std::vector<std::pair<int, Outcome (Trends::*)()>> all{
      {9, &Trends::training_works},        {10, &Trends::snr_monotone},          {11, &Trends::cliff},
      {12, &Trends::compression_trend},    {13, &Trends::importance_direction}, {14, &Trends::ablation_harness},
  };
  for (const auto& [id, fn] : all) {
    if (!selected(only, id)) continue;
    Outcome o;
    try {
      o = (t.*fn)();
    } catch (const std::exception& e) {
      o = Outcome{id, "criterion " + std::to_string(id), false, std::string("exception: ") + e.what(), 0.0};
    }
    announce(o);
    out.push_back(o);
  }
  return out;
}

}  // namespace semcom::acceptance
