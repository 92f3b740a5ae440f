#include "cli/commands.hpp"

#include "cli/plot.hpp"
#include "semcom/checkpoint.hpp"
#include "semcom/error.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace semcom::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
};

// Splits leftover "--a.b=c" / "--a.b c" arguments into key/value overrides.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    const std::string body = a.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      out.emplace_back(body, extras[i + 1]);
      ++i;
    } else {
      throw ConfigError("override '--" + body + "' needs a value");
    }
  }
  return out;
}

RunConfig build_config(const Globals& g, const std::vector<std::string>& extras, char** envp) {
  RunConfig cfg = default_config();
  std::string path = g.config;
  if (path.empty() && envp) {
    for (char** e = envp; *e; ++e) {
      const std::string entry = *e;
      if (entry.rfind("SEMCOM_CONFIG=", 0) == 0) path = entry.substr(14);
    }
  }
  if (!path.empty()) apply_yaml_file(cfg, path);
  apply_env(cfg, envp);
  for (const auto& [k, v] : parse_overrides(extras)) apply_override(cfg, k, v);
  if (g.seed) cfg.seed = *g.seed;
  resolve(cfg);
  return cfg;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + p.string());
  os << text;
  if (!os) throw ConfigError("failed writing " + p.string());
}

std::unique_ptr<SemanticCodec> load_model(const std::string& path) {
  if (path.empty()) throw ConfigError("no checkpoint given");
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  return codec_from_checkpoint(load_checkpoint(path));
}

void check_model_classes(const SemanticCodec& m, const RunConfig& cfg, const std::string& what) {
  if (m.config().n_classes != cfg.data.spec.n_classes) {
    throw ConfigError(what + " predicts " + std::to_string(m.config().n_classes) + " classes but data has " +
                      std::to_string(cfg.data.spec.n_classes));
  }
}

std::string baseline_scheme(const BaselineConfig& b) { return "jpeg_ldpc_" + std::to_string(b.qam_order) + "qam"; }

void write_results(const fs::path& dir, const RunConfig& cfg, const std::vector<ResultRow>& rows, bool plot,
                   const std::string& title, std::ostream& out) {
  std::ofstream os(dir / "results.csv");
  write_results_csv(os, class_names(cfg), rows);
  if (!os) throw ConfigError("failed writing results.csv");
  out << "results: " << (dir / "results.csv").string() << " (" << rows.size() << " rows)\n";
  if (plot) {
    write_text(dir / "miou_vs_snr.svg", render_miou_svg(rows, title));
    out << "plot: " << (dir / "miou_vs_snr.svg").string() << "\n";
  }
}

fs::path train_model(SemanticCodec& model, const RunConfig& cfg, const Dataset& data, const fs::path& dir,
                     std::ostream& out) {
  Trainer trainer(model, cfg.train, cfg.channel, cfg.loss, cfg.data.spec);
  std::ofstream log(dir / "train_log.csv");
  log << kTrainLogHeader << '\n';
  const auto every = std::max(1, cfg.train.iterations / 20);
  trainer.run(data, &log, dir / "checkpoints", [&](std::uint64_t it, const StepResult& r) {
    if (it % every == 0) out << "iter " << it << " loss " << r.loss << " snr " << r.snr_db << "\n" << std::flush;
  });
  return dir / "checkpoints" / "final.ckpt";
}

int cmd_train(const RunConfig& cfg, const fs::path& base, std::ostream& out) {
  auto data = make_train_dataset(cfg);
  const fs::path dir = make_run_dir(base, cfg);
  out << "run directory: " << dir.string() << "\n";
  SemanticCodec model(cfg.codec, model_seed(cfg));
  if (!cfg.init_from.empty()) {
    const auto n = transfer_init(model, load_checkpoint(cfg.init_from));
    out << "transferred " << n << " tensors from " << cfg.init_from << "\n";
  }
  const fs::path ck = train_model(model, cfg, *data, dir, out);
  out << "checkpoint: " << ck.string() << " hash " << file_hash(ck) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& base, const std::string& checkpoint, std::ostream& out) {
  auto model = load_model(checkpoint);
  check_model_classes(*model, cfg, "checkpoint");
  auto data = make_val_dataset(cfg);
  const fs::path dir = make_run_dir(base, cfg);
  EvalConfig ec = make_eval_config(cfg);
  ec.snr_grid = {cfg.channel.snr_db};
  const auto pts = evaluate(*model, *data, cfg.channel, ec);
  const double r = compression_ratio(16, 16, model->config().k_channels);
  std::vector<ResultRow> rows{make_row("semantic", cfg.channel.velocity_mps * 3.6, r, pts[0].snr_db, pts[0].cm, eval_subset(cfg))};
  out << "mIoU at " << pts[0].snr_db << " dB: " << rows[0].miou << "\n";
  write_results(dir, cfg, rows, false, "", out);
  return 0;
}

int cmd_sweep_snr(const RunConfig& cfg, const fs::path& base, const std::string& checkpoint, bool with_baseline,
                  bool plot, std::ostream& out) {
  auto model = load_model(checkpoint);
  check_model_classes(*model, cfg, "checkpoint");
  std::unique_ptr<SemanticCodec> segmenter;
  if (with_baseline) {
    segmenter = load_model(cfg.baseline.segmenter);
    check_model_classes(*segmenter, cfg, "baseline segmenter");
  }
  auto data = make_val_dataset(cfg);
  const fs::path dir = make_run_dir(base, cfg);
  const EvalConfig ec = make_eval_config(cfg);
  const auto subset = eval_subset(cfg);
  const double r = compression_ratio(16, 16, model->config().k_channels);
  std::vector<ResultRow> rows;
  for (double v : cfg.eval.velocities_kmh) {
    ChannelConfig ch = cfg.channel;
    ch.velocity_mps = v / 3.6;
    for (const auto& p : evaluate(*model, *data, ch, ec)) {
      rows.push_back(make_row("semantic", v, r, p.snr_db, p.cm, subset));
      out << "semantic v=" << v << " snr=" << p.snr_db << " miou=" << rows.back().miou << "\n" << std::flush;
    }
    if (segmenter) {
      for (const auto& p : evaluate_baseline(*segmenter, *data, ch, cfg.baseline, ec)) {
        rows.push_back(make_row(baseline_scheme(cfg.baseline), v, p.mean_r, p.snr_db, p.cm, subset));
        out << baseline_scheme(cfg.baseline) << " v=" << v << " snr=" << p.snr_db << " miou=" << rows.back().miou
            << " decoded=" << p.decode_success << "\n" << std::flush;
      }
    }
  }
  write_results(dir, cfg, rows, plot, "mIoU versus SNR", out);
  return 0;
}

int cmd_sweep_compression(const RunConfig& cfg, const fs::path& base, const std::vector<std::string>& specs,
                          bool with_baseline, std::ostream& out) {
  if (specs.empty()) throw ConfigError("sweep-compression needs at least one --checkpoint K=PATH");
  std::vector<std::pair<int, std::string>> entries;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--checkpoint expects K=PATH, got '" + s + "'");
    int k = 0;
    try {
      k = std::stoi(s.substr(0, eq));
    } catch (const std::exception&) {
      throw ConfigError("--checkpoint expects an integer K, got '" + s.substr(0, eq) + "'");
    }
    entries.emplace_back(k, s.substr(eq + 1));
  }
  std::vector<std::pair<int, std::unique_ptr<SemanticCodec>>> models;
  for (const auto& [k, path] : entries) {
    if (!fs::exists(path)) throw ConfigError("missing checkpoint for K=" + std::to_string(k) + ": " + path);
    auto m = load_model(path);
    if (m->config().k_channels != k) {
      throw ConfigError("checkpoint for K=" + std::to_string(k) + " has K=" + std::to_string(m->config().k_channels));
    }
    check_model_classes(*m, cfg, "checkpoint for K=" + std::to_string(k));
    models.emplace_back(k, std::move(m));
  }
  std::unique_ptr<SemanticCodec> segmenter;
  if (with_baseline) {
    segmenter = load_model(cfg.baseline.segmenter);
    check_model_classes(*segmenter, cfg, "baseline segmenter");
  }
  auto data = make_val_dataset(cfg);
  const fs::path dir = make_run_dir(base, cfg);
  EvalConfig ec = make_eval_config(cfg);
  ec.snr_grid = {cfg.channel.snr_db};
  const auto subset = eval_subset(cfg);
  const double v = cfg.channel.velocity_mps * 3.6;
  std::vector<ResultRow> rows;
  for (const auto& [k, m] : models) {
    const double r = compression_ratio(16, 16, k);
    const auto pts = evaluate(*m, *data, cfg.channel, ec);
    rows.push_back(make_row("semantic", v, r, pts[0].snr_db, pts[0].cm, subset));
    out << "semantic K=" << k << " R=" << r << " miou=" << rows.back().miou << "\n";
    if (segmenter) {
      BaselineConfig b = cfg.baseline;
      b.target_r = r;
      const auto bp = evaluate_baseline(*segmenter, *data, cfg.channel, b, ec);
      rows.push_back(make_row(baseline_scheme(b), v, bp[0].mean_r, bp[0].snr_db, bp[0].cm, subset));
      out << baseline_scheme(b) << " target R=" << r << " achieved R=" << bp[0].mean_r << " miou=" << rows.back().miou
          << "\n";
    }
  }
  write_results(dir, cfg, rows, false, "", out);
  return 0;
}

int cmd_baseline(const RunConfig& cfg, const fs::path& base, bool plot, std::ostream& out) {
  auto segmenter = load_model(cfg.baseline.segmenter);
  check_model_classes(*segmenter, cfg, "baseline segmenter");
  auto data = make_val_dataset(cfg);
  const fs::path dir = make_run_dir(base, cfg);
  const EvalConfig ec = make_eval_config(cfg);
  const auto subset = eval_subset(cfg);
  std::vector<ResultRow> rows;
  for (double v : cfg.eval.velocities_kmh) {
    ChannelConfig ch = cfg.channel;
    ch.velocity_mps = v / 3.6;
    for (const auto& p : evaluate_baseline(*segmenter, *data, ch, cfg.baseline, ec)) {
      rows.push_back(make_row(baseline_scheme(cfg.baseline), v, p.mean_r, p.snr_db, p.cm, subset));
      out << "v=" << v << " snr=" << p.snr_db << " miou=" << rows.back().miou << " decoded=" << p.decode_success
          << " coded_ber=" << p.coded_ber << "\n" << std::flush;
    }
  }
  write_results(dir, cfg, rows, plot, "Baseline mIoU versus SNR", out);
  return 0;
}

struct Variant {
  std::string name;
  RunConfig cfg;
  std::string init_from_variant;  // name of a variant whose checkpoint seeds this one
};

int cmd_ablate(const RunConfig& cfg, const fs::path& base, const std::string& axis, std::ostream& out) {
  std::vector<Variant> variants;
  if (axis == "stb_combo") {
    auto combos = stb_combinations();
    // The reference combination trains from scratch; the others start from it.
    const std::vector<int> reference = combos.back();
    std::rotate(combos.rbegin(), combos.rbegin() + 1, combos.rend());
    for (const auto& d : combos) {
      RunConfig c = cfg;
      c.codec.depths = d;
      std::string name = "[";
      for (std::size_t i = 0; i < d.size(); ++i) name += (i ? " " : "") + std::to_string(d[i]);
      name += "]";
      variants.push_back({name, c, d == reference ? "" : variants.front().name});
    }
  } else if (axis == "loss") {
    RunConfig eq = cfg;
    eq.loss.ohem_enabled = false;
    eq.loss.use_iou = true;
    eq.loss.use_weights = true;
    RunConfig ce = eq;
    ce.loss.use_iou = false;
    ce.loss.use_weights = false;
    variants.push_back({"importance_aware", eq, ""});
    variants.push_back({"cross_entropy", ce, ""});
  } else if (axis == "ohem") {
    RunConfig off = cfg;
    off.loss.ohem_enabled = false;
    RunConfig on = cfg;
    on.loss.ohem_enabled = true;
    variants.push_back({"without_ohem", off, ""});
    variants.push_back({"with_ohem", on, ""});
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (stb_combo | loss | ohem)");
  }

  auto data = make_train_dataset(cfg);
  auto val = make_val_dataset(cfg);
  const fs::path dir = make_run_dir(base, cfg);
  EvalConfig ec = make_eval_config(cfg);
  ec.snr_grid = {cfg.channel.snr_db};
  const auto subset = eval_subset(cfg);
  std::map<std::string, fs::path> checkpoints;
  std::vector<ResultRow> rows;
  for (auto& v : variants) {
    resolve(v.cfg);
    out << "variant " << v.name << "\n" << std::flush;
    const fs::path vdir = dir / ("variant_" + std::to_string(rows.size()));
    fs::create_directories(vdir);
    write_text(vdir / "config.yaml", to_yaml(v.cfg));
    SemanticCodec model(v.cfg.codec, model_seed(v.cfg));
    if (!v.init_from_variant.empty()) {
      const auto n = transfer_init(model, load_checkpoint(checkpoints.at(v.init_from_variant)));
      out << "  transferred " << n << " tensors from " << v.init_from_variant << "\n";
    }
    checkpoints[v.name] = train_model(model, v.cfg, *data, vdir, out);
    const auto pts = evaluate(model, *val, v.cfg.channel, ec);
    rows.push_back(make_row(v.name, v.cfg.channel.velocity_mps * 3.6, compression_ratio(16, 16, v.cfg.codec.k_channels),
                            pts[0].snr_db, pts[0].cm, subset));
    out << "  miou " << rows.back().miou << "\n";
  }

  const auto names = class_names(cfg);
  std::ofstream table(dir / "ablation.csv");
  table << "class";
  for (const auto& r : rows) table << ',' << r.scheme;
  table << '\n' << std::setprecision(10);
  for (std::size_t c = 0; c < names.size(); ++c) {
    table << names[c];
    for (const auto& r : rows) {
      table << ',';
      if (r.iou[c]) table << *r.iou[c];
    }
    table << '\n';
  }
  table << "miou";
  for (const auto& r : rows) table << ',' << r.miou;
  table << '\n';
  if (!table) throw ConfigError("failed writing ablation.csv");
  out << "ablation table: " << (dir / "ablation.csv").string() << "\n";
  write_results(dir, cfg, rows, false, "", out);
  return 0;
}

int cmd_plot(const std::string& input, const std::string& output, const std::string& title, std::ostream& out) {
  std::ifstream is(input);
  if (!is) throw ConfigError("cannot read " + input);
  const ResultsTable t = read_results_csv(is);
  fs::path dest = output.empty() ? fs::path(input).replace_extension(".svg") : fs::path(output);
  write_text(dest, render_miou_svg(t.rows, title));
  out << "plot: " << dest.string() << "\n";
  return 0;
}

}  // namespace

std::vector<std::vector<int>> stb_combinations() { return {{3, 5, 7, 9}, {2, 2, 2, 18}, {2, 2, 9, 9}, {2, 2, 18, 2}}; }

fs::path make_run_dir(const fs::path& base, const RunConfig& cfg) {
  const std::string stem = timestamp() + "-" + config_hash(cfg);
  fs::create_directories(base);
  fs::path dir = base / stem;
  for (int i = 1; fs::exists(dir); ++i) dir = base / (stem + "-" + std::to_string(i));
  fs::create_directories(dir);
  write_text(dir / "config.yaml", to_yaml(cfg));
  return dir;
}

int run_cli(int argc, const char* const* argv, char** envp, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic image transmission over fading channels"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "YAML config file");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", g.out, "Base directory for run outputs");

  std::string checkpoint;
  std::vector<std::string> k_checkpoints;
  std::string axis;
  std::string plot_in;
  std::string plot_out;
  std::string plot_title = "mIoU versus SNR";
  bool plot = false;
  bool with_baseline = false;

  auto* train = app.add_subcommand("train", "Train the semantic codec");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint at channel.snr_db");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  auto* sweep = app.add_subcommand("sweep-snr", "mIoU versus SNR for each eval velocity");
  sweep->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  sweep->add_flag("--plot", plot, "Also write an SVG plot");
  sweep->add_flag("--baseline", with_baseline, "Include the JPEG+LDPC+QAM scheme (needs baseline.segmenter)");
  auto* comp = app.add_subcommand("sweep-compression", "mIoU versus compression ratio at channel.snr_db");
  comp->add_option("--checkpoint", k_checkpoints, "K=PATH, repeatable")->required();
  comp->add_flag("--baseline", with_baseline, "Include the JPEG+LDPC+QAM scheme at matching R");
  auto* base = app.add_subcommand("baseline", "Evaluate the JPEG+LDPC+QAM pipeline");
  base->add_flag("--plot", plot, "Also write an SVG plot");
  auto* ablate = app.add_subcommand("ablate", "Train and compare variants along one axis");
  ablate->add_option("--axis", axis, "stb_combo | loss | ohem")->required();
  auto* plotc = app.add_subcommand("plot", "Render a results CSV as SVG");
  plotc->add_option("--input", plot_in, "results.csv")->required();
  plotc->add_option("--output", plot_out, "SVG path (default: input with .svg)");
  plotc->add_option("--title", plot_title, "Plot title");

  for (auto* sub : {train, eval, sweep, comp, base, ablate}) sub->allow_extras();

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*plotc) return cmd_plot(plot_in, plot_out, plot_title, out);
    CLI::App* active = app.get_subcommands().front();
    const RunConfig cfg = build_config(g, active->remaining(), envp);
    if (*train) return cmd_train(cfg, g.out, out);
    if (*eval) return cmd_eval(cfg, g.out, checkpoint, out);
    if (*sweep) return cmd_sweep_snr(cfg, g.out, checkpoint, with_baseline, plot, out);
    if (*comp) return cmd_sweep_compression(cfg, g.out, k_checkpoints, with_baseline, out);
    if (*base) return cmd_baseline(cfg, g.out, plot, out);
    if (*ablate) return cmd_ablate(cfg, g.out, axis, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace semcom::cli
