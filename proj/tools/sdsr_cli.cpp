// sdsr: batch front end for toy-corpus generation, training, synthesis and
// evaluation. Exit codes: 0 success, 2 input/validation, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <list>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdsr/dataset.hpp"
#include "sdsr/error.hpp"
#include "sdsr/evaluation.hpp"
#include "sdsr/imaging.hpp"
#include "sdsr/model_io.hpp"
#include "sdsr/run_config.hpp"
#include "sdsr/sdsr.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Config file, then --set pairs, then dedicated flags; later wins.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::list<std::pair<std::string, std::string>> named;  // stable addresses for CLI11

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "flat key = value config file");
    cmd->add_option("--set", sets, "override one config key (key=value); repeatable");
  }
  void flag(CLI::App* cmd, const std::string& name, const std::string& key,
            const std::string& help) {
    auto& entry = named.emplace_back(key, std::string{});
    cmd->add_option(name, entry.second, help);
  }
  sdsr::RunConfig resolve() const {
    sdsr::RunConfig rc;
    if (!config_file.empty()) rc.load_file(config_file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw sdsr::InvalidInput("--set expects key=value, got '" + kv + "'");
      rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : named)
      if (!value.empty()) rc.set(key, value);
    return rc;
  }
};

std::string key_help() {
  std::string out = "\nConfig keys (file or --set key=value):\n";
  for (const auto& d : sdsr::RunConfig::documented_keys()) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-20s default %-12s %s\n", d.key, d.default_value,
                  d.description);
    out += line;
  }
  return out;
}

void print_trace(const char* chain, std::size_t level, const sdsr::LevelResult& r) {
  std::cout << "  " << chain << " level " << level + 1 << ": objective";
  for (double f : r.objective_trace) std::cout << ' ' << f;
  std::cout << "\n    rejected updates " << r.rejected_updates << ", dead-atom replacements "
            << r.replacement_epochs.size() << '\n';
}

int cmd_gen_toy(const ConfigFlags& flags, const fs::path& out_dir) {
  const sdsr::RunConfig rc = flags.resolve();
  const sdsr::ToyCorpus corpus = sdsr::generate_toy_corpus(rc.toy_spec(), out_dir);
  std::cout << corpus.manifest_path.string() << '\n';
  std::cerr << "correlation intra " << corpus.stats.intra_subject_correlation << " inter "
            << corpus.stats.inter_subject_correlation << '\n';
  return kExitOk;
}

int cmd_downsample(const ConfigFlags& flags, const fs::path& manifest, const fs::path& out_dir) {
  const sdsr::RunConfig rc = flags.resolve();
  if (rc.lr_size == 0) throw sdsr::InvalidInput("downsample: --lr-size is required");
  sdsr::make_synthetic_probes(sdsr::load_manifest(manifest), rc.lr_size, out_dir, rc.prefilter);
  std::cout << (out_dir / "manifest.csv").string() << '\n';
  return kExitOk;
}

int cmd_train(const ConfigFlags& flags, const fs::path& manifest, const fs::path& model_out) {
  const sdsr::RunConfig rc = flags.resolve();
  const sdsr::TrainingPairs pairs =
      sdsr::load_training_pairs(sdsr::load_manifest(manifest), rc.lr_size, rc.prefilter);
  const sdsr::SdsrConfig cfg = rc.sdsr_config(pairs.low_shape, pairs.high_shape);
  const auto t0 = std::chrono::steady_clock::now();
  const sdsr::TrainResult result = sdsr::train(pairs.low, pairs.high, cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "trained " << cfg.levels << "-level model on " << pairs.subject_ids.size()
            << " subjects (" << pairs.low_shape.width << "x" << pairs.low_shape.height << " -> "
            << pairs.high_shape.width << "x" << pairs.high_shape.height << ") in " << secs
            << " s\n";
  for (std::size_t j = 0; j < result.low_levels.size(); ++j) {
    print_trace("low ", j, result.low_levels[j]);
    print_trace("high", j, result.high_levels[j]);
  }
  sdsr::write_model(result.model, model_out);
  std::cout << model_out.string() << '\n';
  return kExitOk;
}

int cmd_synth(const ConfigFlags& flags, const fs::path& model_path,
              const std::vector<std::string>& inputs, const fs::path& out_dir, bool resize) {
  const sdsr::RunConfig rc = flags.resolve();
  const sdsr::SdsrModel model = sdsr::read_model(model_path);
  const sdsr::SdsrConfig& cfg = model.config;
  const sdsr::Synthesizer synth(model);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw sdsr::IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (const auto& in : inputs) {
    sdsr::GrayImage probe = sdsr::load_image(in);
    if (probe.shape() != cfg.lr_shape) {
      if (!resize && !rc.resize)
        throw sdsr::InvalidInput(in + ": image is " + std::to_string(probe.width()) + "x" +
                                 std::to_string(probe.height()) + ", model expects " +
                                 std::to_string(cfg.lr_shape.width) + "x" +
                                 std::to_string(cfg.lr_shape.height) + " (use --resize)");
      probe = sdsr::bicubic_resize(probe, cfg.lr_shape.width, cfg.lr_shape.height);
    }
    const auto t0 = std::chrono::steady_clock::now();
    const sdsr::Matrix hr = synth.synthesize(sdsr::vectorize(probe), rc.solver());
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const fs::path out = out_dir / (fs::path(in).stem().string() + "_sdsr.pgm");
    sdsr::save_image(sdsr::devectorize(hr, cfg.hr_shape.width, cfg.hr_shape.height), out);
    std::cout << out.string() << ' ' << ms << " ms\n";
  }
  return kExitOk;
}

int cmd_eval(const ConfigFlags& flags, const fs::path& model_path, const fs::path& manifest,
             const std::string& report_prefix) {
  const sdsr::RunConfig rc = flags.resolve();
  const sdsr::SdsrModel model = sdsr::read_model(model_path);
  const sdsr::EvalReport report =
      sdsr::evaluate_pipeline(model, sdsr::load_manifest(manifest), rc.eval_options());
  sdsr::write_report_csv(report, report_prefix + ".csv");
  sdsr::write_report_json(report, report_prefix + ".json");
  for (const auto& m : report.methods) {
    std::cout << m.method << ": rank-1 " << m.cmc.accuracy_at(1) << ", PSNR " << m.mean_psnr
              << " dB, SSIM " << m.mean_ssim << ", " << m.mean_latency_ms << " ms/image\n";
  }
  std::cout << report_prefix << ".csv\n" << report_prefix << ".json\n";
  return kExitOk;
}

int cmd_model_info(const fs::path& model_path) {
  const sdsr::SdsrModel model = sdsr::read_model(model_path);
  std::cout << "format_version " << model.format_version << "\nconfig "
            << sdsr::config_to_json(model.config) << '\n';
  for (std::size_t j = 0; j < model.levels(); ++j)
    std::cout << "level " << j + 1 << ": low " << model.low_dicts[j].signal_dim() << "x"
              << model.low_dicts[j].n_atoms() << ", high " << model.high_dicts[j].signal_dim()
              << "x" << model.high_dicts[j].n_atoms() << '\n';
  std::cout << "mapping " << model.mapping.rows() << "x" << model.mapping.cols() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep sparse representation synthesis of high-resolution faces"};
  app.require_subcommand(1);
  app.footer(key_help());

  ConfigFlags toy_flags, down_flags, train_flags, synth_flags, eval_flags;

  std::string toy_out = "toy_corpus";
  auto* gen = app.add_subcommand("gen-toy", "generate a procedural toy corpus and manifest");
  gen->add_option("--out", toy_out, "output directory")->capture_default_str();
  toy_flags.add_to(gen);
  toy_flags.flag(gen, "--n-subjects", "n_subjects", "subjects (default 40)");
  toy_flags.flag(gen, "--hr-size", "hr_size", "high-resolution side (default 24)");
  toy_flags.flag(gen, "--lr-size", "lr_size", "low-resolution side (default 6)");
  toy_flags.flag(gen, "--probes", "probes_per_subject", "probes per subject (default 2)");
  toy_flags.flag(gen, "--perturbation", "perturbation", "probe jitter in [0,1] (default 0.5)");
  toy_flags.flag(gen, "--seed", "toy_seed", "corpus seed (default 7)");

  std::string down_manifest, down_out = "downsampled";
  auto* down = app.add_subcommand("downsample", "bicubic-downsample every probe of a manifest");
  down->add_option("--manifest", down_manifest, "input manifest")->required();
  down->add_option("--out", down_out, "output directory")->capture_default_str();
  down_flags.add_to(down);
  down_flags.flag(down, "--lr-size", "lr_size", "target side length");
  down_flags.flag(down, "--prefilter", "prefilter", "none | box");

  std::string train_manifest, train_model = "model.sdsr";
  auto* trn = app.add_subcommand("train", "train an SDSR model on the gallery of a manifest");
  trn->add_option("--manifest", train_manifest, "training manifest")->required();
  trn->add_option("--model", train_model, "model output path")->capture_default_str();
  train_flags.add_to(trn);
  train_flags.flag(trn, "--atoms", "atoms", "atoms per level, e.g. 100,80 (default 100,80)");
  train_flags.flag(trn, "--lambda", "lambda", "sparsity weight(s) (default 0.85)");
  train_flags.flag(trn, "--epochs", "epochs", "epochs per level (default 30)");
  train_flags.flag(trn, "--lr-size", "lr_size", "low-resolution side (default: probe size)");
  train_flags.flag(trn, "--seed", "seed", "initialisation seed (default 0)");

  std::string synth_model, synth_out = "synth";
  std::vector<std::string> synth_inputs;
  bool synth_resize = false;
  auto* syn = app.add_subcommand("synth", "synthesise high-resolution images from probes");
  syn->add_option("--model", synth_model, "trained model")->required();
  syn->add_option("--out", synth_out, "output directory")->capture_default_str();
  syn->add_flag("--resize", synth_resize, "bicubic pre-resize inputs to the model's LR size");
  syn->add_option("inputs", synth_inputs, "low-resolution images")->required();
  synth_flags.add_to(syn);

  std::string eval_model, eval_manifest, eval_report = "report";
  auto* evl = app.add_subcommand("eval", "identification and quality report for a manifest");
  evl->add_option("--model", eval_model, "trained model")->required();
  evl->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
  evl->add_option("--report", eval_report, "output prefix for .csv and .json")
      ->capture_default_str();
  eval_flags.add_to(evl);
  eval_flags.flag(evl, "--ranks", "ranks", "CMC ranks, e.g. 1,5");
  eval_flags.flag(evl, "--baselines", "baselines", "bicubic,nearest (default bicubic)");
  eval_flags.flag(evl, "--metric", "metric", "euclidean | cosine");

  std::string info_model;
  auto* info = app.add_subcommand("model-info", "print the header of a model file");
  info->add_option("model", info_model, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (gen->parsed()) return cmd_gen_toy(toy_flags, toy_out);
    if (down->parsed()) return cmd_downsample(down_flags, down_manifest, down_out);
    if (trn->parsed()) return cmd_train(train_flags, train_manifest, train_model);
    if (syn->parsed()) return cmd_synth(synth_flags, synth_model, synth_inputs, synth_out, synth_resize);
    if (evl->parsed()) return cmd_eval(eval_flags, eval_model, eval_manifest, eval_report);
    if (info->parsed()) return cmd_model_info(info_model);
  } catch (const sdsr::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const sdsr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
