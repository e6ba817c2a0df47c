// Command-line frontend: dataset generation, training, evaluation,
// anticipation, activation maps, the layout/loss sweep, gradient checking
// and file inspection. Exit codes: 0 success, 1 runtime failure, 2 usage
// error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mslstm/augment.hpp"
#include "mslstm/cam.hpp"
#include "mslstm/data.hpp"
#include "mslstm/errors.hpp"
#include "mslstm/eval.hpp"
#include "mslstm/gradcheck.hpp"
#include "mslstm/model.hpp"
#include "mslstm/train.hpp"

namespace {

using namespace mslstm;

// The shared --config option lives on the main app (config files are only
// processed there); fallthrough lets it be written after the subcommand
// name, e.g. `mslstm train --config run.cfg`.
void add_config_file(CLI::App* sub) {
  sub->fallthrough();
}

std::ofstream open_text(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + dir + "': " + ec.message());
  }
}

int run_gen_data(const GenConfig& cfg, const std::string& out_path) {
  const Dataset ds = generate(cfg);
  save_dataset(ds, out_path);
  std::printf("wrote %zu samples (%d classes, %d frames, ctx %d, act %d, "
              "flow %d) to %s\n",
              ds.samples.size(), ds.n_classes, ds.seq_len, ds.ctx_dim,
              ds.act_dim, ds.flow_dim, out_path.c_str());
  return 0;
}

struct TrainArgs {
  std::string data_path;
  std::string out_path;
  std::string arch = "multistage";
  std::string loss = "plgl";
  std::string frame_selection = "first";
  int hidden = kDefaultHiddenUnits;
  TrainConfig cfg;
  bool no_clip = false;
};

int run_train(const TrainArgs& args) {
  const Dataset ds = load_dataset(args.data_path);
  TrainConfig cfg = args.cfg;
  cfg.loss = loss_kind_from_name(args.loss);
  cfg.frame_selection = frame_selection_from_name(args.frame_selection);
  cfg.clip_gradients = !args.no_clip;

  ModelDims dims{ds.ctx_dim, ds.act_dim, ds.flow_dim, args.hidden,
                 ds.n_classes};
  MsLstmModel model = init_model(dims, arch_from_name(args.arch), cfg.seed);
  model.loss = cfg.loss;

  const std::vector<EpochStats> history = train(model, ds, cfg);
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::printf("epoch %zu/%d loss %.6f acc %.6f\n", e + 1, cfg.epochs,
                history[e].mean_loss, history[e].train_accuracy);
  }
  save_checkpoint(model, args.out_path);
  std::printf("saved %s\n", args.out_path.c_str());
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path,
             const std::string& pooling, const std::string& out_dir,
             int threads) {
  const MsLstmModel model = load_checkpoint(model_path);
  const Dataset ds = load_dataset(data_path);
  const EvalReport report =
      evaluate(model, ds, pooling_from_name(pooling), threads);
  std::printf("accuracy average %.6f last %.6f over %zu samples\n",
              report.accuracy_average, report.accuracy_last,
              report.sample_count);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_report(report, out_dir);
    std::printf("wrote %s/report.json and %s/anticipation.csv\n",
                out_dir.c_str(), out_dir.c_str());
  }
  return 0;
}

int run_anticipate(const std::string& model_path, const std::string& data_path,
                   const std::string& out_path, int threads) {
  const MsLstmModel model = load_checkpoint(model_path);
  const Dataset ds = load_dataset(data_path);
  const EvalReport report =
      evaluate(model, ds, Pooling::AveragePool, threads);

  char line[64];
  std::string csv = "t,accuracy\n";
  for (std::size_t t = 0; t < report.anticipation.size(); ++t) {
    std::snprintf(line, sizeof line, "%zu,%.6f\n", t + 1,
                  report.anticipation[t]);
    csv += line;
  }
  std::fputs(csv.c_str(), stdout);
  if (!out_path.empty()) {
    std::ofstream out = open_text(out_path);
    out << csv;
    if (!out) {
      throw IoError("write failed for '" + out_path + "'");
    }
  }
  return 0;
}

int run_cam(const std::string& input, std::optional<int> klass,
            const std::string& out_dir, int action_dim,
            std::uint64_t seed) {
  const FeatureMapFile file = load_feature_map(input);
  ensure_dir(out_dir);
  const Tensor scores = class_scores(file.fmap, file.weights);
  const int k = klass ? *klass : select_class(scores);
  const Tensor map = cam_map(file.fmap, file.weights, k);
  const Tensor gated = gated_features(file.fmap, map);

  std::printf("selected class %d of %d (score %.6f)\n", k,
              file.weights.n_classes(), scores(k));

  char line[128];
  {
    std::ofstream out = open_text(out_dir + "/cam_scores.csv");
    out << "class,score\n";
    for (int c = 0; c < scores.dim(0); ++c) {
      std::snprintf(line, sizeof line, "%d,%.6f\n", c, scores(c));
      out << line;
    }
  }
  {
    std::ofstream out = open_text(out_dir + "/cam_map.csv");
    for (int y = 0; y < map.dim(0); ++y) {
      for (int x = 0; x < map.dim(1); ++x) {
        std::snprintf(line, sizeof line, "%.6f%c", map(y, x),
                      x + 1 == map.dim(1) ? '\n' : ',');
        out << line;
      }
    }
  }
  {
    std::ofstream out = open_text(out_dir + "/gated.csv");
    out << "channel,y,x,value\n";
    for (int l = 0; l < gated.dim(0); ++l) {
      for (int y = 0; y < gated.dim(1); ++y) {
        for (int x = 0; x < gated.dim(2); ++x) {
          std::snprintf(line, sizeof line, "%d,%d,%d,%.6f\n", l, y, x,
                        gated(l, y, x));
          out << line;
        }
      }
    }
  }
  if (action_dim > 0) {
    const ActionFeatureHead head =
        init_action_head(file.fmap.channels(), file.fmap.height(),
                         file.fmap.width(), action_dim, seed);
    const Tensor features =
        action_feature_vector(file.fmap, file.weights, k, head);
    std::ofstream out = open_text(out_dir + "/action_features.csv");
    out << "index,value\n";
    for (int i = 0; i < features.dim(0); ++i) {
      std::snprintf(line, sizeof line, "%d,%.6f\n", i, features(i));
      out << line;
    }
  }
  std::printf("wrote activation maps to %s\n", out_dir.c_str());
  return 0;
}

struct AblateArgs {
  std::string data_path;
  std::string out_path;
  std::string frame_selection = "first";
  int hidden = 32;
  TrainConfig cfg;
  bool no_clip = false;
};

int run_ablate(const AblateArgs& args) {
  const Dataset ds = load_dataset(args.data_path);
  TrainConfig cfg = args.cfg;
  cfg.frame_selection = frame_selection_from_name(args.frame_selection);
  cfg.clip_gradients = !args.no_clip;
  const ModelDims dims{ds.ctx_dim, ds.act_dim, ds.flow_dim, args.hidden,
                       ds.n_classes};

  const std::vector<AblationCell> cells = ablation_sweep(ds, dims, cfg);
  for (const AblationCell& c : cells) {
    std::printf("%-22s accuracy average %.6f last %.6f\n", c.label.c_str(),
                c.accuracy_average, c.accuracy_last);
  }
  if (!args.out_path.empty()) {
    write_ablation_csv(cells, args.out_path);
    std::printf("wrote %s\n", args.out_path.c_str());
  }
  return 0;
}

int run_gradcheck(const GradCheckConfig& cfg, const std::string& arch) {
  GradCheckConfig full = cfg;
  full.arch = arch_from_name(arch);
  const GradCheckResult result = run_gradient_check(full);
  for (const GradCheckKindResult& kr : result.kinds) {
    std::printf("%-5s max relative error %.3e over %zu entries\n",
                loss_kind_name(kr.kind).c_str(), kr.max_rel_err, kr.checked);
  }
  std::printf("gradcheck %s (max %.3e, tolerance %.3e)\n",
              result.pass ? "PASS" : "FAIL", result.max_rel_err,
              full.tolerance);
  return result.pass ? 0 : 1;
}

int run_inspect(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  char magic[4] = {};
  probe.read(magic, 4);
  if (probe.gcount() != 4) {
    throw FormatError(path + ": too short for a magic tag", 0);
  }
  probe.close();
  const std::string tag(magic, 4);

  if (tag == "FSD1") {
    const Dataset ds = load_dataset(path);
    std::printf("dataset: %zu samples, %d classes, %d frames, ctx %d, "
                "act %d, flow %d\n",
                ds.samples.size(), ds.n_classes, ds.seq_len, ds.ctx_dim,
                ds.act_dim, ds.flow_dim);
    return 0;
  }
  if (tag == "MSL1") {
    const MsLstmModel model = load_checkpoint(path);
    std::size_t count = 0;
    for (const Tensor* t : model.parameters()) {
      count += t->size();
    }
    std::printf("checkpoint: arch %s, loss %s, %s, seed %llu, %zu weights\n",
                arch_name(model.arch).c_str(),
                loss_kind_name(model.loss).c_str(),
                dims_str(model.dims).c_str(),
                static_cast<unsigned long long>(model.seed), count);
    return 0;
  }
  if (tag == "FMP1") {
    const FeatureMapFile file = load_feature_map(path);
    std::printf("feature map: %d channels, %d x %d, %d classes\n",
                file.fmap.channels(), file.fmap.height(), file.fmap.width(),
                file.weights.n_classes());
    return 0;
  }
  throw FormatError(path + ": unrecognised magic tag", 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage recurrent action recognition toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read options from a TOML-style file; put each command's "
                 "options in its own [command] section");
  app.allow_config_extras(CLI::config_extras_mode::error);
  int exit_code = 0;

  // gen-data
  GenConfig gen_cfg;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--classes", gen_cfg.n_classes, "Number of classes")
      ->check(CLI::PositiveNumber);
  gen->add_option("--samples", gen_cfg.samples, "Number of samples")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seq-len", gen_cfg.seq_len, "Frames per sample")
      ->check(CLI::PositiveNumber);
  gen->add_option("--ctx-dim", gen_cfg.ctx_dim, "Context feature dimension")
      ->check(CLI::PositiveNumber);
  gen->add_option("--act-dim", gen_cfg.act_dim, "Action feature dimension")
      ->check(CLI::PositiveNumber);
  gen->add_option("--flow-dim", gen_cfg.flow_dim,
                  "Flow feature dimension (0 disables the stream)")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--noise-sigma", gen_cfg.noise_sigma, "Noise scale")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--ctx-reliability", gen_cfg.ctx_reliability,
                  "Per-frame probability of the true context prototype")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--ambiguity-horizon", gen_cfg.ambiguity_horizon,
                  "Frame at which action features become unambiguous")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_cfg.seed, "Generator seed");
  add_config_file(gen);
  gen->callback([&] { exit_code = run_gen_data(gen_cfg, gen_out); });

  // train
  TrainArgs train_args;
  CLI::App* tr = app.add_subcommand("train", "Train a model on a dataset");
  tr->add_option("--data", train_args.data_path, "Dataset path")->required();
  tr->add_option("--out", train_args.out_path, "Checkpoint output path")
      ->required();
  tr->add_option("--arch", train_args.arch,
                 "Layout: multistage, concat, swapped, parallel");
  tr->add_option("--loss", train_args.loss, "Loss: ce, egl, lgl, plgl");
  tr->add_option("--hidden", train_args.hidden, "Hidden units per decoder")
      ->check(CLI::PositiveNumber);
  tr->add_option("--epochs", train_args.cfg.epochs, "Training epochs")
      ->required()
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--lr", train_args.cfg.learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber);
  tr->add_option("--momentum", train_args.cfg.momentum, "Momentum")
      ->check(CLI::Range(0.0, 1.0));
  tr->add_option("--weight-decay", train_args.cfg.weight_decay, "L2 penalty")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--batch", train_args.cfg.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber);
  tr->add_option("--seed", train_args.cfg.seed, "Training seed");
  tr->add_option("--frames", train_args.cfg.frames,
                 "Frames kept per sample (0 keeps all)")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--frame-selection", train_args.frame_selection,
                 "Frame subsampling: first or random");
  tr->add_flag("--no-clip", train_args.no_clip, "Disable gradient clipping");
  tr->add_option("--clip-norm", train_args.cfg.clip_norm,
                 "Global gradient norm ceiling")
      ->check(CLI::PositiveNumber);
  tr->add_option("--threads", train_args.cfg.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  add_config_file(tr);
  tr->callback([&] { exit_code = run_train(train_args); });

  // eval
  std::string eval_model, eval_data, eval_out_dir;
  std::string eval_pooling = "average";
  int eval_threads = 1;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--model", eval_model, "Checkpoint path")->required();
  ev->add_option("--data", eval_data, "Dataset path")->required();
  ev->add_option("--pooling", eval_pooling, "Pooling: average or last");
  ev->add_option("--out-dir", eval_out_dir,
                 "Directory for report.json and anticipation.csv");
  ev->add_option("--threads", eval_threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  add_config_file(ev);
  ev->callback([&] {
    exit_code =
        run_eval(eval_model, eval_data, eval_pooling, eval_out_dir, eval_threads);
  });

  // anticipate
  std::string ant_model, ant_data, ant_out;
  int ant_threads = 1;
  CLI::App* ant = app.add_subcommand(
      "anticipate", "Accuracy after observing 1..K frames of each sequence");
  ant->add_option("--model", ant_model, "Checkpoint path")->required();
  ant->add_option("--data", ant_data, "Dataset path")->required();
  ant->add_option("--out", ant_out, "Also write the curve to this CSV path");
  ant->add_option("--threads", ant_threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  add_config_file(ant);
  ant->callback([&] {
    exit_code = run_anticipate(ant_model, ant_data, ant_out, ant_threads);
  });

  // cam
  std::string cam_input, cam_out_dir = ".";
  int cam_class = -1;
  int cam_action_dim = 0;
  std::uint64_t cam_seed = 0;
  CLI::App* cam = app.add_subcommand(
      "cam", "Class activation maps from a feature-map file");
  cam->add_option("--input", cam_input, "Feature-map path")->required();
  cam->add_option("--class", cam_class,
                  "Class index (default: highest score)");
  cam->add_option("--out-dir", cam_out_dir, "Output directory");
  cam->add_option("--action-dim", cam_action_dim,
                  "Also project gated features to this dimension")
      ->check(CLI::NonNegativeNumber);
  cam->add_option("--seed", cam_seed, "Projection head seed");
  add_config_file(cam);
  cam->callback([&] {
    exit_code = run_cam(
        cam_input,
        cam_class >= 0 ? std::optional<int>(cam_class) : std::nullopt,
        cam_out_dir, cam_action_dim, cam_seed);
  });

  // ablate
  AblateArgs ablate_args;
  CLI::App* ab =
      app.add_subcommand("ablate", "Train every layout/loss combination");
  ab->add_option("--data", ablate_args.data_path, "Dataset path")->required();
  ab->add_option("--out", ablate_args.out_path, "Results CSV path");
  ab->add_option("--hidden", ablate_args.hidden, "Hidden units per decoder")
      ->check(CLI::PositiveNumber);
  ab->add_option("--epochs", ablate_args.cfg.epochs, "Training epochs")
      ->required()
      ->check(CLI::NonNegativeNumber);
  ab->add_option("--lr", ablate_args.cfg.learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber);
  ab->add_option("--momentum", ablate_args.cfg.momentum, "Momentum")
      ->check(CLI::Range(0.0, 1.0));
  ab->add_option("--weight-decay", ablate_args.cfg.weight_decay, "L2 penalty")
      ->check(CLI::NonNegativeNumber);
  ab->add_option("--batch", ablate_args.cfg.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber);
  ab->add_option("--seed", ablate_args.cfg.seed, "Shared seed for all cells");
  ab->add_option("--frames", ablate_args.cfg.frames,
                 "Frames kept per sample (0 keeps all)")
      ->check(CLI::NonNegativeNumber);
  ab->add_option("--frame-selection", ablate_args.frame_selection,
                 "Frame subsampling: first or random");
  ab->add_flag("--no-clip", ablate_args.no_clip, "Disable gradient clipping");
  ab->add_option("--clip-norm", ablate_args.cfg.clip_norm,
                 "Global gradient norm ceiling")
      ->check(CLI::PositiveNumber);
  ab->add_option("--threads", ablate_args.cfg.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  add_config_file(ab);
  ab->callback([&] { exit_code = run_ablate(ablate_args); });

  // gradcheck
  GradCheckConfig gc_cfg;
  std::string gc_arch = "multistage";
  CLI::App* gc = app.add_subcommand(
      "gradcheck", "Compare tape gradients against finite differences");
  gc->add_option("--arch", gc_arch,
                 "Layout: multistage, concat, swapped, parallel");
  gc->add_option("--ctx-dim", gc_cfg.dims.ctx_dim, "Context dimension")
      ->check(CLI::PositiveNumber);
  gc->add_option("--act-dim", gc_cfg.dims.act_dim, "Action dimension")
      ->check(CLI::PositiveNumber);
  gc->add_option("--flow-dim", gc_cfg.dims.flow_dim, "Flow dimension")
      ->check(CLI::NonNegativeNumber);
  gc->add_option("--hidden", gc_cfg.dims.hidden, "Hidden units")
      ->check(CLI::PositiveNumber);
  gc->add_option("--classes", gc_cfg.dims.n_classes, "Class count")
      ->check(CLI::PositiveNumber);
  gc->add_option("--seq-len", gc_cfg.seq_len, "Frames per sample")
      ->check(CLI::PositiveNumber);
  gc->add_option("--batch", gc_cfg.batch, "Batch size")
      ->check(CLI::PositiveNumber);
  gc->add_option("--seed", gc_cfg.seed, "Seed");
  gc->add_option("--step", gc_cfg.step, "Finite-difference step")
      ->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gc_cfg.tolerance, "Relative error ceiling")
      ->check(CLI::PositiveNumber);
  add_config_file(gc);
  gc->callback([&] { exit_code = run_gradcheck(gc_cfg, gc_arch); });

  // inspect
  std::string inspect_path;
  CLI::App* ins =
      app.add_subcommand("inspect", "Describe a dataset, checkpoint or "
                         "feature-map file");
  ins->add_option("--input", inspect_path, "File path")->required();
  add_config_file(ins);
  ins->callback([&] { exit_code = run_inspect(inspect_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
