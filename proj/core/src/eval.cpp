#include "mslstm/eval.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "mslstm/errors.hpp"
#include "mslstm/parallel.hpp"
#include "mslstm/tape.hpp"

namespace mslstm {

namespace {

void check_dataset(const MsLstmModel& model, const Dataset& data) {
  if (data.samples.empty()) {
    throw ConfigError("evaluation requires at least one sample");
  }
  const ModelDims& d = model.dims;
  if (data.ctx_dim != d.ctx_dim || data.act_dim != d.act_dim ||
      data.flow_dim != d.flow_dim || data.n_classes != d.n_classes) {
    throw ConfigError(
        "dataset (ctx=" + std::to_string(data.ctx_dim) + " act=" +
        std::to_string(data.act_dim) + " flow=" + std::to_string(data.flow_dim) +
        " classes=" + std::to_string(data.n_classes) +
        ") does not match model (" + dims_str(d) + ")");
  }
}

Tensor head_rows(const Tensor& m, int count) {
  Tensor out({count, m.dim(1)});
  for (int t = 0; t < count; ++t) {
    for (int j = 0; j < m.dim(1); ++j) {
      out(t, j) = m(t, j);
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate(const MsLstmModel& model, const Dataset& data,
                    Pooling pooling, int threads) {
  check_dataset(model, data);
  const std::size_t n = data.samples.size();
  const int K = data.seq_len;
  const int N = data.n_classes;

  std::vector<int> pred_average(n), pred_last(n);
  std::vector<std::vector<int>> pred_prefix(n,
                                            std::vector<int>(static_cast<std::size_t>(K)));
  std::vector<Tape> tapes(worker_count(n, threads));

  parallel_for(n, threads, [&](std::size_t w, std::size_t i) {
    Tape& tape = tapes[w];
    const Sample& s = data.samples[i];

    tape.reset();
    TracedForward fw = forward_traced(tape, model, s.ctx, s.act, s.flow_ptr());
    Tensor pred = tape.value_tensor(fw.pred_second);
    pred_average[i] = argmax(mean_over_time(pred));
    pred_last[i] = argmax(pred.row(pred.dim(0) - 1));

    // The model only ever sees the first t frames of each prefix.
    for (int t = 1; t <= K; ++t) {
      Tensor ctx_p = head_rows(s.ctx, t);
      Tensor act_p = head_rows(s.act, t);
      Tensor flow_p;
      const Tensor* flow_ptr = nullptr;
      if (s.flow) {
        flow_p = head_rows(*s.flow, t);
        flow_ptr = &flow_p;
      }
      tape.reset();
      TracedForward pfw = forward_traced(tape, model, ctx_p, act_p, flow_ptr);
      Tensor ppred = tape.value_tensor(pfw.pred_second);
      pred_prefix[i][static_cast<std::size_t>(t - 1)] =
          argmax(mean_over_time(ppred));
    }
  });

  EvalReport report;
  report.arch = arch_name(model.arch);
  report.loss = loss_kind_name(model.loss);
  report.dims = model.dims;
  report.pooling = pooling;
  report.sample_count = n;
  report.seq_len = K;
  report.per_class_accuracy.assign(static_cast<std::size_t>(N), 0.0);
  report.class_counts.assign(static_cast<std::size_t>(N), 0);
  report.confusion.assign(static_cast<std::size_t>(N),
                          std::vector<int>(static_cast<std::size_t>(N), 0));
  report.anticipation.assign(static_cast<std::size_t>(K), 0.0);

  std::size_t hits_average = 0, hits_last = 0;
  std::vector<int> class_hits(static_cast<std::size_t>(N), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = data.samples[i].label;
    hits_average += pred_average[i] == label ? 1u : 0u;
    hits_last += pred_last[i] == label ? 1u : 0u;

    const int pooled =
        pooling == Pooling::AveragePool ? pred_average[i] : pred_last[i];
    report.class_counts[static_cast<std::size_t>(label)] += 1;
    class_hits[static_cast<std::size_t>(label)] += pooled == label ? 1 : 0;
    report.confusion[static_cast<std::size_t>(label)]
                    [static_cast<std::size_t>(pooled)] += 1;

    for (int t = 0; t < K; ++t) {
      if (pred_prefix[i][static_cast<std::size_t>(t)] == label) {
        report.anticipation[static_cast<std::size_t>(t)] += 1.0;
      }
    }
  }

  report.accuracy_average = static_cast<double>(hits_average) / n;
  report.accuracy_last = static_cast<double>(hits_last) / n;
  for (int c = 0; c < N; ++c) {
    const int count = report.class_counts[static_cast<std::size_t>(c)];
    report.per_class_accuracy[static_cast<std::size_t>(c)] =
        count > 0 ? static_cast<double>(class_hits[static_cast<std::size_t>(c)]) /
                        count
                  : 0.0;
  }
  for (int t = 0; t < K; ++t) {
    report.anticipation[static_cast<std::size_t>(t)] /= static_cast<double>(n);
  }
  return report;
}

void write_report(const EvalReport& report, const std::string& dir) {
  nlohmann::json j{
      {"arch", report.arch},
      {"loss", report.loss},
      {"pooling", pooling_name(report.pooling)},
      {"dims",
       {{"ctx_dim", report.dims.ctx_dim},
        {"act_dim", report.dims.act_dim},
        {"flow_dim", report.dims.flow_dim},
        {"hidden", report.dims.hidden},
        {"classes", report.dims.n_classes}}},
      {"samples", report.sample_count},
      {"seq_len", report.seq_len},
      {"accuracy", {{"average", report.accuracy_average},
                    {"last", report.accuracy_last}}},
      {"per_class_accuracy", report.per_class_accuracy},
      {"class_counts", report.class_counts},
      {"confusion", report.confusion},
      {"anticipation", report.anticipation},
  };

  const std::string json_path = dir + "/report.json";
  std::ofstream out(json_path);
  if (!out) {
    throw IoError("cannot open '" + json_path + "' for writing");
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("write failed for '" + json_path + "'");
  }
  out.close();

  const std::string csv_path = dir + "/anticipation.csv";
  std::ofstream csv(csv_path);
  if (!csv) {
    throw IoError("cannot open '" + csv_path + "' for writing");
  }
  csv << "t,accuracy\n";
  char line[64];
  for (std::size_t t = 0; t < report.anticipation.size(); ++t) {
    std::snprintf(line, sizeof line, "%zu,%.6f\n", t + 1,
                  report.anticipation[t]);
    csv << line;
  }
  if (!csv) {
    throw IoError("write failed for '" + csv_path + "'");
  }
}

std::string ablation_label(ArchVariant arch, LossKind loss) {
  std::string arch_part;
  switch (arch) {
    case ArchVariant::MultiStage:
      arch_part = "MS-LSTM";
      break;
    case ArchVariant::Concat:
      arch_part = "Concat-LSTM";
      break;
    case ArchVariant::Swapped:
      arch_part = "Swapped-LSTM";
      break;
    case ArchVariant::Parallel:
      arch_part = "Parallel-LSTM";
      break;
  }
  std::string loss_part;
  switch (loss) {
    case LossKind::CE:
      loss_part = "CE";
      break;
    case LossKind::EGL:
      loss_part = "EGL";
      break;
    case LossKind::LGL:
      loss_part = "LGL";
      break;
    case LossKind::PLGL:
      loss_part = "pLGL";
      break;
  }
  return arch_part + " (" + loss_part + ")";
}

std::vector<AblationCell> ablation_sweep(const Dataset& data,
                                         const ModelDims& dims,
                                         const TrainConfig& base) {
  if (dims.flow_dim != 0) {
    throw ConfigError(
        "ablation covers layouts without a flow stream; flow_dim must be 0");
  }
  std::vector<AblationCell> cells;
  cells.reserve(16);
  for (ArchVariant arch : {ArchVariant::MultiStage, ArchVariant::Concat,
                           ArchVariant::Swapped, ArchVariant::Parallel}) {
    for (LossKind loss :
         {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
      TrainConfig cfg = base;
      cfg.loss = loss;
      MsLstmModel model = init_model(dims, arch, base.seed);
      model.loss = loss;
      const std::vector<EpochStats> history = train(model, data, cfg);
      const EvalReport report =
          evaluate(model, data, Pooling::AveragePool, cfg.threads);

      AblationCell cell;
      cell.arch = arch;
      cell.loss = loss;
      cell.label = ablation_label(arch, loss);
      cell.accuracy_average = report.accuracy_average;
      cell.accuracy_last = report.accuracy_last;
      if (!history.empty()) {
        cell.train_accuracy = history.back().train_accuracy;
        cell.final_loss = history.back().mean_loss;
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_ablation_csv(const std::vector<AblationCell>& cells,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << "label,arch,loss,accuracy_average,accuracy_last,train_accuracy,"
         "final_loss\n";
  char line[256];
  for (const AblationCell& c : cells) {
    std::snprintf(line, sizeof line, "\"%s\",%s,%s,%.6f,%.6f,%.6f,%.6f\n",
                  c.label.c_str(), arch_name(c.arch).c_str(),
                  loss_kind_name(c.loss).c_str(), c.accuracy_average,
                  c.accuracy_last, c.train_accuracy, c.final_loss);
    out << line;
  }
  if (!out) {
    throw IoError("write failed for '" + path + "'");
  }
}

}  // namespace mslstm
