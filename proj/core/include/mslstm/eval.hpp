#ifndef MSLSTM_EVAL_HPP
#define MSLSTM_EVAL_HPP

#include <string>
#include <vector>

#include "mslstm/data.hpp"
#include "mslstm/model.hpp"
#include "mslstm/train.hpp"

namespace mslstm {

struct EvalReport {
  std::string arch;
  std::string loss;
  ModelDims dims;
  Pooling pooling = Pooling::AveragePool;
  std::size_t sample_count = 0;
  int seq_len = 0;

  // Overall accuracy under both pooling rules; `pooling` only governs the
  // per-class table and the confusion matrix.
  double accuracy_average = 0.0;
  double accuracy_last = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<int> class_counts;
  std::vector<std::vector<int>> confusion;  // [true][predicted]

  // accuracy over prefixes of length t = index + 1, always AveragePool;
  // the final entry coincides with accuracy_average.
  std::vector<double> anticipation;
};

EvalReport evaluate(const MsLstmModel& model, const Dataset& data,
                    Pooling pooling, int threads = 1);

/// Writes report.json and anticipation.csv into the directory.
void write_report(const EvalReport& report, const std::string& dir);

struct AblationCell {
  ArchVariant arch = ArchVariant::MultiStage;
  LossKind loss = LossKind::CE;
  std::string label;
  double accuracy_average = 0.0;
  double accuracy_last = 0.0;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

std::string ablation_label(ArchVariant arch, LossKind loss);

/// Trains all 16 layout/loss combinations from the same seed and base
/// configuration (its loss field is overridden per cell) and evaluates each
/// with AveragePool on the given dataset.
std::vector<AblationCell> ablation_sweep(const Dataset& data,
                                         const ModelDims& dims,
                                         const TrainConfig& base);

void write_ablation_csv(const std::vector<AblationCell>& cells,
                        const std::string& path);

}  // namespace mslstm

#endif
