#include "mslstm/gradcheck.hpp"

#include <cmath>
#include <string>

#include "mslstm/errors.hpp"
#include "mslstm/prng.hpp"
#include "mslstm/tape.hpp"
#include "mslstm/train.hpp"

namespace mslstm {

namespace {

/// Mean total loss of the batch at the model's current weights.
double batch_loss(Tape& tape, const MsLstmModel& model,
                  const std::vector<Sample>& batch, LossKind kind) {
  double acc = 0.0;
  for (const Sample& s : batch) {
    tape.reset();
    TracedForward fw =
        forward_traced(tape, model, s.ctx, s.act, s.flow_ptr());
    TargetSequence target(s.ctx.dim(0), model.dims.n_classes, s.label);
    Var loss =
        loss_total_traced(tape, fw.pred_first, fw.pred_second, target, kind);
    acc += tape.value(loss)[0];
  }
  return acc / static_cast<double>(batch.size());
}

}  // namespace

GradCheckResult run_gradient_check(const GradCheckConfig& cfg) {
  if (cfg.seq_len < 1 || cfg.batch < 1) {
    throw ConfigError("gradient check needs seq_len >= 1 and batch >= 1");
  }
  if (!(cfg.step > 0.0) || !(cfg.tolerance > 0.0)) {
    throw ConfigError("gradient check needs step > 0 and tolerance > 0");
  }

  MsLstmModel model = init_model(cfg.dims, cfg.arch, cfg.seed);

  // Random batch; inputs in [-1, 1], labels cycling through the classes.
  // The seed is offset so the batch does not replay the weight draws.
  Xoshiro256ss rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Sample> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch));
  for (int b = 0; b < cfg.batch; ++b) {
    Sample s;
    s.label = b % cfg.dims.n_classes;
    s.ctx = Tensor({cfg.seq_len, cfg.dims.ctx_dim});
    s.act = Tensor({cfg.seq_len, cfg.dims.act_dim});
    for (double& v : s.ctx.data()) {
      v = rng.uniform(-1.0, 1.0);
    }
    for (double& v : s.act.data()) {
      v = rng.uniform(-1.0, 1.0);
    }
    if (cfg.dims.flow_dim > 0) {
      s.flow = Tensor({cfg.seq_len, cfg.dims.flow_dim});
      for (double& v : s.flow->data()) {
        v = rng.uniform(-1.0, 1.0);
      }
    }
    batch.push_back(std::move(s));
  }

  GradCheckResult result;
  result.pass = true;
  Tape tape;

  for (LossKind kind :
       {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
    // Analytic gradient of the batch-mean loss.
    std::vector<Tensor*> params = model.parameters();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Tensor* t : params) {
      analytic.emplace_back(t->shape());
    }
    for (const Sample& s : batch) {
      sample_gradient(tape, model, s, kind, analytic);
    }
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
    for (Tensor& g : analytic) {
      for (double& v : g.data()) {
        v *= inv_batch;
      }
    }

    GradCheckKindResult kr;
    kr.kind = kind;
    for (std::size_t p = 0; p < params.size(); ++p) {
      std::span<double> theta = params[p]->data();
      std::span<const double> a = analytic[p].data();
      for (std::size_t j = 0; j < theta.size(); ++j) {
        const double saved = theta[j];
        theta[j] = saved + cfg.step;
        const double up = batch_loss(tape, model, batch, kind);
        theta[j] = saved - cfg.step;
        const double down = batch_loss(tape, model, batch, kind);
        theta[j] = saved;

        const double numeric = (up - down) / (2.0 * cfg.step);
        const double rel =
            std::abs(a[j] - numeric) /
            std::max({1e-6, std::abs(a[j]), std::abs(numeric)});
        kr.max_rel_err = std::max(kr.max_rel_err, rel);
        ++kr.checked;
      }
    }
    result.max_rel_err = std::max(result.max_rel_err, kr.max_rel_err);
    if (kr.max_rel_err > cfg.tolerance) {
      result.pass = false;
    }
    result.kinds.push_back(kr);
  }
  return result;
}

}  // namespace mslstm
