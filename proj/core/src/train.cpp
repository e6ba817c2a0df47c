#include "mslstm/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mslstm/errors.hpp"
#include "mslstm/kernels.hpp"
#include "mslstm/parallel.hpp"
#include "mslstm/prng.hpp"

namespace mslstm {

namespace {

void validate(const TrainConfig& cfg, const MsLstmModel& model,
              const Dataset& data) {
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("learning_rate must be > 0, got " +
                      std::to_string(cfg.learning_rate));
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw ConfigError("momentum must be in [0, 1), got " +
                      std::to_string(cfg.momentum));
  }
  if (!(cfg.weight_decay >= 0.0)) {
    throw ConfigError("weight_decay must be >= 0, got " +
                      std::to_string(cfg.weight_decay));
  }
  if (cfg.batch_size < 1) {
    throw ConfigError("batch_size must be >= 1, got " +
                      std::to_string(cfg.batch_size));
  }
  if (cfg.epochs < 0) {
    throw ConfigError("epochs must be >= 0, got " + std::to_string(cfg.epochs));
  }
  if (cfg.clip_gradients && !(cfg.clip_norm > 0.0)) {
    throw ConfigError("clip_norm must be > 0, got " +
                      std::to_string(cfg.clip_norm));
  }
  if (cfg.threads < 1) {
    throw ConfigError("threads must be >= 1, got " +
                      std::to_string(cfg.threads));
  }
  if (data.samples.empty()) {
    throw ConfigError("training requires at least one sample");
  }
  if (cfg.frames != 0 && (cfg.frames < 1 || cfg.frames > data.seq_len)) {
    throw ConfigError("frames must be 0 or in [1, " +
                      std::to_string(data.seq_len) + "], got " +
                      std::to_string(cfg.frames));
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

std::vector<Tensor> zeros_like(const std::vector<Tensor*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor* t : params) {
    out.emplace_back(t->shape());
  }
  return out;
}

void zero_all(std::vector<Tensor>& tensors) {
  for (Tensor& t : tensors) {
    std::fill(t.data().begin(), t.data().end(), 0.0);
  }
}

}  // namespace

void sgd_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
              std::vector<Tensor>& velocity, const TrainConfig& cfg) {
  if (grads.size() != params.size() || velocity.size() != params.size()) {
    throw DimensionError("sgd_step: got " + std::to_string(params.size()) +
                         " parameters, " + std::to_string(grads.size()) +
                         " gradients, " + std::to_string(velocity.size()) +
                         " velocity slots");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_same_shape(*params[p], grads[p], "sgd_step");
    std::span<double> theta = params[p]->data();
    std::span<const double> g = grads[p].data();
    std::span<double> v = velocity[p].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      v[j] = cfg.momentum * v[j] -
             cfg.learning_rate * (g[j] + cfg.weight_decay * theta[j]);
      theta[j] += v[j];
    }
  }
}

double sample_gradient(Tape& tape, const MsLstmModel& model,
                       const Sample& sample, LossKind kind,
                       std::vector<Tensor>& accum) {
  tape.reset();
  TracedForward fw =
      forward_traced(tape, model, sample.ctx, sample.act, sample.flow_ptr());
  TargetSequence target(sample.ctx.dim(0), model.dims.n_classes, sample.label);
  Var loss = loss_total_traced(tape, fw.pred_first, fw.pred_second, target, kind);
  tape.backward(loss);

  const std::vector<Var> vars = fw.refs.ordered(model.arch);
  if (accum.size() != vars.size()) {
    throw DimensionError("sample_gradient: accumulator holds " +
                         std::to_string(accum.size()) + " tensors, model has " +
                         std::to_string(vars.size()) + " parameters");
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    std::span<const double> g = tape.grad(vars[i]);
    std::span<double> a = accum[i].data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      a[j] += g[j];
    }
  }
  return tape.value(loss)[0];
}

std::vector<EpochStats> train(MsLstmModel& model, const Dataset& data,
                              const TrainConfig& cfg) {
  validate(cfg, model, data);

  // Two fixed draws so downstream seeding does not depend on which
  // features are enabled.
  SplitMix64 root(cfg.seed);
  const std::uint64_t frame_seed_base = root.next();
  const std::uint64_t shuffle_seed = root.next();

  // Frame selection happens once, before training.
  std::vector<Sample> working;
  working.reserve(data.samples.size());
  if (cfg.frames > 0) {
    SplitMix64 frame_seeds(frame_seed_base);
    for (const Sample& s : data.samples) {
      working.push_back(
          select_frames(s, cfg.frames, cfg.frame_selection, frame_seeds.next()));
    }
  } else {
    working = data.samples;
  }

  const std::size_t n_samples = working.size();
  std::vector<Tensor*> params = model.parameters();
  std::vector<Tensor> velocity = zeros_like(params);
  std::vector<Tensor> batch_grad = zeros_like(params);

  const std::size_t slots =
      std::min(static_cast<std::size_t>(cfg.batch_size), n_samples);
  std::vector<std::vector<Tensor>> slot_grads(slots);
  for (auto& g : slot_grads) {
    g = zeros_like(params);
  }
  std::vector<double> slot_loss(slots, 0.0);
  std::vector<Tape> worker_tapes(worker_count(slots, cfg.threads));
  std::vector<Tape> predict_tapes(worker_count(n_samples, cfg.threads));

  std::vector<int> order(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    order[i] = static_cast<int>(i);
  }
  Xoshiro256ss shuffle_rng(shuffle_seed);

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates, high index down.
    for (std::size_t i = n_samples - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.bounded(i + 1);
      std::swap(order[i], order[j]);
    }

    detail::KahanSum epoch_loss;
    for (std::size_t base = 0; base < n_samples; base += slots) {
      const std::size_t count = std::min(slots, n_samples - base);

      parallel_for(count, cfg.threads, [&](std::size_t w, std::size_t i) {
        zero_all(slot_grads[i]);
        const Sample& s = working[static_cast<std::size_t>(order[base + i])];
        slot_loss[i] =
            sample_gradient(worker_tapes[w], model, s, cfg.loss, slot_grads[i]);
      });

      // Reduce in slot order so the result is independent of thread count.
      zero_all(batch_grad);
      for (std::size_t i = 0; i < count; ++i) {
        epoch_loss.add(slot_loss[i]);
        for (std::size_t p = 0; p < batch_grad.size(); ++p) {
          std::span<double> dst = batch_grad[p].data();
          std::span<const double> src = slot_grads[i][p].data();
          for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] += src[j];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (Tensor& g : batch_grad) {
        for (double& v : g.data()) {
          v *= inv;
        }
      }

      if (cfg.clip_gradients) {
        double norm_sq = 0.0;
        for (const Tensor& g : batch_grad) {
          for (double v : g.data()) {
            norm_sq += v * v;
          }
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > cfg.clip_norm) {
          const double scale = cfg.clip_norm / norm;
          for (Tensor& g : batch_grad) {
            for (double& v : g.data()) {
              v *= scale;
            }
          }
        }
      }

      sgd_step(params, batch_grad, velocity, cfg);
    }

    std::vector<char> correct(n_samples, 0);
    parallel_for(n_samples, cfg.threads, [&](std::size_t w, std::size_t i) {
      Tape& tape = predict_tapes[w];
      tape.reset();
      const Sample& s = working[i];
      TracedForward fw =
          forward_traced(tape, model, s.ctx, s.act, s.flow_ptr());
      Tensor pred = tape.value_tensor(fw.pred_second);
      correct[i] = argmax(mean_over_time(pred)) == s.label ? 1 : 0;
    });
    std::size_t hits = 0;
    for (char c : correct) {
      hits += static_cast<std::size_t>(c);
    }

    EpochStats stats;
    stats.mean_loss = epoch_loss.value() / static_cast<double>(n_samples);
    stats.train_accuracy =
        static_cast<double>(hits) / static_cast<double>(n_samples);
    history.push_back(stats);
  }
  return history;
}

}  // namespace mslstm
