#include "mslstm/model.hpp"

#include <cmath>
#include <cstdlib>
#include <utility>

#include <json.hpp>

#include "mslstm/binio.hpp"
#include "mslstm/errors.hpp"
#include "mslstm/prng.hpp"

namespace mslstm {

namespace {

void fill_uniform(Tensor& t, double lo, double hi, Xoshiro256ss& rng) {
  for (double& v : t.data()) {
    v = rng.uniform(lo, hi);
  }
}

AffineHead init_head(int out_dim, int in_dim, Xoshiro256ss& rng) {
  AffineHead h;
  h.w = Tensor({out_dim, in_dim});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  fill_uniform(h.w, -bound, bound, rng);
  h.b = Tensor({out_dim});
  return h;
}

LstmParams zero_lstm(int in_dim, int hidden) {
  auto gate = [&] {
    return GateParams{Tensor({hidden, in_dim}), Tensor({hidden, hidden}),
                      Tensor({hidden, hidden}), Tensor({hidden})};
  };
  LstmParams p;
  p.in_dim = in_dim;
  p.hidden = hidden;
  p.input_gate = gate();
  p.forget_gate = gate();
  p.candidate = CandidateParams{Tensor({hidden, in_dim}),
                                Tensor({hidden, hidden}), Tensor({hidden})};
  p.output_gate = gate();
  return p;
}

void validate_dims(const ModelDims& d, ArchVariant arch) {
  auto positive = [](int v, const char* name) {
    if (v < 1) {
      throw ConfigError(std::string(name) + " must be >= 1, got " +
                        std::to_string(v));
    }
  };
  positive(d.ctx_dim, "ctx_dim");
  positive(d.act_dim, "act_dim");
  positive(d.hidden, "hidden");
  positive(d.n_classes, "n_classes");
  if (d.flow_dim < 0) {
    throw ConfigError("flow_dim must be >= 0, got " +
                      std::to_string(d.flow_dim));
  }
  if (d.flow_dim > 0 && arch != ArchVariant::MultiStage &&
      arch != ArchVariant::Swapped) {
    throw ConfigError("flow features require the multistage or swapped "
                      "layout, got " + arch_name(arch));
  }
}

int stage1_in_dim(const ModelDims& d, ArchVariant arch) {
  switch (arch) {
    case ArchVariant::MultiStage:
      return d.ctx_dim;
    case ArchVariant::Swapped:
      return d.act_dim;
    case ArchVariant::Concat:
      return d.ctx_dim + d.act_dim;
    case ArchVariant::Parallel:
      return d.ctx_dim;
  }
  std::abort();
}

int stage2_in_dim(const ModelDims& d, ArchVariant arch) {
  switch (arch) {
    case ArchVariant::MultiStage:
      return d.hidden + d.act_dim + d.flow_dim;
    case ArchVariant::Swapped:
      return d.hidden + d.ctx_dim + d.flow_dim;
    case ArchVariant::Parallel:
      return d.act_dim;
    case ArchVariant::Concat:
      break;
  }
  std::abort();
}

int head1_in_dim(const ModelDims& d, ArchVariant arch) {
  return arch == ArchVariant::Parallel ? 2 * d.hidden : d.hidden;
}

/// Zero-weight model with every tensor shaped for the given layout.
MsLstmModel model_shell(const ModelDims& dims, ArchVariant arch) {
  validate_dims(dims, arch);
  MsLstmModel m;
  m.dims = dims;
  m.arch = arch;
  m.stage1 = zero_lstm(stage1_in_dim(dims, arch), dims.hidden);
  m.head1 = AffineHead{Tensor({dims.n_classes, head1_in_dim(dims, arch)}),
                       Tensor({dims.n_classes})};
  if (m.has_stage2()) {
    m.stage2 = zero_lstm(stage2_in_dim(dims, arch), dims.hidden);
  }
  if (m.has_head2()) {
    m.head2 = AffineHead{Tensor({dims.n_classes, dims.hidden}),
                         Tensor({dims.n_classes})};
  }
  return m;
}

void check_forward_inputs(const MsLstmModel& m, const Tensor& ctx,
                          const Tensor& act, const Tensor* flow) {
  if (ctx.rank() != 2 || ctx.dim(1) != m.dims.ctx_dim) {
    throw DimensionError("forward: context shape " + shape_str(ctx.shape()) +
                         " does not match ctx_dim " +
                         std::to_string(m.dims.ctx_dim));
  }
  if (act.rank() != 2 || act.dim(1) != m.dims.act_dim) {
    throw DimensionError("forward: action shape " + shape_str(act.shape()) +
                         " does not match act_dim " +
                         std::to_string(m.dims.act_dim));
  }
  if (ctx.dim(0) != act.dim(0)) {
    throw DimensionError("forward: context has " + std::to_string(ctx.dim(0)) +
                         " steps but action has " + std::to_string(act.dim(0)));
  }
  if (ctx.dim(0) < 1) {
    throw DimensionError("forward: need at least one time step");
  }
  if (m.dims.flow_dim > 0) {
    if (flow == nullptr) {
      throw DimensionError("forward: model expects a flow stream of dim " +
                           std::to_string(m.dims.flow_dim));
    }
    if (flow->rank() != 2 || flow->dim(1) != m.dims.flow_dim ||
        flow->dim(0) != ctx.dim(0)) {
      throw DimensionError("forward: flow shape " + shape_str(flow->shape()) +
                           " does not match [" + std::to_string(ctx.dim(0)) +
                           " x " + std::to_string(m.dims.flow_dim) + "]");
    }
  } else if (flow != nullptr) {
    throw DimensionError(
        "forward: flow features supplied to a model without a flow stream");
  }
}

Tensor first_rows(const Tensor& m, int count) {
  Tensor out({count, m.dim(1)});
  for (int t = 0; t < count; ++t) {
    for (int j = 0; j < m.dim(1); ++j) {
      out(t, j) = m(t, j);
    }
  }
  return out;
}

}  // namespace

std::string arch_name(ArchVariant arch) {
  switch (arch) {
    case ArchVariant::MultiStage:
      return "multistage";
    case ArchVariant::Concat:
      return "concat";
    case ArchVariant::Swapped:
      return "swapped";
    case ArchVariant::Parallel:
      return "parallel";
  }
  std::abort();
}

ArchVariant arch_from_name(const std::string& name) {
  if (name == "multistage") return ArchVariant::MultiStage;
  if (name == "concat") return ArchVariant::Concat;
  if (name == "swapped") return ArchVariant::Swapped;
  if (name == "parallel") return ArchVariant::Parallel;
  throw ConfigError("unknown architecture '" + name +
                    "' (expected multistage, concat, swapped or parallel)");
}

std::string pooling_name(Pooling pooling) {
  return pooling == Pooling::AveragePool ? "average" : "last";
}

Pooling pooling_from_name(const std::string& name) {
  if (name == "average") return Pooling::AveragePool;
  if (name == "last") return Pooling::LastFrame;
  throw ConfigError("unknown pooling '" + name + "' (expected average or last)");
}

std::string dims_str(const ModelDims& d) {
  return "ctx=" + std::to_string(d.ctx_dim) + " act=" +
         std::to_string(d.act_dim) + " flow=" + std::to_string(d.flow_dim) +
         " hidden=" + std::to_string(d.hidden) + " classes=" +
         std::to_string(d.n_classes);
}

std::vector<Tensor*> MsLstmModel::parameters() {
  std::vector<Tensor*> out;
  auto append_lstm = [&](LstmParams& p) {
    for (Tensor* t : p.parameters()) {
      out.push_back(t);
    }
  };
  auto append_head = [&](AffineHead& h) {
    out.push_back(&h.w);
    out.push_back(&h.b);
  };
  switch (arch) {
    case ArchVariant::MultiStage:
    case ArchVariant::Swapped:
      append_lstm(stage1);
      append_head(head1);
      append_lstm(stage2);
      append_head(head2);
      break;
    case ArchVariant::Concat:
      append_lstm(stage1);
      append_head(head1);
      break;
    case ArchVariant::Parallel:
      append_lstm(stage1);
      append_head(head1);
      append_lstm(stage2);
      break;
  }
  return out;
}

std::vector<const Tensor*> MsLstmModel::parameters() const {
  auto mutable_list = const_cast<MsLstmModel*>(this)->parameters();
  return std::vector<const Tensor*>(mutable_list.begin(), mutable_list.end());
}

MsLstmModel init_model(const ModelDims& dims, ArchVariant arch,
                       std::uint64_t seed) {
  validate_dims(dims, arch);
  MsLstmModel m;
  m.dims = dims;
  m.arch = arch;
  m.seed = seed;

  // One stream drives every draw; the order below is the canonical
  // parameter order, so reseeding reproduces the model exactly.
  Xoshiro256ss rng(seed);
  switch (arch) {
    case ArchVariant::MultiStage:
    case ArchVariant::Swapped:
      m.stage1 = init_params(stage1_in_dim(dims, arch), dims.hidden, rng);
      m.head1 = init_head(dims.n_classes, dims.hidden, rng);
      m.stage2 = init_params(stage2_in_dim(dims, arch), dims.hidden, rng);
      m.head2 = init_head(dims.n_classes, dims.hidden, rng);
      break;
    case ArchVariant::Concat:
      m.stage1 = init_params(stage1_in_dim(dims, arch), dims.hidden, rng);
      m.head1 = init_head(dims.n_classes, dims.hidden, rng);
      break;
    case ArchVariant::Parallel:
      m.stage1 = init_params(stage1_in_dim(dims, arch), dims.hidden, rng);
      m.head1 = init_head(dims.n_classes, 2 * dims.hidden, rng);
      m.stage2 = init_params(stage2_in_dim(dims, arch), dims.hidden, rng);
      break;
  }
  return m;
}

std::vector<Var> ModelRefs::ordered(ArchVariant arch) const {
  std::vector<Var> out;
  auto append_lstm = [&](const LstmRefs& r) {
    for (Var v : r.ordered()) {
      out.push_back(v);
    }
  };
  auto append_head = [&](const AffineHeadRefs& h) {
    out.push_back(h.w);
    out.push_back(h.b);
  };
  switch (arch) {
    case ArchVariant::MultiStage:
    case ArchVariant::Swapped:
      append_lstm(stage1);
      append_head(head1);
      append_lstm(stage2);
      append_head(head2);
      break;
    case ArchVariant::Concat:
      append_lstm(stage1);
      append_head(head1);
      break;
    case ArchVariant::Parallel:
      append_lstm(stage1);
      append_head(head1);
      append_lstm(stage2);
      break;
  }
  return out;
}

TracedForward forward_traced(Tape& tape, const MsLstmModel& model,
                             const Tensor& ctx, const Tensor& act,
                             const Tensor* flow) {
  check_forward_inputs(model, ctx, act, flow);
  const int T = ctx.dim(0);

  ModelRefs refs;
  refs.has_stage2 = model.has_stage2();
  refs.has_head2 = model.has_head2();
  refs.stage1 = load_lstm(tape, model.stage1);
  refs.head1 = AffineHeadRefs{tape.leaf(model.head1.w), tape.leaf(model.head1.b)};
  if (refs.has_stage2) {
    refs.stage2 = load_lstm(tape, model.stage2);
  }
  if (refs.has_head2) {
    refs.head2 =
        AffineHeadRefs{tape.leaf(model.head2.w), tape.leaf(model.head2.b)};
  }

  std::vector<Var> ctx_rows, act_rows, flow_rows;
  ctx_rows.reserve(static_cast<std::size_t>(T));
  act_rows.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    ctx_rows.push_back(tape.leaf(ctx.row(t)));
    act_rows.push_back(tape.leaf(act.row(t)));
  }
  if (flow != nullptr) {
    flow_rows.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      flow_rows.push_back(tape.leaf(flow->row(t)));
    }
  }

  auto hidden_of = [](const std::vector<StepVars>& states) {
    std::vector<Var> hs;
    hs.reserve(states.size());
    for (const StepVars& s : states) {
      hs.push_back(s.h);
    }
    return hs;
  };
  auto head_pred = [&](const AffineHeadRefs& h, const std::vector<Var>& hs) {
    std::vector<Var> rows;
    rows.reserve(hs.size());
    for (Var hv : hs) {
      rows.push_back(tape.softmax(tape.add(tape.matvec(h.w, hv), h.b)));
    }
    return tape.stack_rows(rows);
  };

  switch (model.arch) {
    case ArchVariant::MultiStage:
    case ArchVariant::Swapped: {
      const bool swapped = model.arch == ArchVariant::Swapped;
      const std::vector<Var>& stage1_rows = swapped ? act_rows : ctx_rows;
      const std::vector<Var>& extra_rows = swapped ? ctx_rows : act_rows;
      std::vector<Var> h1 = hidden_of(unroll_traced(tape, refs.stage1, stage1_rows));
      Var pred1 = head_pred(refs.head1, h1);
      std::vector<Var> in2;
      in2.reserve(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        Var v = tape.concat(h1[static_cast<std::size_t>(t)],
                            extra_rows[static_cast<std::size_t>(t)]);
        if (flow != nullptr) {
          v = tape.concat(v, flow_rows[static_cast<std::size_t>(t)]);
        }
        in2.push_back(v);
      }
      std::vector<Var> h2 = hidden_of(unroll_traced(tape, refs.stage2, in2));
      Var pred2 = head_pred(refs.head2, h2);
      return TracedForward{pred1, pred2, refs};
    }
    case ArchVariant::Concat: {
      std::vector<Var> in;
      in.reserve(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        in.push_back(tape.concat(ctx_rows[static_cast<std::size_t>(t)],
                                 act_rows[static_cast<std::size_t>(t)]));
      }
      std::vector<Var> h1 = hidden_of(unroll_traced(tape, refs.stage1, in));
      Var pred = head_pred(refs.head1, h1);
      return TracedForward{pred, pred, refs};
    }
    case ArchVariant::Parallel: {
      std::vector<Var> h1 = hidden_of(unroll_traced(tape, refs.stage1, ctx_rows));
      std::vector<Var> h2 = hidden_of(unroll_traced(tape, refs.stage2, act_rows));
      std::vector<Var> merged;
      merged.reserve(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        merged.push_back(tape.concat(h1[static_cast<std::size_t>(t)],
                                     h2[static_cast<std::size_t>(t)]));
      }
      Var pred = head_pred(refs.head1, merged);
      return TracedForward{pred, pred, refs};
    }
  }
  std::abort();
}

ForwardResult forward(const MsLstmModel& model, const Tensor& ctx,
                      const Tensor& act, const Tensor* flow) {
  Tape tape;
  TracedForward fw = forward_traced(tape, model, ctx, act, flow);
  return ForwardResult{PredictionSequence(tape.value_tensor(fw.pred_first)),
                       PredictionSequence(tape.value_tensor(fw.pred_second))};
}

int predict(const MsLstmModel& model, const Tensor& ctx, const Tensor& act,
            const Tensor* flow, Pooling pooling) {
  Tape tape;
  TracedForward fw = forward_traced(tape, model, ctx, act, flow);
  Tensor pred = tape.value_tensor(fw.pred_second);
  if (pooling == Pooling::AveragePool) {
    return argmax(mean_over_time(pred));
  }
  return argmax(pred.row(pred.dim(0) - 1));
}

int anticipate(const MsLstmModel& model, const Tensor& ctx, const Tensor& act,
               const Tensor* flow, int prefix_len) {
  if (ctx.rank() != 2) {
    throw DimensionError("anticipate: context shape " +
                         shape_str(ctx.shape()) + " is not [T x D]");
  }
  if (prefix_len < 1 || prefix_len > ctx.dim(0)) {
    throw IndexError("anticipate: prefix length " + std::to_string(prefix_len) +
                     " out of range [1, " + std::to_string(ctx.dim(0)) + "]");
  }
  check_forward_inputs(model, ctx, act, flow);
  Tensor ctx_prefix = first_rows(ctx, prefix_len);
  Tensor act_prefix = first_rows(act, prefix_len);
  if (flow != nullptr) {
    Tensor flow_prefix = first_rows(*flow, prefix_len);
    return predict(model, ctx_prefix, act_prefix, &flow_prefix,
                   Pooling::AveragePool);
  }
  return predict(model, ctx_prefix, act_prefix, nullptr, Pooling::AveragePool);
}

void save_checkpoint(const MsLstmModel& model, const std::string& path) {
  nlohmann::json header{
      {"format", 1},
      {"arch", arch_name(model.arch)},
      {"loss", loss_kind_name(model.loss)},
      {"seed", model.seed},
      {"dims",
       {{"ctx_dim", model.dims.ctx_dim},
        {"act_dim", model.dims.act_dim},
        {"flow_dim", model.dims.flow_dim},
        {"hidden", model.dims.hidden},
        {"classes", model.dims.n_classes}}},
  };
  const std::string text = header.dump();

  ByteWriter w;
  w.magic("MSL1");
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.str(text);
  for (const Tensor* t : model.parameters()) {
    for (double v : t->data()) {
      w.f64(v);
    }
  }
  write_file_bytes(path, w.buffer());
}

MsLstmModel load_checkpoint(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("MSL1");
  const std::uint32_t header_len = r.u32("header length");
  const std::size_t header_off = r.offset();
  const std::string text = r.str(header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw FormatError(path + ": malformed JSON header", header_off);
  }
  auto field = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    if (!obj.contains(key)) {
      throw FormatError(path + ": header missing field '" + key + "'",
                        header_off);
    }
    return obj.at(key);
  };
  try {
    if (field(header, "format").get<int>() != 1) {
      throw FormatError(path + ": unsupported format version " +
                            field(header, "format").dump(),
                        header_off);
    }
    const ArchVariant arch =
        arch_from_name(field(header, "arch").get<std::string>());
    const nlohmann::json& jd = field(header, "dims");
    ModelDims dims{field(jd, "ctx_dim").get<int>(),
                   field(jd, "act_dim").get<int>(),
                   field(jd, "flow_dim").get<int>(),
                   field(jd, "hidden").get<int>(),
                   field(jd, "classes").get<int>()};

    MsLstmModel m = model_shell(dims, arch);
    m.loss = loss_kind_from_name(field(header, "loss").get<std::string>());
    m.seed = field(header, "seed").get<std::uint64_t>();
    for (Tensor* t : m.parameters()) {
      for (double& v : t->data()) {
        v = r.f64("weights");
      }
    }
    if (!r.at_end()) {
      throw FormatError(path + ": trailing bytes after weights", r.offset());
    }
    return m;
  } catch (const nlohmann::json::exception&) {
    throw FormatError(path + ": malformed header field", header_off);
  }
}

}  // namespace mslstm
