#include "mslstm/lstm.hpp"

#include <cmath>
#include <string>

#include "mslstm/errors.hpp"

namespace mslstm {

namespace {

void fill_uniform(Tensor& t, double lo, double hi, Xoshiro256ss& rng) {
  for (double& v : t.data()) {
    v = rng.uniform(lo, hi);
  }
}

void require_positive(int v, const char* name) {
  if (v < 1) {
    throw ConfigError(std::string(name) + " must be >= 1, got " +
                      std::to_string(v));
  }
}

}  // namespace

std::vector<Tensor*> LstmParams::parameters() {
  return {&input_gate.wx,  &input_gate.wh,  &input_gate.wc,  &input_gate.b,
          &forget_gate.wx, &forget_gate.wh, &forget_gate.wc, &forget_gate.b,
          &candidate.wx,   &candidate.wh,   &candidate.b,    &output_gate.wx,
          &output_gate.wh, &output_gate.wc, &output_gate.b};
}

std::vector<const Tensor*> LstmParams::parameters() const {
  auto mutable_list = const_cast<LstmParams*>(this)->parameters();
  return std::vector<const Tensor*>(mutable_list.begin(), mutable_list.end());
}

LstmParams init_params(int in_dim, int hidden, std::uint64_t seed) {
  Xoshiro256ss rng(seed);
  return init_params(in_dim, hidden, rng);
}

LstmParams init_params(int in_dim, int hidden, Xoshiro256ss& rng) {
  require_positive(in_dim, "in_dim");
  require_positive(hidden, "hidden");

  LstmParams p;
  p.in_dim = in_dim;
  p.hidden = hidden;

  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto gate = [&](bool peephole) {
    GateParams g;
    g.wx = Tensor({hidden, in_dim});
    fill_uniform(g.wx, -bound, bound, rng);
    g.wh = Tensor({hidden, hidden});
    fill_uniform(g.wh, -bound, bound, rng);
    if (peephole) {
      g.wc = Tensor({hidden, hidden});
      fill_uniform(g.wc, -bound, bound, rng);
    }
    g.b = Tensor({hidden});
    return g;
  };

  p.input_gate = gate(true);
  p.forget_gate = gate(true);
  {
    CandidateParams c;
    c.wx = Tensor({hidden, in_dim});
    fill_uniform(c.wx, -bound, bound, rng);
    c.wh = Tensor({hidden, hidden});
    fill_uniform(c.wh, -bound, bound, rng);
    c.b = Tensor({hidden});
    p.candidate = c;
  }
  p.output_gate = gate(true);

  // Forget bias 1 keeps the memory path open early in training.
  for (int i = 0; i < hidden; ++i) {
    p.forget_gate.b(i) = 1.0;
  }
  return p;
}

LstmState zero_state(int hidden) {
  require_positive(hidden, "hidden");
  return LstmState{Tensor({hidden}), Tensor({hidden})};
}

std::vector<Var> LstmRefs::ordered() const {
  return {input_gate.wx,  input_gate.wh,  input_gate.wc,  input_gate.b,
          forget_gate.wx, forget_gate.wh, forget_gate.wc, forget_gate.b,
          candidate.wx,   candidate.wh,   candidate.b,    output_gate.wx,
          output_gate.wh, output_gate.wc, output_gate.b};
}

LstmRefs load_lstm(Tape& tape, const LstmParams& p) {
  auto gate = [&](const GateParams& g) {
    return GateRefs{tape.leaf(g.wx), tape.leaf(g.wh), tape.leaf(g.wc),
                    tape.leaf(g.b)};
  };
  LstmRefs r;
  r.input_gate = gate(p.input_gate);
  r.forget_gate = gate(p.forget_gate);
  r.candidate = CandidateRefs{tape.leaf(p.candidate.wx),
                              tape.leaf(p.candidate.wh),
                              tape.leaf(p.candidate.b)};
  r.output_gate = gate(p.output_gate);
  return r;
}

StepVars lstm_step_traced(Tape& tape, const LstmRefs& p, Var x,
                          const StepVars& prev) {
  auto gate_pre = [&](const GateRefs& g, Var cell) {
    Var s = tape.add(tape.matvec(g.wx, x), tape.matvec(g.wh, prev.h));
    return tape.add(tape.add(s, tape.matvec(g.wc, cell)), g.b);
  };

  Var i = tape.sigmoid(gate_pre(p.input_gate, prev.c));
  Var f = tape.sigmoid(gate_pre(p.forget_gate, prev.c));

  Var cand_pre = tape.add(tape.add(tape.matvec(p.candidate.wx, x),
                                   tape.matvec(p.candidate.wh, prev.h)),
                          p.candidate.b);
  Var cand = tape.tanh(cand_pre);

  Var c_new = tape.add(tape.hadamard(f, prev.c), tape.hadamard(i, cand));
  Var o = tape.sigmoid(gate_pre(p.output_gate, c_new));
  Var h_new = tape.hadamard(o, tape.tanh(c_new));
  return StepVars{h_new, c_new};
}

StepVars zero_state_traced(Tape& tape, int hidden) {
  require_positive(hidden, "hidden");
  Tensor z({hidden});
  return StepVars{tape.leaf(z), tape.leaf(z)};
}

std::vector<StepVars> unroll_traced(Tape& tape, const LstmRefs& p,
                                    std::span<const Var> xs) {
  std::vector<StepVars> out;
  out.reserve(xs.size());
  StepVars state =
      zero_state_traced(tape, static_cast<int>(tape.size_of(p.input_gate.b)));
  for (Var x : xs) {
    state = lstm_step_traced(tape, p, x, state);
    out.push_back(state);
  }
  return out;
}

LstmState lstm_step(const LstmParams& p, const Tensor& x,
                    const LstmState& prev) {
  if (x.rank() != 1 || x.dim(0) != p.in_dim) {
    throw DimensionError("lstm_step: input shape " + shape_str(x.shape()) +
                         " does not match in_dim " + std::to_string(p.in_dim));
  }
  if (prev.h.rank() != 1 || prev.h.dim(0) != p.hidden || prev.c.rank() != 1 ||
      prev.c.dim(0) != p.hidden) {
    throw DimensionError("lstm_step: state shapes " + shape_str(prev.h.shape()) +
                         ", " + shape_str(prev.c.shape()) +
                         " do not match hidden " + std::to_string(p.hidden));
  }
  Tape tape;
  LstmRefs refs = load_lstm(tape, p);
  StepVars prev_vars{tape.leaf(prev.h), tape.leaf(prev.c)};
  StepVars next = lstm_step_traced(tape, refs, tape.leaf(x), prev_vars);
  return LstmState{tape.value_tensor(next.h), tape.value_tensor(next.c)};
}

Tensor unroll(const LstmParams& p, const Tensor& xs) {
  if (xs.rank() != 2 || xs.dim(1) != p.in_dim) {
    throw DimensionError("unroll: input shape " + shape_str(xs.shape()) +
                         " does not match in_dim " + std::to_string(p.in_dim));
  }
  if (xs.dim(0) < 1) {
    throw DimensionError("unroll: need at least one time step, got shape " +
                         shape_str(xs.shape()));
  }
  Tape tape;
  LstmRefs refs = load_lstm(tape, p);
  std::vector<Var> rows;
  rows.reserve(xs.dim(0));
  for (int t = 0; t < xs.dim(0); ++t) {
    rows.push_back(tape.leaf(xs.row(t)));
  }
  std::vector<StepVars> states = unroll_traced(tape, refs, rows);
  std::vector<Var> hs;
  hs.reserve(states.size());
  for (const StepVars& s : states) {
    hs.push_back(s.h);
  }
  return tape.value_tensor(tape.stack_rows(hs));
}

}  // namespace mslstm
