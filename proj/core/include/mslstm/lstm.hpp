#ifndef MSLSTM_LSTM_HPP
#define MSLSTM_LSTM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "mslstm/prng.hpp"
#include "mslstm/tape.hpp"
#include "mslstm/tensor.hpp"

namespace mslstm {

/// One peephole gate: input weights [H x D], recurrent weights [H x H],
/// cell weights [H x H] and bias [H]. The gate reads the memory cell
/// through `wc` (the peephole), as a full matrix-vector product.
struct GateParams {
  Tensor wx;
  Tensor wh;
  Tensor wc;
  Tensor b;
};

/// Cell candidate: like a gate but with no cell feedback.
struct CandidateParams {
  Tensor wx;
  Tensor wh;
  Tensor b;
};

struct LstmParams {
  int in_dim = 0;
  int hidden = 0;
  GateParams input_gate;
  GateParams forget_gate;
  CandidateParams candidate;
  GateParams output_gate;

  /// Parameter tensors in the canonical (checkpoint) order:
  /// input, forget, candidate, output; within each, wx, wh, (wc,) b.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

struct LstmState {
  Tensor h;
  Tensor c;
};

/// Weights uniform in [-1/sqrt(H), 1/sqrt(H)] drawn in canonical parameter
/// order; forget-gate bias 1, all other biases 0.
LstmParams init_params(int in_dim, int hidden, std::uint64_t seed);
LstmParams init_params(int in_dim, int hidden, Xoshiro256ss& rng);

LstmState zero_state(int hidden);

/// Single recurrence step.
///   i = sig(Wx x + Wh h + Wc c + b)         input gate
///   f = sig(Wx x + Wh h + Wc c + b)         forget gate
///   c' = f . c + i . tanh(Wx x + Wh h + b)  memory update
///   o = sig(Wx x + Wh h + Wc c' + b)        output gate reads the NEW cell
///   h' = o . tanh(c')
LstmState lstm_step(const LstmParams& p, const Tensor& x,
                    const LstmState& prev);

/// Runs lstm_step over the rows of xs [T x D] from a zero state and stacks
/// the hidden vectors into [T x H].
Tensor unroll(const LstmParams& p, const Tensor& xs);

// Traced variants used by training; the value-level functions above run
// these on a scratch tape, so there is exactly one definition of the math.

struct GateRefs {
  Var wx, wh, wc, b;
};
struct CandidateRefs {
  Var wx, wh, b;
};
struct LstmRefs {
  GateRefs input_gate;
  GateRefs forget_gate;
  CandidateRefs candidate;
  GateRefs output_gate;

  /// Leaf handles in the same canonical order as LstmParams::parameters().
  std::vector<Var> ordered() const;
};

LstmRefs load_lstm(Tape& tape, const LstmParams& p);

struct StepVars {
  Var h, c;
};

StepVars lstm_step_traced(Tape& tape, const LstmRefs& p, Var x,
                          const StepVars& prev);

StepVars zero_state_traced(Tape& tape, int hidden);

/// Hidden-state handles for every time step, from a zero initial state.
std::vector<StepVars> unroll_traced(Tape& tape, const LstmRefs& p,
                                    std::span<const Var> xs);

}  // namespace mslstm

#endif
