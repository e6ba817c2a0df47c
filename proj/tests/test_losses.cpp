#include <cmath>
#include <vector>

#include <doctest.h>

#include "mslstm/errors.hpp"
#include "mslstm/losses.hpp"
#include "mslstm/prng.hpp"
#include "mslstm/tape.hpp"
#include "mslstm/tensor.hpp"

using namespace mslstm;

namespace {

// Random prediction rows via softmax so every row is a valid distribution.
Tensor random_predictions(int T, int N, Xoshiro256ss& rng) {
  Tensor p({T, N});
  for (int t = 0; t < T; ++t) {
    Tensor logits({N});
    for (double& v : logits.data()) {
      v = rng.uniform(-2.0, 2.0);
    }
    const Tensor row = softmax(logits);
    for (int k = 0; k < N; ++k) {
      p(t, k) = row(k);
    }
  }
  return p;
}

// Direct evaluation of the weighted form, independent of the library code.
double reference_loss(const Tensor& probs, int label,
                      const std::vector<double>& fn,
                      const std::vector<double>& fp) {
  const int T = probs.dim(0);
  const int N = probs.dim(1);
  double acc = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < N; ++k) {
      const double p =
          std::min(1.0 - kProbEpsilon, std::max(kProbEpsilon, probs(t, k)));
      const double y = k == label ? 1.0 : 0.0;
      acc += fn[static_cast<std::size_t>(t)] * y * std::log(p) +
             fp[static_cast<std::size_t>(t)] * (1.0 - y) * std::log(1.0 - p);
    }
  }
  return -acc / static_cast<double>(N);
}

}  // namespace

TEST_CASE("loss weight schedules match their closed forms") {
  const int T = 6;
  const double tol = 1e-9;

  const LossWeights ce = loss_weights(LossKind::CE, T);
  const LossWeights egl = loss_weights(LossKind::EGL, T);
  const LossWeights lgl = loss_weights(LossKind::LGL, T);
  const LossWeights plgl = loss_weights(LossKind::PLGL, T);

  for (int t = 1; t <= T; ++t) {
    const std::size_t i = static_cast<std::size_t>(t - 1);
    // CE: the final frame only.
    CHECK(std::abs(ce.fn[i] - (t == T ? 1.0 : 0.0)) < tol);
    CHECK(std::abs(ce.fp[i] - (t == T ? 1.0 : 0.0)) < tol);
    // EGL: exp(-(T - t)) on both terms.
    CHECK(std::abs(egl.fn[i] - std::exp(-(T - t))) < tol);
    CHECK(std::abs(egl.fp[i] - std::exp(-(T - t))) < tol);
    // LGL: t / T on both terms.
    CHECK(std::abs(lgl.fn[i] - static_cast<double>(t) / T) < tol);
    CHECK(std::abs(lgl.fp[i] - static_cast<double>(t) / T) < tol);
    // pLGL: full false-negative weight, t / T on false positives.
    CHECK(std::abs(plgl.fn[i] - 1.0) < tol);
    CHECK(std::abs(plgl.fp[i] - static_cast<double>(t) / T) < tol);
  }
}

TEST_CASE("known weight rows") {
  const LossWeights lgl = loss_weights(LossKind::LGL, 4);
  const std::vector<double> expected{0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(lgl.fn[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(lgl.fp[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }

  const LossWeights egl = loss_weights(LossKind::EGL, 4);
  CHECK(egl.fn[3] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(egl.fn[2] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("per-time weights isolated by single-frame perturbations") {
  // Two prediction matrices that differ in exactly one row expose that
  // row's weight as a loss difference, isolating the schedule at time t.
  const int T = 5;
  const int N = 3;
  const int label = 1;
  const TargetSequence target(T, N, label);

  Tensor base({T, N});
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < N; ++k) {
      base(t, k) = 1.0 / N;
    }
  }

  for (LossKind kind :
       {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
    const LossWeights w = loss_weights(kind, T);
    for (int t = 0; t < T; ++t) {
      // Raise the true-class probability in row t only.
      Tensor bumped = base;
      bumped(t, label) = 0.7;
      bumped(t, (label + 1) % N) = 0.2;
      bumped(t, (label + 2) % N) = 0.1;

      const double got = sequence_loss(PredictionSequence(bumped), target, kind) -
                         sequence_loss(PredictionSequence(base), target, kind);

      // The same difference from the closed-form weighted sum.
      const double third = 1.0 / N;
      const double fn_delta = std::log(0.7) - std::log(third);
      const double fp_delta = (std::log(1.0 - 0.2) - std::log(1.0 - third)) +
                              (std::log(1.0 - 0.1) - std::log(1.0 - third));
      const double want =
          -(w.fn[static_cast<std::size_t>(t)] * fn_delta +
            w.fp[static_cast<std::size_t>(t)] * fp_delta) /
          N;
      CHECK(std::abs(got - want) < 1e-9);
    }
  }
}

TEST_CASE("all four losses coincide exactly at T = 1") {
  Xoshiro256ss rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    const int N = 2 + static_cast<int>(rng.bounded(5));
    const PredictionSequence pred(random_predictions(1, N, rng));
    const TargetSequence target(1, N, static_cast<int>(rng.bounded(
                                           static_cast<std::uint64_t>(N))));
    const double ce = loss_ce(pred, target);
    const double egl = loss_egl(pred, target);
    const double lgl = loss_lgl(pred, target);
    const double plgl = loss_plgl(pred, target);
    CHECK(ce == egl);
    CHECK(ce == lgl);
    CHECK(ce == plgl);
  }
}

TEST_CASE("CE ignores every frame except the last") {
  Xoshiro256ss rng(66);
  const int T = 4;
  const int N = 3;
  const TargetSequence target(T, N, 2);

  Tensor a = random_predictions(T, N, rng);
  Tensor b = random_predictions(T, N, rng);
  // Same final frame, different earlier frames.
  for (int k = 0; k < N; ++k) {
    b(T - 1, k) = a(T - 1, k);
  }
  CHECK(loss_ce(PredictionSequence(a), target) ==
        loss_ce(PredictionSequence(b), target));
}

TEST_CASE("uniform two-class prediction has CE loss log 2") {
  // p = (1/2, 1/2): the positive term gives -log(1/2), the negative term
  // -log(1/2); averaged over N = 2 classes the loss is exactly log 2.
  Tensor p({1, 2});
  p(0, 0) = 0.5;
  p(0, 1) = 0.5;
  const TargetSequence target(1, 2, 0);
  const double loss = loss_ce(PredictionSequence(p), target);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("losses agree with an independent evaluation of the formula") {
  Xoshiro256ss rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    const int T = 1 + static_cast<int>(rng.bounded(6));
    const int N = 2 + static_cast<int>(rng.bounded(4));
    const int label = static_cast<int>(rng.bounded(
        static_cast<std::uint64_t>(N)));
    const Tensor probs = random_predictions(T, N, rng);
    const PredictionSequence pred(probs);
    const TargetSequence target(T, N, label);

    for (LossKind kind :
         {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
      const LossWeights w = loss_weights(kind, T);
      const double want = reference_loss(probs, label, w.fn, w.fp);
      CHECK(sequence_loss(pred, target, kind) ==
            doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("losses are non-negative") {
  Xoshiro256ss rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const PredictionSequence pred(random_predictions(5, 4, rng));
    const TargetSequence target(5, 4, 1);
    for (LossKind kind :
         {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
      CHECK(sequence_loss(pred, target, kind) >= 0.0);
    }
  }
}

TEST_CASE("loss_total is the sum of the stream losses") {
  Xoshiro256ss rng(8);
  const PredictionSequence first(random_predictions(4, 3, rng));
  const PredictionSequence second(random_predictions(4, 3, rng));
  const TargetSequence target(4, 3, 0);
  for (LossKind kind :
       {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
    const double total = loss_total(first, second, target, kind);
    const double parts = sequence_loss(first, target, kind) +
                         sequence_loss(second, target, kind);
    CHECK(std::abs(total - parts) < 1e-12);
  }
}

TEST_CASE("traced loss equals the value-level loss") {
  Xoshiro256ss rng(21);
  const Tensor probs = random_predictions(3, 4, rng);
  const TargetSequence target(3, 4, 2);
  for (LossKind kind :
       {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
    Tape tape;
    const Var pred = tape.leaf(probs);
    const Var loss = sequence_loss_traced(tape, pred, target, kind);
    CHECK(tape.value(loss)[0] ==
          sequence_loss(PredictionSequence(probs), target, kind));
  }
}

TEST_CASE("prediction rows must be distributions") {
  Tensor bad_sum({1, 2});
  bad_sum(0, 0) = 0.9;
  bad_sum(0, 1) = 0.3;
  CHECK_THROWS_AS(PredictionSequence{bad_sum}, DimensionError);

  Tensor out_of_range({1, 2});
  out_of_range(0, 0) = 1.2;
  out_of_range(0, 1) = -0.2;
  CHECK_THROWS_AS(PredictionSequence{out_of_range}, DimensionError);

  CHECK_THROWS_AS(PredictionSequence{Tensor::vec({0.5, 0.5})},
                  DimensionError);
}

TEST_CASE("target sequence is a constant one-hot row") {
  const TargetSequence target(3, 4, 2);
  CHECK(target.seq_len() == 3);
  CHECK(target.n_classes() == 4);
  CHECK(target.label() == 2);
  for (int t = 0; t < 3; ++t) {
    for (int k = 0; k < 4; ++k) {
      CHECK(target.matrix()(t, k) == (k == 2 ? 1.0 : 0.0));
    }
  }
  CHECK_THROWS_AS(TargetSequence(3, 4, 4), IndexError);
  CHECK_THROWS_AS(TargetSequence(3, 4, -1), IndexError);
}

TEST_CASE("loss names round-trip") {
  for (LossKind kind :
       {LossKind::CE, LossKind::EGL, LossKind::LGL, LossKind::PLGL}) {
    CHECK(loss_kind_from_name(loss_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(loss_kind_from_name("nope"), ConfigError);
}
