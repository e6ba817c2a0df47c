#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "mslstm/errors.hpp"
#include "mslstm/model.hpp"
#include "mslstm/prng.hpp"
#include "mslstm/tensor.hpp"

using namespace mslstm;

namespace {

Tensor random_frames(int T, int D, Xoshiro256ss& rng) {
  Tensor t({T, D});
  for (double& v : t.data()) {
    v = rng.uniform(-1.0, 1.0);
  }
  return t;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool tensors_identical(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] != b.data()[i]) {
      return false;
    }
  }
  return true;
}

bool models_identical(const MsLstmModel& a, const MsLstmModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) {
    return false;
  }
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!tensors_identical(*pa[i], *pb[i])) {
      return false;
    }
  }
  return a.dims == b.dims && a.arch == b.arch && a.loss == b.loss &&
         a.seed == b.seed;
}

constexpr ArchVariant kAllArchs[] = {ArchVariant::MultiStage,
                                     ArchVariant::Concat,
                                     ArchVariant::Swapped,
                                     ArchVariant::Parallel};

}  // namespace

TEST_CASE("the full-scale hidden width default") {
  CHECK(kDefaultHiddenUnits == 2048);
}

TEST_CASE("name round-trips for enums") {
  for (ArchVariant arch : kAllArchs) {
    CHECK(arch_from_name(arch_name(arch)) == arch);
  }
  CHECK(pooling_from_name(pooling_name(Pooling::AveragePool)) ==
        Pooling::AveragePool);
  CHECK(pooling_from_name(pooling_name(Pooling::LastFrame)) ==
        Pooling::LastFrame);
  CHECK_THROWS_AS(arch_from_name("bogus"), ConfigError);
  CHECK_THROWS_AS(pooling_from_name("bogus"), ConfigError);
}

TEST_CASE("prediction rows are distributions for every variant") {
  Xoshiro256ss rng(5);
  const ModelDims dims{3, 4, 0, 5, 4};
  const Tensor ctx = random_frames(6, 3, rng);
  const Tensor act = random_frames(6, 4, rng);

  for (ArchVariant arch : kAllArchs) {
    const MsLstmModel model = init_model(dims, arch, 7);
    const ForwardResult out = forward(model, ctx, act);
    for (const PredictionSequence* seq : {&out.pred_first, &out.pred_second}) {
      REQUIRE(seq->seq_len() == 6);
      REQUIRE(seq->n_classes() == 4);
      for (int t = 0; t < 6; ++t) {
        double total = 0.0;
        for (int k = 0; k < 4; ++k) {
          const double p = seq->matrix()(t, k);
          CHECK(p >= 0.0);
          CHECK(p <= 1.0);
          total += p;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("zero parameters predict the uniform distribution") {
  const ModelDims dims{3, 3, 0, 4, 5};
  MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 0);
  for (Tensor* t : model.parameters()) {
    for (double& v : t->data()) {
      v = 0.0;
    }
  }
  Xoshiro256ss rng(9);
  const ForwardResult out = forward(model, random_frames(4, 3, rng),
                                    random_frames(4, 3, rng));
  for (int t = 0; t < 4; ++t) {
    for (int k = 0; k < 5; ++k) {
      CHECK(out.pred_second.matrix()(t, k) ==
            doctest::Approx(0.2).epsilon(1e-12));
    }
  }
}

TEST_CASE("the first stream never reads action features") {
  Xoshiro256ss rng(11);
  const ModelDims dims{3, 4, 0, 5, 3};
  const MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 3);
  const Tensor ctx = random_frames(5, 3, rng);
  const Tensor act_a = random_frames(5, 4, rng);
  const Tensor act_b = random_frames(5, 4, rng);

  const ForwardResult ra = forward(model, ctx, act_a);
  const ForwardResult rb = forward(model, ctx, act_b);
  CHECK(tensors_identical(ra.pred_first.matrix(), rb.pred_first.matrix()));
  // The second stream does read them.
  CHECK(!tensors_identical(ra.pred_second.matrix(), rb.pred_second.matrix()));
}

TEST_CASE("swapped variant conditions its first stream on action features") {
  Xoshiro256ss rng(13);
  const ModelDims dims{3, 4, 0, 5, 3};
  const MsLstmModel model = init_model(dims, ArchVariant::Swapped, 3);
  const Tensor act = random_frames(5, 4, rng);
  const Tensor ctx_a = random_frames(5, 3, rng);
  const Tensor ctx_b = random_frames(5, 3, rng);

  const ForwardResult ra = forward(model, ctx_a, act);
  const ForwardResult rb = forward(model, ctx_b, act);
  CHECK(tensors_identical(ra.pred_first.matrix(), rb.pred_first.matrix()));
}

TEST_CASE("single-head variants emit one stream twice") {
  Xoshiro256ss rng(15);
  const ModelDims dims{3, 4, 0, 5, 3};
  const Tensor ctx = random_frames(4, 3, rng);
  const Tensor act = random_frames(4, 4, rng);
  for (ArchVariant arch : {ArchVariant::Concat, ArchVariant::Parallel}) {
    const MsLstmModel model = init_model(dims, arch, 5);
    const ForwardResult out = forward(model, ctx, act);
    CHECK(tensors_identical(out.pred_first.matrix(),
                            out.pred_second.matrix()));
  }
}

TEST_CASE("forward is causal: a prefix reproduces the full run's prefix") {
  Xoshiro256ss rng(17);
  const ModelDims dims{3, 4, 0, 6, 3};
  const Tensor ctx = random_frames(6, 3, rng);
  const Tensor act = random_frames(6, 4, rng);

  for (ArchVariant arch : kAllArchs) {
    const MsLstmModel model = init_model(dims, arch, 11);
    const ForwardResult full = forward(model, ctx, act);
    for (int prefix = 1; prefix <= 6; ++prefix) {
      Tensor ctx_head({prefix, 3});
      Tensor act_head({prefix, 4});
      for (int t = 0; t < prefix; ++t) {
        for (int d = 0; d < 3; ++d) {
          ctx_head(t, d) = ctx(t, d);
        }
        for (int d = 0; d < 4; ++d) {
          act_head(t, d) = act(t, d);
        }
      }
      const ForwardResult part = forward(model, ctx_head, act_head);
      for (int t = 0; t < prefix; ++t) {
        for (int k = 0; k < 3; ++k) {
          CHECK(part.pred_second.matrix()(t, k) ==
                full.pred_second.matrix()(t, k));
        }
      }
    }
  }
}

TEST_CASE("predict pools the final stream") {
  Xoshiro256ss rng(19);
  const ModelDims dims{3, 4, 0, 5, 4};
  const MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 23);
  const Tensor ctx = random_frames(5, 3, rng);
  const Tensor act = random_frames(5, 4, rng);

  const ForwardResult out = forward(model, ctx, act);
  const Tensor avg = mean_over_time(out.pred_second.matrix());
  CHECK(predict(model, ctx, act, nullptr, Pooling::AveragePool) ==
        argmax(avg));
  CHECK(predict(model, ctx, act, nullptr, Pooling::LastFrame) ==
        argmax(out.pred_second.matrix().row(4)));
}

TEST_CASE("anticipate sees only the prefix") {
  Xoshiro256ss rng(21);
  const ModelDims dims{3, 4, 0, 5, 4};
  const MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 29);
  const Tensor ctx = random_frames(6, 3, rng);
  const Tensor act = random_frames(6, 4, rng);

  for (int prefix = 1; prefix <= 6; ++prefix) {
    Tensor ctx_head({prefix, 3});
    Tensor act_head({prefix, 4});
    for (int t = 0; t < prefix; ++t) {
      for (int d = 0; d < 3; ++d) {
        ctx_head(t, d) = ctx(t, d);
      }
      for (int d = 0; d < 4; ++d) {
        act_head(t, d) = act(t, d);
      }
    }
    CHECK(anticipate(model, ctx, act, nullptr, prefix) ==
          predict(model, ctx_head, act_head, nullptr, Pooling::AveragePool));
  }
  CHECK_THROWS_AS(anticipate(model, ctx, act, nullptr, 0), IndexError);
  CHECK_THROWS_AS(anticipate(model, ctx, act, nullptr, 7), IndexError);
}

TEST_CASE("flow features are accepted by the staged variants only") {
  const ModelDims with_flow{3, 4, 2, 5, 3};
  CHECK_THROWS_AS(init_model(with_flow, ArchVariant::Concat, 0), ConfigError);
  CHECK_THROWS_AS(init_model(with_flow, ArchVariant::Parallel, 0),
                  ConfigError);

  Xoshiro256ss rng(25);
  for (ArchVariant arch : {ArchVariant::MultiStage, ArchVariant::Swapped}) {
    const MsLstmModel model = init_model(with_flow, arch, 1);
    const Tensor ctx = random_frames(4, 3, rng);
    const Tensor act = random_frames(4, 4, rng);
    const Tensor flow = random_frames(4, 2, rng);
    const ForwardResult out = forward(model, ctx, act, &flow);
    CHECK(out.pred_second.seq_len() == 4);
    // The flow stream participates: perturbing it changes the prediction.
    const Tensor flow2 = random_frames(4, 2, rng);
    const ForwardResult out2 = forward(model, ctx, act, &flow2);
    CHECK(!tensors_identical(out.pred_second.matrix(),
                             out2.pred_second.matrix()));
    // Missing or unexpected flow input is a usage error.
    CHECK_THROWS_AS(forward(model, ctx, act), DimensionError);
  }
  const ModelDims no_flow{3, 4, 0, 5, 3};
  const MsLstmModel model = init_model(no_flow, ArchVariant::MultiStage, 1);
  const Tensor ctx = random_frames(4, 3, rng);
  const Tensor act = random_frames(4, 4, rng);
  const Tensor flow = random_frames(4, 2, rng);
  CHECK_THROWS_AS(forward(model, ctx, act, &flow), DimensionError);
}

TEST_CASE("input shape mismatches name the offending stream") {
  Xoshiro256ss rng(27);
  const ModelDims dims{3, 4, 0, 5, 3};
  const MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 1);
  const Tensor good_ctx = random_frames(4, 3, rng);
  const Tensor bad_ctx = random_frames(4, 2, rng);
  const Tensor good_act = random_frames(4, 4, rng);
  const Tensor short_act = random_frames(3, 4, rng);

  CHECK_THROWS_AS(forward(model, bad_ctx, good_act), DimensionError);
  CHECK_THROWS_AS(forward(model, good_ctx, short_act), DimensionError);
}

TEST_CASE("same seed, same model; different seed differs") {
  const ModelDims dims{3, 4, 0, 5, 3};
  for (ArchVariant arch : kAllArchs) {
    const MsLstmModel a = init_model(dims, arch, 42);
    const MsLstmModel b = init_model(dims, arch, 42);
    const MsLstmModel c = init_model(dims, arch, 43);
    CHECK(models_identical(a, b));

    bool any_diff = false;
    const auto pa = a.parameters();
    const auto pc = c.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      for (std::size_t j = 0; j < pa[i]->size(); ++j) {
        any_diff = any_diff || pa[i]->data()[j] != pc[i]->data()[j];
      }
    }
    CHECK(any_diff);
  }
}

TEST_CASE("checkpoints round-trip bit-exactly for every variant") {
  Xoshiro256ss rng(31);
  const std::string path = temp_path("mslstm_test_ckpt.msl");
  for (ArchVariant arch : kAllArchs) {
    const ModelDims dims{3, 4, 0, 5, 3};
    MsLstmModel model = init_model(dims, arch, 77);
    model.loss = LossKind::LGL;
    save_checkpoint(model, path);
    const MsLstmModel back = load_checkpoint(path);
    CHECK(models_identical(model, back));

    // Identical predictions, bit for bit.
    const Tensor ctx = random_frames(5, 3, rng);
    const Tensor act = random_frames(5, 4, rng);
    const ForwardResult a = forward(model, ctx, act);
    const ForwardResult b = forward(back, ctx, act);
    CHECK(tensors_identical(a.pred_second.matrix(), b.pred_second.matrix()));
  }

  // Flow-bearing model as well.
  const ModelDims dims{3, 4, 2, 5, 3};
  MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 78);
  save_checkpoint(model, path);
  CHECK(models_identical(model, load_checkpoint(path)));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint writes are byte-stable") {
  const ModelDims dims{3, 4, 0, 5, 3};
  const MsLstmModel model = init_model(dims, ArchVariant::Parallel, 5);
  const std::string p1 = temp_path("mslstm_test_stable1.msl");
  const std::string p2 = temp_path("mslstm_test_stable2.msl");
  save_checkpoint(model, p1);
  save_checkpoint(model, p2);

  std::ifstream f1(p1, std::ios::binary);
  std::ifstream f2(p2, std::ios::binary);
  const std::vector<char> b1((std::istreambuf_iterator<char>(f1)),
                             std::istreambuf_iterator<char>());
  const std::vector<char> b2((std::istreambuf_iterator<char>(f2)),
                             std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("corrupt checkpoints report the failing byte offset") {
  const ModelDims dims{3, 4, 0, 5, 3};
  const MsLstmModel model = init_model(dims, ArchVariant::MultiStage, 9);
  const std::string path = temp_path("mslstm_test_corrupt.msl");
  save_checkpoint(model, path);

  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  in.close();

  SUBCASE("truncated parameter blob") {
    const std::size_t cut = bytes.size() - 11;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(cut));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }

  SUBCASE("bad magic at offset zero") {
    bytes[0] = 'Z';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    try {
      load_checkpoint(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }

  SUBCASE("mangled JSON header") {
    // The header starts after magic (4) and length (4).
    bytes[9] = '?';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    try {
      load_checkpoint(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 8);
    }
  }

  SUBCASE("trailing garbage") {
    bytes.push_back('x');
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  }

  std::remove(path.c_str());
}

TEST_CASE("missing checkpoint file raises an io error naming the path") {
  try {
    load_checkpoint("/nonexistent/nowhere.msl");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/nowhere.msl") !=
          std::string::npos);
  }
}

TEST_CASE("parameter counts per variant") {
  const ModelDims dims{3, 4, 0, 5, 3};
  // Gate tensors: 3 peephole gates x 4 + candidate x 3 = 15 per LSTM;
  // a head contributes 2.
  CHECK(init_model(dims, ArchVariant::MultiStage, 0).parameters().size() ==
        15 + 2 + 15 + 2);
  CHECK(init_model(dims, ArchVariant::Swapped, 0).parameters().size() ==
        15 + 2 + 15 + 2);
  CHECK(init_model(dims, ArchVariant::Concat, 0).parameters().size() ==
        15 + 2);
  CHECK(init_model(dims, ArchVariant::Parallel, 0).parameters().size() ==
        15 + 2 + 15);
}

TEST_CASE("model dims validation") {
  CHECK_THROWS_AS(init_model({0, 4, 0, 5, 3}, ArchVariant::MultiStage, 0),
                  ConfigError);
  CHECK_THROWS_AS(init_model({3, 4, 0, 0, 3}, ArchVariant::MultiStage, 0),
                  ConfigError);
  CHECK_THROWS_AS(init_model({3, 4, 0, 5, 0}, ArchVariant::MultiStage, 0),
                  ConfigError);
  CHECK_THROWS_AS(init_model({3, 4, -1, 5, 3}, ArchVariant::MultiStage, 0),
                  ConfigError);
}
