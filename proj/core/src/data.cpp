#include "mslstm/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mslstm/binio.hpp"
#include "mslstm/errors.hpp"
#include "mslstm/prng.hpp"

namespace mslstm {

namespace {

void validate(const GenConfig& cfg) {
  auto at_least = [](int v, int lo, const char* name) {
    if (v < lo) {
      throw ConfigError(std::string(name) + " must be >= " +
                        std::to_string(lo) + ", got " + std::to_string(v));
    }
  };
  at_least(cfg.n_classes, 1, "n_classes");
  at_least(cfg.samples, 0, "samples");
  at_least(cfg.seq_len, 1, "seq_len");
  at_least(cfg.ctx_dim, 1, "ctx_dim");
  at_least(cfg.act_dim, 1, "act_dim");
  at_least(cfg.flow_dim, 0, "flow_dim");
  if (!(cfg.noise_sigma >= 0.0)) {
    throw ConfigError("noise_sigma must be >= 0, got " +
                      std::to_string(cfg.noise_sigma));
  }
  if (!(cfg.ctx_reliability >= 0.0 && cfg.ctx_reliability <= 1.0)) {
    throw ConfigError("ctx_reliability must be in [0, 1], got " +
                      std::to_string(cfg.ctx_reliability));
  }
  if (cfg.ambiguity_horizon < 0 || cfg.ambiguity_horizon > cfg.seq_len) {
    throw ConfigError("ambiguity_horizon must be in [0, seq_len], got " +
                      std::to_string(cfg.ambiguity_horizon));
  }
}

/// Unit-norm random direction, one row per class.
Tensor draw_prototypes(int n_classes, int dim, Xoshiro256ss& rng) {
  Tensor protos({n_classes, dim});
  for (int c = 0; c < n_classes; ++c) {
    double norm_sq = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double v = rng.normal();
      protos(c, j) = v;
      norm_sq += v * v;
    }
    const double inv = 1.0 / std::max(std::sqrt(norm_sq), 1e-12);
    for (int j = 0; j < dim; ++j) {
      protos(c, j) *= inv;
    }
  }
  return protos;
}

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Dataset generate(const GenConfig& cfg) {
  validate(cfg);
  Xoshiro256ss rng(cfg.seed);

  const Tensor ctx_protos = draw_prototypes(cfg.n_classes, cfg.ctx_dim, rng);
  const Tensor act_protos = draw_prototypes(cfg.n_classes, cfg.act_dim, rng);
  Tensor flow_protos;
  if (cfg.flow_dim > 0) {
    flow_protos = draw_prototypes(cfg.n_classes, cfg.flow_dim, rng);
  }

  Dataset ds;
  ds.n_classes = cfg.n_classes;
  ds.seq_len = cfg.seq_len;
  ds.ctx_dim = cfg.ctx_dim;
  ds.act_dim = cfg.act_dim;
  ds.flow_dim = cfg.flow_dim;
  ds.samples.reserve(static_cast<std::size_t>(cfg.samples));

  for (int s = 0; s < cfg.samples; ++s) {
    Sample sample;
    sample.label = s % cfg.n_classes;
    const int confuser = (sample.label + 1) % cfg.n_classes;
    sample.ctx = Tensor({cfg.seq_len, cfg.ctx_dim});
    sample.act = Tensor({cfg.seq_len, cfg.act_dim});
    if (cfg.flow_dim > 0) {
      sample.flow = Tensor({cfg.seq_len, cfg.flow_dim});
    }

    for (int t = 0; t < cfg.seq_len; ++t) {
      // Context: per-frame pick between the true and confuser prototype.
      const int ctx_class =
          rng.uniform() < cfg.ctx_reliability ? sample.label : confuser;
      for (int j = 0; j < cfg.ctx_dim; ++j) {
        sample.ctx(t, j) = quantize(ctx_protos(ctx_class, j) +
                                    cfg.noise_sigma * rng.normal());
      }

      // Action: ramp from confuser (frame 1) to true prototype at the
      // ambiguity horizon, clamped at 1 afterwards.
      const double lam =
          cfg.ambiguity_horizon <= 1
              ? 1.0
              : std::min(1.0, static_cast<double>(t) /
                                  (cfg.ambiguity_horizon - 1));
      for (int j = 0; j < cfg.act_dim; ++j) {
        const double base = (1.0 - lam) * act_protos(confuser, j) +
                            lam * act_protos(sample.label, j);
        sample.act(t, j) = quantize(base + cfg.noise_sigma * rng.normal());
      }

      if (cfg.flow_dim > 0) {
        for (int j = 0; j < cfg.flow_dim; ++j) {
          const double base = (1.0 - lam) * flow_protos(confuser, j) +
                              lam * flow_protos(sample.label, j);
          (*sample.flow)(t, j) = quantize(base + cfg.noise_sigma * rng.normal());
        }
      }
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

std::string frame_selection_name(FrameSelection sel) {
  return sel == FrameSelection::FirstK ? "first" : "random";
}

FrameSelection frame_selection_from_name(const std::string& name) {
  if (name == "first") return FrameSelection::FirstK;
  if (name == "random") return FrameSelection::RandomK;
  throw ConfigError("unknown frame selection '" + name +
                    "' (expected first or random)");
}

Sample select_frames(const Sample& sample, int count, FrameSelection sel,
                     std::uint64_t seed) {
  const int total = sample.ctx.dim(0);
  if (count < 1 || count > total) {
    throw IndexError("select_frames: count " + std::to_string(count) +
                     " out of range [1, " + std::to_string(total) + "]");
  }

  std::vector<int> keep(static_cast<std::size_t>(count));
  if (sel == FrameSelection::FirstK) {
    for (int i = 0; i < count; ++i) {
      keep[static_cast<std::size_t>(i)] = i;
    }
  } else {
    // Partial Fisher-Yates over frame indices, then sort to preserve
    // temporal order.
    std::vector<int> all(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
      all[static_cast<std::size_t>(i)] = i;
    }
    Xoshiro256ss rng(seed);
    for (int i = 0; i < count; ++i) {
      const int j =
          i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(total - i)));
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    }
    all.resize(static_cast<std::size_t>(count));
    std::sort(all.begin(), all.end());
    keep = std::move(all);
  }

  auto take = [&](const Tensor& src) {
    Tensor out({count, src.dim(1)});
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j < src.dim(1); ++j) {
        out(i, j) = src(keep[static_cast<std::size_t>(i)], j);
      }
    }
    return out;
  };

  Sample out;
  out.label = sample.label;
  out.ctx = take(sample.ctx);
  out.act = take(sample.act);
  if (sample.flow) {
    out.flow = take(*sample.flow);
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ByteWriter w;
  w.magic("FSD1");
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  w.u32(static_cast<std::uint32_t>(ds.n_classes));
  w.u32(static_cast<std::uint32_t>(ds.seq_len));
  w.u32(static_cast<std::uint32_t>(ds.ctx_dim));
  w.u32(static_cast<std::uint32_t>(ds.act_dim));
  w.u32(static_cast<std::uint32_t>(ds.flow_dim));
  for (const Sample& s : ds.samples) {
    w.u32(static_cast<std::uint32_t>(s.label));
    for (double v : s.ctx.data()) {
      w.f32(static_cast<float>(v));
    }
    for (double v : s.act.data()) {
      w.f32(static_cast<float>(v));
    }
    if (ds.flow_dim > 0) {
      for (double v : s.flow->data()) {
        w.f32(static_cast<float>(v));
      }
    }
  }
  write_file_bytes(path, w.buffer());
}

Dataset load_dataset(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("FSD1");
  const std::uint32_t count = r.u32("sample count");
  Dataset ds;
  ds.n_classes = static_cast<int>(r.u32("class count"));
  ds.seq_len = static_cast<int>(r.u32("sequence length"));
  ds.ctx_dim = static_cast<int>(r.u32("context dim"));
  ds.act_dim = static_cast<int>(r.u32("action dim"));
  ds.flow_dim = static_cast<int>(r.u32("flow dim"));
  if (ds.n_classes < 1 || ds.seq_len < 1 || ds.ctx_dim < 1 || ds.act_dim < 1 ||
      ds.flow_dim < 0) {
    throw FormatError(path + ": implausible dimension header", 8);
  }

  ds.samples.reserve(count);
  for (std::uint32_t s = 0; s < count; ++s) {
    const std::size_t label_off = r.offset();
    Sample sample;
    sample.label = static_cast<int>(r.u32("label"));
    if (sample.label < 0 || sample.label >= ds.n_classes) {
      throw FormatError(path + ": label " + std::to_string(sample.label) +
                            " out of range [0, " +
                            std::to_string(ds.n_classes) + ")",
                        label_off);
    }
    auto block = [&](int dim, const char* what) {
      Tensor t({ds.seq_len, dim});
      for (double& v : t.data()) {
        v = static_cast<double>(r.f32(what));
      }
      return t;
    };
    sample.ctx = block(ds.ctx_dim, "context features");
    sample.act = block(ds.act_dim, "action features");
    if (ds.flow_dim > 0) {
      sample.flow = block(ds.flow_dim, "flow features");
    }
    ds.samples.push_back(std::move(sample));
  }
  if (!r.at_end()) {
    throw FormatError(path + ": trailing bytes after samples", r.offset());
  }
  return ds;
}

}  // namespace mslstm
