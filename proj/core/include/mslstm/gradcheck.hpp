#ifndef MSLSTM_GRADCHECK_HPP
#define MSLSTM_GRADCHECK_HPP

#include <cstdint>
#include <vector>

#include "mslstm/losses.hpp"
#include "mslstm/model.hpp"

namespace mslstm {

/// Central-difference verification of the training gradient on a small
/// randomly initialised model and batch. The relative error of an
/// analytic/numeric pair (a, n) is |a - n| / max(1e-6, |a|, |n|).
struct GradCheckConfig {
  ModelDims dims{4, 4, 0, 6, 3};
  ArchVariant arch = ArchVariant::MultiStage;
  int seq_len = 4;
  int batch = 2;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double tolerance = 1e-4;
};

struct GradCheckKindResult {
  LossKind kind = LossKind::CE;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

struct GradCheckResult {
  std::vector<GradCheckKindResult> kinds;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Checks every parameter entry for every loss kind.
GradCheckResult run_gradient_check(const GradCheckConfig& cfg);

}  // namespace mslstm

#endif
