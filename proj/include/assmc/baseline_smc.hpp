#pragma once

// Standard tempered SMC on theta with adaptive Gaussian random-walk moves.
// It draws randomness from the same streams, in the same order, as AS-SMC so
// that AS-SMC without inactive variables reproduces it exactly.

#include <vector>

#include "assmc/sampler.hpp"

namespace assmc {

struct ThetaParticle {
  Vector theta;
  LogLikPath path;
  double log_weight = 0.0;
};

struct StandardSmcResult : SamplerResult {
  std::vector<ThetaParticle> particles;
};

/// Uses n_active, moves_per_stage, resample, per_particle_ancestors,
/// adapt_active_proposal, stop_stage and threads from `options`.
[[nodiscard]] StandardSmcResult run_standard_smc(const SamplerOptions& options,
                                                 const TargetModel& model,
                                                 const RngStream& stream);

}  // namespace assmc
