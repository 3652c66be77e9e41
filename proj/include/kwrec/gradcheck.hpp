#pragma once

#include "kwrec/types.hpp"

#include <cstdint>

namespace kwrec {

struct GradAuditReport {
  Scalar worst_actor_error = 0.0;
  Scalar worst_critic_error = 0.0;
  Scalar worst_error = 0.0;
  bool pass = false;
};

/// Central-difference audit of the actor log-probability and critic loss
/// gradients: 3 derived seeds, 20 random coordinates each, eps 1e-5,
/// pass threshold 1e-4 on the worst relative error. `corrupt` perturbs
/// one analytic gradient entry as a negative control.
GradAuditReport run_gradient_audit(std::uint64_t seed, bool corrupt = false);

}  // namespace kwrec
