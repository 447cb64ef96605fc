#pragma once

#include <string>
#include <vector>

#include "cfcnn/verify.hpp"

namespace cfcnn {

/// Names of the (operator, adjoint) families covered by run_adjoint_suite, in
/// the order they are checked.
const std::vector<std::string>& adjoint_family_names();

/// Checks every (operator, adjoint) pair of the library on opts.trials seeded
/// random instances each, with all dimensions drawn from [1, max_dim].
std::vector<verify::AdjointReport> run_adjoint_suite(Index max_dim, const verify::AdjointCheckOptions& opts);

/// Same, restricted to one family.
verify::AdjointReport run_adjoint_family(const std::string& family, Index max_dim,
                                         const verify::AdjointCheckOptions& opts);

}  // namespace cfcnn
