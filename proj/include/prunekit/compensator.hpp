// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "prunekit/calib_stats.hpp"
#include "prunekit/mask_builder.hpp"
#include "prunekit/tensor_store.hpp"

namespace prunekit {

/// Folds the mean contribution of pruned inputs into the bias:
///   B*[m] = B[m] + sum_{j pruned in column m} mean[j] * W[j, m]
/// using the weights as given (i.e. before the mask is applied). A layer
/// without bias gains one only if some delta is non-zero. With `enabled`
/// false the layer is returned unchanged.
WeightLayer bias_update(const WeightLayer& layer, const PruneMask& mask, const ColumnStats& s, bool enabled);

/// Sum of |B*[m] - B[m]|, a missing bias counting as zeros.
double bias_delta_norm(const WeightLayer& before, const WeightLayer& after);

}  // namespace prunekit
