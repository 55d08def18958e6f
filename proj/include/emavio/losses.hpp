#pragma once

// Pose losses. RMSE reduces over every frame and all three components of a
// term: RMSE(e) = sqrt(mean_{frames, xyz} e^2), with translation and rotation
// reduced separately.

#include <span>

#include "emavio/geometry.hpp"
#include "emavio/tensor.hpp"

namespace emavio {

struct LossWeights {
  double lambda1 = 100.0;  // rotation weight, per-frame loss
  double lambda2 = 100.0;  // rotation weight, sequence loss
};

// RMSE(t - t_gt) + lambda1 * RMSE(psi - psi_gt) over all frames.
// pred: [6] tensors (t then psi). Throws ContractError on empty or unequal lists.
Tensor frame_loss(std::span<const Tensor> pred, std::span<const PoseDelta> gt, double lambda1);

// Composes the predicted relative poses as homogeneous transforms, extracts
// (t_seq, psi_seq) of the product and returns RMSE(t_seq - gt.t) +
// lambda2 * RMSE(psi_seq - gt.psi). Needs at least one prediction; throws
// DegenerateInputError when the composed rotation is near gimbal lock.
Tensor sequence_loss(std::span<const Tensor> pred_rel, const PoseDelta& gt_seq, double lambda2);

// Differentiable first-to-last pose [6] of a chain of relative poses.
Tensor compose_poses(std::span<const Tensor> pred_rel);

// frame + seq. Throws TrainingDivergence tagged with `step` when either input
// is not finite.
Tensor total_loss(const Tensor& frame, const Tensor& seq, long step = -1);

}  // namespace emavio
