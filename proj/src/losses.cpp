#include "emavio/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "emavio/error.hpp"
#include "emavio/ops.hpp"

namespace emavio {

namespace {

Tensor rmse(const Tensor& diff) { return ops::sqrt(ops::mean(ops::square(diff))); }

Tensor weighted_pose_error(const Tensor& pred_rows, const Tensor& gt_rows, double lambda) {
  const Tensor diff = ops::sub(pred_rows, gt_rows);
  const Tensor t_err = rmse(ops::slice(diff, 1, 0, 3));
  const Tensor r_err = rmse(ops::slice(diff, 1, 3, 6));
  return ops::add(t_err, ops::scale(r_err, lambda));
}

Tensor gt_rows(std::span<const PoseDelta> gt) {
  std::vector<double> values;
  values.reserve(gt.size() * 6);
  for (const auto& p : gt) {
    for (int i = 0; i < 3; ++i) values.push_back(p.t[i]);
    for (int i = 0; i < 3; ++i) values.push_back(p.psi[i]);
  }
  return Tensor({gt.size(), 6}, std::move(values));
}

}  // namespace

Tensor frame_loss(std::span<const Tensor> pred, std::span<const PoseDelta> gt, double lambda1) {
  if (pred.empty()) throw ContractError("frame_loss: no frames");
  if (pred.size() != gt.size()) {
    throw ContractError("frame_loss: " + std::to_string(pred.size()) + " predictions vs " +
                        std::to_string(gt.size()) + " ground-truth poses");
  }
  std::vector<Tensor> rows(pred.begin(), pred.end());
  const Tensor stacked = ops::reshape(ops::concat(rows, 0), {pred.size(), 6});
  return weighted_pose_error(stacked, gt_rows(gt), lambda1);
}

Tensor compose_poses(std::span<const Tensor> pred_rel) {
  if (pred_rel.empty()) throw ContractError("compose_poses: empty chain");
  Tensor rotation;
  Tensor translation;
  for (const auto& p : pred_rel) {
    if (p.shape() != Shape{6}) throw DimensionError("compose_poses: expected [6], got " + shape_str(p.shape()));
    const Tensor r = ops::euler_to_rotation(ops::slice(p, 0, 3, 6));
    const Tensor t = ops::reshape(ops::slice(p, 0, 0, 3), {3, 1});
    if (!rotation.defined()) {
      rotation = r;
      translation = t;
    } else {
      // [R t] * [Ri ti] = [R Ri, R ti + t]
      translation = ops::add(ops::matmul(rotation, t), translation);
      rotation = ops::matmul(rotation, r);
    }
  }
  return ops::concat({ops::reshape(translation, {3}), ops::rotation_to_euler(rotation)}, 0);
}

Tensor sequence_loss(std::span<const Tensor> pred_rel, const PoseDelta& gt_seq, double lambda2) {
  const Tensor composed = ops::reshape(compose_poses(pred_rel), {1, 6});
  return weighted_pose_error(composed, gt_rows(std::span<const PoseDelta>(&gt_seq, 1)), lambda2);
}

Tensor total_loss(const Tensor& frame, const Tensor& seq, long step) {
  if (!std::isfinite(frame.item()) || !std::isfinite(seq.item())) {
    throw TrainingDivergence("non-finite loss at step " + std::to_string(step) + " (frame=" +
                                 std::to_string(frame.item()) + ", seq=" + std::to_string(seq.item()) + ")",
                             step);
  }
  return ops::add(frame, seq);
}

}  // namespace emavio
