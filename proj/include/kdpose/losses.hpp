#pragma once

#include "kdpose/autograd.hpp"

namespace kdpose {

/// Weights of the combined training objective
///   L = L_pose + lambda1 * L_od + lambda2 * L_fs.
/// norm_exponent selects the similarity normalization: 1 divides by the
/// feature norms (cosine, unit diagonal), 2 by the squared norms.
struct DistillConfig {
    double lambda1 = 0.5;
    double lambda2 = 0.00005;
    int norm_exponent = 1;
};

void validate_distill_config(const DistillConfig& config);

/// Pose-estimation loss: (1/I) * sum-sq over belief maps plus (1/J) * sum-sq
/// over vector fields, where I is the belief channel count and J the number
/// of vector fields (channel pairs). Per-map norms are sums over pixels.
template <typename T>
NodePtr<T> loss_mse(const NodePtr<T>& pred_maps, const NodePtr<T>& pred_fields,
                    const Tensor<T>& gt_maps, const Tensor<T>& gt_fields);

/// Output distillation: same functional form with the teacher's outputs in
/// place of ground truth. The teacher side is a constant.
template <typename T>
NodePtr<T> loss_od(const NodePtr<T>& student_maps, const NodePtr<T>& student_fields,
                   const Tensor<T>& teacher_maps, const Tensor<T>& teacher_fields);

/// Pairwise similarity of the HW spatial feature vectors of a (C, H, W)
/// feature map:  g_ij = <f_i, f_j> / (|f_i|^e * |f_j|^e).
/// Rows of zero vectors are zeroed out and reported through zero_rows.
template <typename T>
Tensor<T> similarity_matrix(const Tensor<T>& features, int norm_exponent,
                            std::vector<std::size_t>* zero_rows = nullptr);

/// Differentiable similarity matrix over a feature node.
template <typename T>
NodePtr<T> similarity_matrix(const NodePtr<T>& features, int norm_exponent,
                             std::vector<std::size_t>* zero_rows = nullptr);

/// Feature-similarity distillation: squared Frobenius distance between the
/// student and teacher similarity matrices. Channel counts may differ but the
/// spatial sizes must match.
template <typename T>
NodePtr<T> loss_fs(const NodePtr<T>& student_features, const Tensor<T>& teacher_features,
                   int norm_exponent);

/// Combined objective. Teacher arguments may be null only when the matching
/// lambda is zero; zero lambdas skip their term entirely so the result
/// reduces exactly to loss_mse.
template <typename T>
NodePtr<T> total_loss(const NodePtr<T>& pred_maps, const NodePtr<T>& pred_fields,
                      const Tensor<T>& gt_maps, const Tensor<T>& gt_fields,
                      const Tensor<T>* teacher_maps, const Tensor<T>* teacher_fields,
                      const NodePtr<T>& student_features, const Tensor<T>* teacher_features,
                      const DistillConfig& config);

} // namespace kdpose
