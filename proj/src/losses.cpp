#include "kdpose/losses.hpp"

#include <cmath>

#include "kdpose/gemm.hpp"

namespace kdpose {

void validate_distill_config(const DistillConfig& config) {
    require(config.lambda1 >= 0 && config.lambda2 >= 0, ErrorCode::invalid_argument,
            "distillation lambdas must be nonnegative");
    require(config.norm_exponent == 1 || config.norm_exponent == 2, ErrorCode::invalid_argument,
            "norm_exponent must be 1 or 2");
}

namespace {

template <typename T>
NodePtr<T> two_term_map_loss(const NodePtr<T>& maps, const NodePtr<T>& fields,
                             const Tensor<T>& target_maps, const Tensor<T>& target_fields) {
    require(maps->value.rank() == 3 && fields->value.rank() == 3, ErrorCode::dimension_mismatch,
            "map losses expect rank-3 tensors");
    require(fields->value.dim(0) % 2 == 0, ErrorCode::dimension_mismatch,
            "vector field tensor must hold (dx, dy) channel pairs");
    const T inv_i = T(1) / static_cast<T>(maps->value.dim(0));
    const T inv_j = T(2) / static_cast<T>(fields->value.dim(0)); // J = channels / 2
    auto map_term = scale(sum_sq_diff(maps, constant(target_maps)), inv_i);
    auto field_term = scale(sum_sq_diff(fields, constant(target_fields)), inv_j);
    return add(map_term, field_term);
}

} // namespace

template <typename T>
NodePtr<T> loss_mse(const NodePtr<T>& pred_maps, const NodePtr<T>& pred_fields,
                    const Tensor<T>& gt_maps, const Tensor<T>& gt_fields) {
    return two_term_map_loss(pred_maps, pred_fields, gt_maps, gt_fields);
}

template <typename T>
NodePtr<T> loss_od(const NodePtr<T>& student_maps, const NodePtr<T>& student_fields,
                   const Tensor<T>& teacher_maps, const Tensor<T>& teacher_fields) {
    return two_term_map_loss(student_maps, student_fields, teacher_maps, teacher_fields);
}

namespace {

/// Shared forward machinery for both similarity_matrix overloads.
/// Returns the raw Gram matrix alongside the normalizers alpha_i = n_i^-e.
template <typename T>
struct SimilarityParts {
    Tensor<T> gram;             // (N, N), f_i . f_j
    std::vector<double> alpha;  // n_i^-e, 0 for zero vectors
    Tensor<T> matrix;           // normalized similarity
};

template <typename T>
SimilarityParts<T> similarity_forward(const Tensor<T>& features, int norm_exponent,
                                      std::vector<std::size_t>* zero_rows) {
    require(features.rank() == 3, ErrorCode::dimension_mismatch,
            "similarity_matrix expects (C, H, W) features");
    require(norm_exponent == 1 || norm_exponent == 2, ErrorCode::invalid_argument,
            "norm_exponent must be 1 or 2");
    const std::size_t channels = features.dim(0);
    const std::size_t n = features.dim(1) * features.dim(2);

    SimilarityParts<T> parts;
    parts.gram = Tensor<T>({n, n});
    // Gram = F^T F with F viewed as a (C, HW) matrix.
    ops::gemm_tn(channels, n, n, features.data(), features.data(), parts.gram.data(), false);

    parts.alpha.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double norm_sq = static_cast<double>(parts.gram[i * n + i]);
        if (norm_sq <= 0) {
            parts.alpha[i] = 0; // zero feature vector: row/column zeroed
            if (zero_rows) zero_rows->push_back(i);
            continue;
        }
        parts.alpha[i] = std::pow(norm_sq, -0.5 * norm_exponent);
    }

    parts.matrix = Tensor<T>({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        const double ai = parts.alpha[i];
        const T* gram_row = parts.gram.data() + i * n;
        T* out_row = parts.matrix.data() + i * n;
        for (std::size_t j = 0; j < n; ++j)
            out_row[j] = static_cast<T>(ai * parts.alpha[j] * static_cast<double>(gram_row[j]));
    }
    return parts;
}

} // namespace

template <typename T>
Tensor<T> similarity_matrix(const Tensor<T>& features, int norm_exponent,
                            std::vector<std::size_t>* zero_rows) {
    return similarity_forward(features, norm_exponent, zero_rows).matrix;
}

template <typename T>
NodePtr<T> similarity_matrix(const NodePtr<T>& features, int norm_exponent,
                             std::vector<std::size_t>* zero_rows) {
    auto parts = std::make_shared<SimilarityParts<T>>(
        similarity_forward(features->value, norm_exponent, zero_rows));
    Tensor<T> value = parts->matrix;

    auto node = std::make_shared<Node<T>>(std::move(value), features->requires_grad, "similarity");
    node->parents = {features};
    if (!node->requires_grad) return node;

    const int exponent = norm_exponent;
    node->backward_fn = [parts, exponent](Node<T>& self) {
        Node<T>& feat = *self.parents[0];
        if (!feat.requires_grad) return;
        const std::size_t channels = feat.value.dim(0);
        const std::size_t n = feat.value.dim(1) * feat.value.dim(2);
        const Tensor<T>& gram = parts->gram;
        const std::vector<double>& alpha = parts->alpha;

        // dL/dGram. G_ij = gram_ij * a_i * a_j with a_i = gram_ii^(-e/2), so
        // every diagonal entry also feeds the normalizers of its row/column.
        Tensor<T> dgram({n, n});
        std::vector<double> dalpha(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double ai = alpha[i];
            const T* g_row = self.grad.data() + i * n;
            const T* gram_row = gram.data() + i * n;
            T* d_row = dgram.data() + i * n;
            double dalpha_i = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double up = static_cast<double>(g_row[j]);
                d_row[j] = static_cast<T>(up * ai * alpha[j]);
                dalpha_i += up * static_cast<double>(gram_row[j]) * alpha[j];
            }
            dalpha[i] += dalpha_i;
        }
        // Transposed route: G_ji also depends on a_i.
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0;
            for (std::size_t i = 0; i < n; ++i)
                acc += static_cast<double>(self.grad[i * n + j]) *
                       static_cast<double>(gram[i * n + j]) * alpha[i];
            dalpha[j] += acc;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double norm_sq = static_cast<double>(gram[i * n + i]);
            if (norm_sq <= 0) continue; // zero vector: not differentiable, grad stays 0
            const double da_dgii = -0.5 * exponent * alpha[i] / norm_sq;
            dgram[i * n + i] += static_cast<T>(dalpha[i] * da_dgii);
        }

        // dF = F * (dGram + dGram^T), accumulated into the parent.
        Tensor<T> sym({n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                sym[i * n + j] = dgram[i * n + j] + dgram[j * n + i];
        ops::gemm_nn(channels, n, n, feat.value.data(), sym.data(), feat.grad.data(), true);
    };
    return node;
}

template <typename T>
NodePtr<T> loss_fs(const NodePtr<T>& student_features, const Tensor<T>& teacher_features,
                   int norm_exponent) {
    require(teacher_features.rank() == 3 && student_features->value.rank() == 3,
            ErrorCode::dimension_mismatch, "loss_fs expects (C, H, W) features");
    require(student_features->value.dim(1) == teacher_features.dim(1) &&
                student_features->value.dim(2) == teacher_features.dim(2),
            ErrorCode::dimension_mismatch,
            "loss_fs: student and teacher feature maps must share spatial dimensions");
    auto student_sim = similarity_matrix(student_features, norm_exponent);
    Tensor<T> teacher_sim = similarity_matrix(teacher_features, norm_exponent);
    return sum_sq_diff(student_sim, constant(std::move(teacher_sim)));
}

template <typename T>
NodePtr<T> total_loss(const NodePtr<T>& pred_maps, const NodePtr<T>& pred_fields,
                      const Tensor<T>& gt_maps, const Tensor<T>& gt_fields,
                      const Tensor<T>* teacher_maps, const Tensor<T>* teacher_fields,
                      const NodePtr<T>& student_features, const Tensor<T>* teacher_features,
                      const DistillConfig& config) {
    validate_distill_config(config);
    NodePtr<T> loss = loss_mse(pred_maps, pred_fields, gt_maps, gt_fields);
    if (config.lambda1 > 0) {
        require(teacher_maps && teacher_fields, ErrorCode::invalid_argument,
                "total_loss: lambda1 > 0 requires teacher outputs");
        loss = add(loss, scale(loss_od(pred_maps, pred_fields, *teacher_maps, *teacher_fields),
                               static_cast<T>(config.lambda1)));
    }
    if (config.lambda2 > 0) {
        require(teacher_features, ErrorCode::invalid_argument,
                "total_loss: lambda2 > 0 requires teacher features");
        require(student_features, ErrorCode::invalid_argument,
                "total_loss: lambda2 > 0 requires student features");
        loss = add(loss, scale(loss_fs(student_features, *teacher_features, config.norm_exponent),
                               static_cast<T>(config.lambda2)));
    }
    return loss;
}

#define KDPOSE_INSTANTIATE_LOSSES(T)                                                          \
    template NodePtr<T> loss_mse<T>(const NodePtr<T>&, const NodePtr<T>&, const Tensor<T>&,   \
                                    const Tensor<T>&);                                        \
    template NodePtr<T> loss_od<T>(const NodePtr<T>&, const NodePtr<T>&, const Tensor<T>&,    \
                                   const Tensor<T>&);                                         \
    template Tensor<T> similarity_matrix<T>(const Tensor<T>&, int,                           \
                                            std::vector<std::size_t>*);                      \
    template NodePtr<T> similarity_matrix<T>(const NodePtr<T>&, int,                         \
                                             std::vector<std::size_t>*);                     \
    template NodePtr<T> loss_fs<T>(const NodePtr<T>&, const Tensor<T>&, int);                \
    template NodePtr<T> total_loss<T>(const NodePtr<T>&, const NodePtr<T>&, const Tensor<T>&, \
                                      const Tensor<T>&, const Tensor<T>*, const Tensor<T>*,  \
                                      const NodePtr<T>&, const Tensor<T>*,                   \
                                      const DistillConfig&);

KDPOSE_INSTANTIATE_LOSSES(float)
KDPOSE_INSTANTIATE_LOSSES(double)

} // namespace kdpose
