#pragma once

#include "kdpose/geometry.hpp"

namespace kdpose {

struct Correspondence {
    Eigen::Vector3d point3d; // object frame, mm
    Eigen::Vector2d point2d; // pixels
    double weight = 1.0;     // >= 0; zero-weight entries are ignored
};

/// Thrown when Levenberg-Marquardt fails to converge; carries the best pose
/// reached so far.
class PnpDivergence : public Error {
public:
    PnpDivergence(const std::string& message, Pose best, double best_rmse_px)
        : Error(ErrorCode::no_convergence, message), best_pose(best), best_rmse(best_rmse_px) {}

    Pose best_pose;
    double best_rmse;
};

/// Recovers the 6D pose from 2D-3D correspondences: weighted DLT on
/// normalized coordinates, projection onto the rotation manifold
/// (orthogonal Procrustes, sign-corrected), then LM refinement of the
/// weighted reprojection error. Requires >= 6 usable correspondences.
Pose solve_pnp(const std::vector<Correspondence>& correspondences,
               const CameraIntrinsics& intrinsics);

/// Weighted root-mean-square pixel residual; zero-weight correspondences
/// are excluded.
double reprojection_rmse(const Pose& pose, const std::vector<Correspondence>& correspondences,
                         const CameraIntrinsics& intrinsics);

} // namespace kdpose
