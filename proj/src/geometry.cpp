#include "kdpose/geometry.hpp"

#include <cmath>
#include <limits>

namespace kdpose {

void validate_pose(const Pose& pose) {
    const Eigen::Matrix3d residual =
        pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity();
    require(residual.cwiseAbs().maxCoeff() < 1e-6, ErrorCode::invalid_argument,
            "pose rotation is not orthonormal");
    require(pose.rotation.determinant() > 0, ErrorCode::invalid_argument,
            "pose rotation has negative determinant");
    require(pose.translation.allFinite(), ErrorCode::invalid_argument,
            "pose translation is not finite");
}

void validate_intrinsics(const CameraIntrinsics& intrinsics) {
    require(intrinsics.fx > 0 && intrinsics.fy > 0, ErrorCode::invalid_argument,
            "focal lengths must be positive");
}

double max_pairwise_distance(const std::vector<Eigen::Vector3d>& points) {
    double best = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            best = std::max(best, (points[i] - points[j]).norm());
    return best;
}

void validate_model(const ObjectModel& model) {
    require(model.points.size() >= 4, ErrorCode::invalid_argument,
            "object model needs at least 4 points");
    const double diameter = max_pairwise_distance(model.points);
    require(std::abs(diameter - model.diameter) <= 1e-6 * std::max(1.0, diameter),
            ErrorCode::invalid_argument, "stored diameter does not match point set");
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int i = 0; i < 8; ++i) centroid += model.keypoints3d[i];
    centroid /= 8.0;
    require((centroid - model.keypoints3d[8]).norm() < 1e-6, ErrorCode::invalid_argument,
            "keypoints3d[8] must be the centroid of the 8 box vertices");
}

std::vector<Eigen::Vector3d> transform_points(const Pose& pose,
                                              const std::vector<Eigen::Vector3d>& points) {
    std::vector<Eigen::Vector3d> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(transform_point(pose, p));
    return out;
}

Eigen::Vector2d project(const CameraIntrinsics& intrinsics, const Eigen::Vector3d& point_cam) {
    require(point_cam.z() > 0, ErrorCode::behind_camera,
            "point is behind the camera (z <= 0)");
    return {intrinsics.fx * point_cam.x() / point_cam.z() + intrinsics.cx,
            intrinsics.fy * point_cam.y() / point_cam.z() + intrinsics.cy};
}

double add_metric(const ObjectModel& model, const Pose& gt, const Pose& est) {
    require(!model.points.empty(), ErrorCode::invalid_argument, "empty model");
    double acc = 0;
    for (const auto& x : model.points)
        acc += (transform_point(gt, x) - transform_point(est, x)).norm();
    return acc / static_cast<double>(model.points.size());
}

double adds_metric(const ObjectModel& model, const Pose& gt, const Pose& est) {
    require(!model.points.empty(), ErrorCode::invalid_argument, "empty model");
    const auto gt_points = transform_points(gt, model.points);
    const auto est_points = transform_points(est, model.points);
    double acc = 0;
    for (const auto& g : gt_points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : est_points) best = std::min(best, (g - e).squaredNorm());
        acc += std::sqrt(best);
    }
    return acc / static_cast<double>(model.points.size());
}

double projection_metric(const ObjectModel& model, const CameraIntrinsics& intrinsics,
                         const Pose& gt, const Pose& est) {
    require(!model.points.empty(), ErrorCode::invalid_argument, "empty model");
    double acc = 0;
    for (const auto& x : model.points) {
        const Eigen::Vector2d pg = project(intrinsics, transform_point(gt, x));
        const Eigen::Vector2d pe = project(intrinsics, transform_point(est, x));
        acc += (pg - pe).norm();
    }
    return acc / static_cast<double>(model.points.size());
}

bool pose_correct(const ObjectModel& model, const CameraIntrinsics& intrinsics, const Pose& gt,
                  const Pose& est, CorrectnessMetric metric) {
    switch (metric) {
    case CorrectnessMetric::add_10d: {
        const double d = model.symmetric ? adds_metric(model, gt, est)
                                         : add_metric(model, gt, est);
        return d < 0.1 * model.diameter; // strict, per threshold semantics
    }
    case CorrectnessMetric::proj_5px:
        return projection_metric(model, intrinsics, gt, est) < 5.0;
    }
    raise(ErrorCode::internal, "unknown correctness metric");
}

double rotation_geodesic_deg(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb) {
    const double c = ((ra.transpose() * rb).trace() - 1.0) / 2.0;
    const double clamped = std::min(1.0, std::max(-1.0, c));
    return std::acos(clamped) * 180.0 / M_PI;
}

Eigen::Matrix3d rotation_about_z(double radians) {
    Eigen::Matrix3d r;
    const double c = std::cos(radians), s = std::sin(radians);
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
    double q[4];
    double norm_sq = 0;
    do {
        norm_sq = 0;
        for (double& qi : q) {
            qi = rng.normal();
            norm_sq += qi * qi;
        }
    } while (norm_sq < 1e-12);
    const double inv = 1.0 / std::sqrt(norm_sq);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

} // namespace kdpose
