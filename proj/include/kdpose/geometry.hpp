#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "kdpose/error.hpp"
#include "kdpose/rng.hpp"

namespace kdpose {

/// Rigid transform from object to camera coordinates. Units: millimeters.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose identity() { return {}; }
};

/// Throws if R is not orthonormal with positive determinant (tol 1e-6).
void validate_pose(const Pose& pose);

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
};

void validate_intrinsics(const CameraIntrinsics& intrinsics);

/// 3D model points plus the 9 canonical keypoints: the 8 bounding-box
/// vertices followed by their centroid.
struct ObjectModel {
    std::string name;
    int class_id = 0;
    std::vector<Eigen::Vector3d> points;          // mm
    std::array<Eigen::Vector3d, 9> keypoints3d{}; // mm
    double diameter = 0;                          // mm, max pairwise point distance
    bool symmetric = false;
};

/// Checks m >= 4, the diameter definition (1e-6 relative), and that
/// keypoints3d[8] is the centroid of the 8 box vertices.
void validate_model(const ObjectModel& model);

double max_pairwise_distance(const std::vector<Eigen::Vector3d>& points);

inline Eigen::Vector3d transform_point(const Pose& pose, const Eigen::Vector3d& p) {
    return pose.rotation * p + pose.translation;
}

std::vector<Eigen::Vector3d> transform_points(const Pose& pose,
                                              const std::vector<Eigen::Vector3d>& points);

/// Pinhole projection of a camera-frame point; z must be > 0.
Eigen::Vector2d project(const CameraIntrinsics& intrinsics, const Eigen::Vector3d& point_cam);

/// Mean distance between model points under the two poses (mm).
double add_metric(const ObjectModel& model, const Pose& gt, const Pose& est);

/// Mean closest-point distance (exact O(m^2) search), for symmetric objects.
double adds_metric(const ObjectModel& model, const Pose& gt, const Pose& est);

/// Mean pixel distance between projections of the model points.
double projection_metric(const ObjectModel& model, const CameraIntrinsics& intrinsics,
                         const Pose& gt, const Pose& est);

enum class CorrectnessMetric {
    add_10d,  // ADD (ADD-S when symmetric) < 0.1 * diameter, strict
    proj_5px, // mean projection error < 5 px, strict
};

bool pose_correct(const ObjectModel& model, const CameraIntrinsics& intrinsics, const Pose& gt,
                  const Pose& est, CorrectnessMetric metric);

/// Geodesic angle between two rotations, in degrees, clamped to [0, 180].
double rotation_geodesic_deg(const Eigen::Matrix3d& ra, const Eigen::Matrix3d& rb);

Eigen::Matrix3d rotation_about_z(double radians);

/// Uniform random rotation (unit quaternion from four normals).
Eigen::Matrix3d random_rotation(Rng& rng);

} // namespace kdpose
