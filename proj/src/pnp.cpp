#include "kdpose/pnp.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace kdpose {

namespace {

constexpr int kMaxIterations = 50;
constexpr double kInitialDamping = 1e-3;
constexpr double kDampingFactor = 10.0;
constexpr double kRelativeCostTolerance = 1e-10;
constexpr int kMaxConsecutiveRejections = 10;

std::vector<Correspondence> usable(const std::vector<Correspondence>& correspondences) {
    std::vector<Correspondence> out;
    for (const auto& c : correspondences) {
        require(std::isfinite(c.weight) && c.weight >= 0, ErrorCode::invalid_argument,
                "correspondence weight must be finite and nonnegative");
        if (c.weight > 0) out.push_back(c);
    }
    return out;
}

void check_not_collinear(const std::vector<Correspondence>& corrs) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& c : corrs) mean += c.point3d;
    mean /= static_cast<double>(corrs.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& c : corrs) {
        const Eigen::Vector3d d = c.point3d - mean;
        scatter += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    // Two near-zero eigenvalues means the points lie on a line.
    require(eig.eigenvalues()(1) > 1e-9 * std::max(1.0, eig.eigenvalues()(2)),
            ErrorCode::degenerate_geometry, "solve_pnp: 3D points are collinear");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    if (theta < 1e-12) return Eigen::Matrix3d::Identity() + skew(omega);
    return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

Eigen::Matrix3d closest_rotation(const Eigen::Matrix3d& m) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

Pose dlt_initialize(const std::vector<Correspondence>& corrs,
                    const CameraIntrinsics& intrinsics) {
    const int n = static_cast<int>(corrs.size());

    // Hartley normalization of the 3D points for conditioning.
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& c : corrs) centroid += c.point3d;
    centroid /= n;
    double rms = 0;
    for (const auto& c : corrs) rms += (c.point3d - centroid).squaredNorm();
    rms = std::sqrt(rms / n);
    const double scale = rms > 1e-12 ? std::sqrt(3.0) / rms : 1.0;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d x = scale * (corrs[i].point3d - centroid);
        const double un = (corrs[i].point2d.x() - intrinsics.cx) / intrinsics.fx;
        const double vn = (corrs[i].point2d.y() - intrinsics.cy) / intrinsics.fy;
        const double w = std::sqrt(corrs[i].weight);
        a.block<1, 3>(2 * i, 0) = w * x.transpose();
        a(2 * i, 3) = w;
        a.block<1, 3>(2 * i, 8) = -w * un * x.transpose();
        a(2 * i, 11) = -w * un;
        a.block<1, 3>(2 * i + 1, 4) = w * x.transpose();
        a(2 * i + 1, 7) = w;
        a.block<1, 3>(2 * i + 1, 8) = -w * vn * x.transpose();
        a(2 * i + 1, 11) = -w * vn;
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    const Eigen::VectorXd p = svd.matrixV().col(11);

    Eigen::Matrix3d m_prime;
    m_prime << p(0), p(1), p(2), p(4), p(5), p(6), p(8), p(9), p(10);
    Eigen::Vector3d t_prime(p(3), p(7), p(11));

    // Undo the 3D normalization: M = s*M', t = t' - M*centroid.
    Eigen::Matrix3d m = scale * m_prime;
    Eigen::Vector3d t = t_prime - m * centroid;

    // The null vector is defined up to sign; pick the one that puts the
    // majority of points in front of the camera.
    int positive = 0;
    for (const auto& c : corrs)
        if (m.row(2).dot(c.point3d) + t.z() > 0) ++positive;
    if (2 * positive < n) {
        m = -m;
        t = -t;
    }

    const Eigen::JacobiSVD<Eigen::Matrix3d> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double sigma = msvd.singularValues().mean();
    require(sigma > 1e-12, ErrorCode::degenerate_geometry, "solve_pnp: degenerate DLT solution");

    Pose pose;
    pose.rotation = closest_rotation(m);
    pose.translation = t / sigma;
    return pose;
}

struct Residuals {
    double cost = 0;   // sum of weighted squared pixel residuals
    bool valid = true; // false if any point fell behind the camera
};

Residuals evaluate_cost(const Pose& pose, const std::vector<Correspondence>& corrs,
                        const CameraIntrinsics& intrinsics) {
    Residuals r;
    for (const auto& c : corrs) {
        const Eigen::Vector3d y = transform_point(pose, c.point3d);
        if (y.z() <= 1e-9) {
            r.valid = false;
            return r;
        }
        const Eigen::Vector2d proj(intrinsics.fx * y.x() / y.z() + intrinsics.cx,
                                   intrinsics.fy * y.y() / y.z() + intrinsics.cy);
        r.cost += c.weight * (proj - c.point2d).squaredNorm();
    }
    return r;
}

Pose refine_lm(Pose pose, const std::vector<Correspondence>& corrs,
               const CameraIntrinsics& intrinsics, double total_weight) {
    Residuals current = evaluate_cost(pose, corrs, intrinsics);
    require(current.valid, ErrorCode::behind_camera,
            "solve_pnp: initialization leaves points behind the camera");

    double damping = kInitialDamping;
    int consecutive_rejections = 0;

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        for (const auto& c : corrs) {
            const Eigen::Vector3d rx = pose.rotation * c.point3d;
            const Eigen::Vector3d y = rx + pose.translation;
            const double z = y.z();
            const Eigen::Vector2d proj(intrinsics.fx * y.x() / z + intrinsics.cx,
                                       intrinsics.fy * y.y() / z + intrinsics.cy);
            const Eigen::Vector2d res = proj - c.point2d;
            Eigen::Matrix<double, 2, 3> dproj;
            dproj << intrinsics.fx / z, 0, -intrinsics.fx * y.x() / (z * z),
                     0, intrinsics.fy / z, -intrinsics.fy * y.y() / (z * z);
            Eigen::Matrix<double, 2, 6> jac;
            jac.block<2, 3>(0, 0) = -dproj * skew(rx); // left-increment on R
            jac.block<2, 3>(0, 3) = dproj;
            h += c.weight * jac.transpose() * jac;
            g += c.weight * jac.transpose() * res;
        }

        bool accepted = false;
        while (true) {
            Eigen::Matrix<double, 6, 6> damped = h;
            for (int i = 0; i < 6; ++i)
                damped(i, i) += damping * std::max(h(i, i), 1e-12);
            const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);

            Pose candidate;
            candidate.rotation = exp_so3(delta.head<3>()) * pose.rotation;
            candidate.translation = pose.translation + delta.tail<3>();
            const Residuals next = evaluate_cost(candidate, corrs, intrinsics);

            if (next.valid && next.cost < current.cost) {
                const double relative_drop =
                    (current.cost - next.cost) / std::max(current.cost, 1e-300);
                pose = candidate;
                current = next;
                damping /= kDampingFactor;
                consecutive_rejections = 0;
                accepted = true;
                if (relative_drop < kRelativeCostTolerance) iter = kMaxIterations;
                break;
            }

            damping *= kDampingFactor;
            if (++consecutive_rejections >= kMaxConsecutiveRejections) {
                pose.rotation = closest_rotation(pose.rotation);
                throw PnpDivergence("solve_pnp: LM failed to reduce the cost", pose,
                                    std::sqrt(current.cost / total_weight));
            }
        }
        if (!accepted) break;
    }

    pose.rotation = closest_rotation(pose.rotation); // clean up integration drift
    return pose;
}

} // namespace

Pose solve_pnp(const std::vector<Correspondence>& correspondences,
               const CameraIntrinsics& intrinsics) {
    validate_intrinsics(intrinsics);
    const std::vector<Correspondence> corrs = usable(correspondences);
    require(corrs.size() >= 6, ErrorCode::insufficient_data,
            "solve_pnp needs at least 6 correspondences with nonzero weight, got " +
                std::to_string(corrs.size()));
    check_not_collinear(corrs);

    double total_weight = 0;
    for (const auto& c : corrs) total_weight += c.weight;

    Pose pose = dlt_initialize(corrs, intrinsics);
    pose = refine_lm(pose, corrs, intrinsics, total_weight);

    if (pose.translation.z() <= 0)
        throw PnpDivergence("solve_pnp: solution places the object behind the camera", pose,
                            reprojection_rmse(pose, correspondences, intrinsics));
    validate_pose(pose);
    return pose;
}

double reprojection_rmse(const Pose& pose, const std::vector<Correspondence>& correspondences,
                         const CameraIntrinsics& intrinsics) {
    double cost = 0;
    double total_weight = 0;
    for (const auto& c : correspondences) {
        if (c.weight <= 0) continue;
        const Eigen::Vector2d proj = project(intrinsics, transform_point(pose, c.point3d));
        cost += c.weight * (proj - c.point2d).squaredNorm();
        total_weight += c.weight;
    }
    require(total_weight > 0, ErrorCode::insufficient_data,
            "reprojection_rmse: no correspondence with positive weight");
    return std::sqrt(cost / total_weight);
}

} // namespace kdpose
