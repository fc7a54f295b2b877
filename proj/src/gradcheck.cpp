#include "kdpose/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "kdpose/losses.hpp"
#include "kdpose/network.hpp"
#include "kdpose/rng.hpp"

namespace kdpose {

namespace {

constexpr double kStep = 1e-5;
constexpr double kRelTol = 1e-4;

using MakeLoss = std::function<NodePtr<double>()>;

Tensor<double> random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                             double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Compares analytic gradients of `make_loss` w.r.t. every param against
/// central differences. coords_per_param < 0 checks every coordinate.
void check_gradients(const std::string& suite, const std::vector<NodePtr<double>>& params,
                     const MakeLoss& make_loss, int coords_per_param, Rng& rng,
                     GradcheckResult& result, std::ostream* log) {
    result.instances += 1;
    for (const auto& p : params) p->grad.zero();
    NodePtr<double> loss = make_loss();
    backward(loss);
    const double f0 = loss->value[0];

    std::vector<Tensor<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p->grad);

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Node<double>& p = *params[pi];
        const std::size_t n = p.value.numel();
        std::vector<std::size_t> coords;
        if (coords_per_param < 0 || static_cast<std::size_t>(coords_per_param) >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < coords_per_param; ++i)
                coords.push_back(static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
        }
        for (const std::size_t i : coords) {
            const double saved = p.value[i];
            p.value[i] = saved + kStep;
            const double f_plus = make_loss()->value[0];
            p.value[i] = saved - kStep;
            const double f_minus = make_loss()->value[0];
            p.value[i] = saved;
            const double fd = (f_plus - f_minus) / (2 * kStep);
            const double a = analytic[pi][i];

            result.checks += 1;
            const double err = std::abs(a - fd);
            const double tol =
                kRelTol * std::max(std::abs(a), std::abs(fd)) + 5e-9 * std::max(1.0, std::abs(f0));
            const double rel = err / std::max({std::abs(a), std::abs(fd), 1e-12});
            if (err > 1e-12) result.max_rel_err = std::max(result.max_rel_err, rel);
            if (err > tol) {
                result.failures += 1;
                std::ostringstream label;
                label << suite << " param" << pi << "[" << i << "] analytic=" << a
                      << " fd=" << fd;
                result.failed.push_back(label.str());
                if (log) *log << "FAIL " << label.str() << "\n";
            }
        }
    }
}

void suite_conv2d(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const auto cin = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const auto cout = static_cast<std::size_t>(rng.uniform_int(1, 4));
        const std::size_t k = rng.uniform01() < 0.5 ? 1 : 3;
        const int stride = rng.uniform01() < 0.5 ? 1 : 2;
        const int pad = k == 3 ? static_cast<int>(rng.uniform_int(0, 1)) : 0;
        const auto h = static_cast<std::size_t>(rng.uniform_int(4, 8));
        const auto w = static_cast<std::size_t>(rng.uniform_int(4, 8));

        auto x = parameter(random_tensor(rng, {cin, h, w}));
        auto weight = parameter(random_tensor(rng, {cout, cin, k, k}));
        auto bias = parameter(random_tensor(rng, {cout}));
        const std::size_t oh = (h + 2 * pad - k) / stride + 1;
        const std::size_t ow = (w + 2 * pad - k) / stride + 1;
        auto target = constant(random_tensor(rng, {cout, oh, ow}));
        const auto make = [&]() { return mse(conv2d(x, weight, bias, stride, pad), target); };
        check_gradients("conv2d", {x, weight, bias}, make, -1, rng, result, log);
    }
}

void suite_relu(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(3, 24));
        Tensor<double> values({n});
        for (std::size_t i = 0; i < n; ++i) {
            // keep away from the kink at 0 so finite differences are valid
            double v = rng.uniform(0.05, 1.0);
            if (rng.uniform01() < 0.5) v = -v;
            values[i] = v;
        }
        auto x = parameter(std::move(values));
        auto target = constant(random_tensor(rng, {n}));
        const auto make = [&]() { return mse(relu(x), target); };
        check_gradients("relu", {x}, make, -1, rng, result, log);
    }
}

void suite_elementwise(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 16));
        auto a = parameter(random_tensor(rng, {n}));
        auto b = parameter(random_tensor(rng, {n}));
        auto target = constant(random_tensor(rng, {n}));
        const double factor = rng.uniform(-2.0, 2.0);
        const auto make = [&]() { return mse(scale(add(a, b), factor), target); };
        check_gradients("add/scale/mse", {a, b}, make, -1, rng, result, log);

        const auto make_sum = [&]() { return sum(scale(a, factor)); };
        check_gradients("sum", {a}, make_sum, -1, rng, result, log);

        const auto make_ssd = [&]() { return sum_sq_diff(a, b); };
        check_gradients("sum_sq_diff", {a, b}, make_ssd, -1, rng, result, log);
    }
}

void suite_similarity(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const auto c = static_cast<std::size_t>(rng.uniform_int(1, 4));
        const auto h = static_cast<std::size_t>(rng.uniform_int(2, 3));
        const auto w = static_cast<std::size_t>(rng.uniform_int(2, 3));
        const int e = (inst % 2) + 1;
        auto f = parameter(random_tensor(rng, {c, h, w}, 0.2, 1.5));
        auto target = constant(random_tensor(rng, {h * w, h * w}));
        const auto make = [&]() { return sum_sq_diff(similarity_matrix(f, e), target); };
        check_gradients("similarity_matrix", {f}, make, -1, rng, result, log);
    }
}

void suite_loss_fs(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const auto cs = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const auto ct = static_cast<std::size_t>(rng.uniform_int(2, 4));
        const auto h = static_cast<std::size_t>(rng.uniform_int(2, 3));
        const auto w = static_cast<std::size_t>(rng.uniform_int(2, 3));
        const int e = (inst % 2) + 1;
        auto student = parameter(random_tensor(rng, {cs, h, w}, 0.2, 1.5));
        const Tensor<double> teacher = random_tensor(rng, {ct, h, w}, 0.2, 1.5);
        const auto make = [&]() { return loss_fs(student, teacher, e); };
        check_gradients("loss_fs", {student}, make, -1, rng, result, log);
    }
}

void suite_map_losses(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t h = 3, w = 3;
        auto pred_maps = parameter(random_tensor(rng, {9, h, w}));
        auto pred_fields = parameter(random_tensor(rng, {16, h, w}));
        const Tensor<double> gt_maps = random_tensor(rng, {9, h, w});
        const Tensor<double> gt_fields = random_tensor(rng, {16, h, w});
        const Tensor<double> t_maps = random_tensor(rng, {9, h, w});
        const Tensor<double> t_fields = random_tensor(rng, {16, h, w});
        auto feat = parameter(random_tensor(rng, {3, 2, 2}, 0.2, 1.5));
        const Tensor<double> t_feat = random_tensor(rng, {5, 2, 2}, 0.2, 1.5);

        const auto make_mse = [&]() {
            return loss_mse(pred_maps, pred_fields, gt_maps, gt_fields);
        };
        check_gradients("loss_mse", {pred_maps, pred_fields}, make_mse, 6, rng, result, log);

        const auto make_od = [&]() {
            return loss_od(pred_maps, pred_fields, t_maps, t_fields);
        };
        check_gradients("loss_od", {pred_maps, pred_fields}, make_od, 6, rng, result, log);

        DistillConfig cfg;
        cfg.lambda1 = 0.7;
        cfg.lambda2 = 0.05;
        cfg.norm_exponent = (inst % 2) + 1;
        const auto make_total = [&]() {
            return total_loss(pred_maps, pred_fields, gt_maps, gt_fields, &t_maps, &t_fields,
                              feat, &t_feat, cfg);
        };
        check_gradients("total_loss", {pred_maps, pred_fields, feat}, make_total, 6, rng, result,
                        log);
    }
}

void suite_network(Rng& rng, GradcheckResult& result, std::ostream* log) {
    for (int inst = 0; inst < 20; ++inst) {
        const NetworkSpec spec = NetworkSpec::student_default();
        PoseNet<double> student(spec, rng.next_u64());
        PoseNet<double> teacher(spec, rng.next_u64());
        const Tensor<double> image = random_tensor(rng, {3, 16, 16}, 0.0, 1.0);
        const Tensor<double> gt_maps = random_tensor(rng, {9, 4, 4}, 0.0, 1.0);
        const Tensor<double> gt_fields = random_tensor(rng, {16, 4, 4}, -1.0, 1.0);
        const ForwardTensors<double> t_out = teacher.forward_raw(image);

        DistillConfig cfg;
        cfg.lambda1 = (inst % 3 == 0) ? 0.0 : 0.5;
        cfg.lambda2 = (inst % 2 == 0) ? 0.01 : 0.00005;
        cfg.norm_exponent = (inst % 2) + 1;
        const auto make = [&]() {
            const ForwardNodes<double> out = student.forward(image);
            return total_loss(out.maps, out.fields, gt_maps, gt_fields,
                              cfg.lambda1 > 0 ? &t_out.maps : nullptr,
                              cfg.lambda1 > 0 ? &t_out.fields : nullptr, out.backbone_features,
                              &t_out.backbone_features, cfg);
        };
        check_gradients("network_total_loss", student.parameters(), make, 3, rng, result, log);
    }
}

} // namespace

GradcheckResult run_gradcheck(std::uint64_t seed, std::ostream* log) {
    Rng rng(seed);
    GradcheckResult result;
    suite_conv2d(rng, result, log);
    suite_relu(rng, result, log);
    suite_elementwise(rng, result, log);
    suite_similarity(rng, result, log);
    suite_loss_fs(rng, result, log);
    suite_map_losses(rng, result, log);
    suite_network(rng, result, log);
    if (log) *log << gradcheck_summary(result) << "\n";
    return result;
}

std::string gradcheck_summary(const GradcheckResult& result) {
    std::ostringstream out;
    out << "gradcheck: " << result.instances << " instances, " << result.checks
        << " coordinates, " << result.failures << " failures, max rel err " << result.max_rel_err;
    return out.str();
}

} // namespace kdpose
