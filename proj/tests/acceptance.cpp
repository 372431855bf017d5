// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>

#include "dnr/config.hpp"
#include "dnr/dataset.hpp"
#include "dnr/dnrnet.hpp"
#include "dnr/metrics.hpp"
#include "dnr/nn/adam.hpp"
#include "dnr/nn/layers.hpp"
#include "dnr/nn/resnet.hpp"
#include "dnr/objective.hpp"
#include "dnr/osem.hpp"
#include "dnr/phantom.hpp"
#include "dnr/train.hpp"
#include "support.hpp"

using namespace dnr;
using namespace dnr::test;
using nn::Tensor4;

namespace {

constexpr double adjoint_tol = 1e-10;
constexpr double adjoint_seconds = 10.0;
constexpr double gradient_tol = 1e-6;
constexpr double gradient_seconds = 60.0;
constexpr double stationarity_tol = 1e-9;
constexpr double monotone_slack = 1e-9;
constexpr double osem_nmse_ratio = 0.5;
constexpr double layer_fd_tol = 1e-5;
constexpr double unroll_fd_tol = 1e-4;
constexpr double nn_seconds = 600.0;
constexpr double adam_tol = 1e-12;
constexpr double ssim_identity_tol = 1e-9;
constexpr double radius_tol = 1e-3;
constexpr double val_ratio = 0.5;
constexpr std::uint64_t held_out_seed = 777;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
    std::printf("%s  %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Loss>
std::vector<double> numeric_gradient(std::span<double> values, Loss&& loss, double rel_step = 1e-5) {
    std::vector<double> g(values.size());
    for (size_t k = 0; k < values.size(); ++k) {
        const double saved = values[k];
        const double h = rel_step * std::max(1.0, std::abs(saved));
        values[k] = saved + h;
        const double up = loss();
        values[k] = saved - h;
        const double down = loss();
        values[k] = saved;
        g[k] = (up - down) / (2 * h);
    }
    return g;
}

Tensor4<double> random_tensor(int b, int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor4<double> t(b, c, h, w);
    for (auto& v : t.data) v = u(rng);
    return t;
}

double weighted_sum(const Tensor4<double>& out, const Tensor4<double>& w) {
    double s = 0.0;
    for (size_t k = 0; k < out.data.size(); ++k) s += out.data[k] * w.data[k];
    return s;
}

double nmse(const Image& f, const Image& truth) {
    double num = 0.0, den = 0.0;
    for (size_t j = 0; j < f.data.size(); ++j) {
        num += (f.data[j] - truth.data[j]) * (f.data[j] - truth.data[j]);
        den += truth.data[j] * truth.data[j];
    }
    return num / den;
}

Outcome adjoint() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto A = build_system_matrix(Geometry::standard(32));
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto f = random_image(32, 10 + k);
        const auto y = random_sinogram(24, 32, 50 + k);
        const double lhs = dot(forward_project(A, f).data, y.data);
        const double rhs = dot(f.data, back_project(A, y).data);
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
    }
    const double t = seconds_since(t0);
    return {worst <= adjoint_tol && t < adjoint_seconds, fmt("max rel %.2e (tol %.0e), %.2f s", worst, adjoint_tol, t)};
}

Outcome objective_gradient() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto A = build_system_matrix(Geometry::parallel(16, 8, 16, 2 * std::numbers::pi));
    ObjectiveConfig cfg;
    cfg.include_constant = false;
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        const auto f = random_image(16, 500 + inst, 0.2, 2.0);
        const auto y = sample_poisson(forward_project(A, random_image(16, 600 + inst, 0.2, 2.0)), 700 + inst);
        const auto g = grad_neg_loglik(f, y, A, cfg);
        std::vector<double> fd(f.data.size());
        for (size_t j = 0; j < f.data.size(); ++j) {
            // Fourth-order central stencil; steps stay inside the positive orthant.
            const double h = 1e-3 * std::max(f.data[j], 1.0);
            auto at = [&](double dx) {
                Image probe = f;
                probe.data[j] += dx;
                return neg_loglik(probe, y, A, cfg);
            };
            fd[j] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        }
        worst = std::max(worst, rel_error(g.data, fd));
    }
    const double t = seconds_since(t0);
    return {worst <= gradient_tol && t < gradient_seconds, fmt("max rel %.2e (tol %.0e), %.2f s", worst, gradient_tol, t)};
}

Outcome stationarity() {
    const auto A = build_system_matrix(Geometry::standard(32));
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        const auto f = random_image(32, 40 + k, 0.1, 5.0);
        worst = std::max(worst, max_abs(grad_neg_loglik(f, forward_project(A, f), A).data));
    }
    return {worst <= stationarity_tol, fmt("max |grad| %.2e (tol %.0e)", worst, stationarity_tol)};
}

Outcome em_monotonicity() {
    const int n = 32;
    const auto A = build_system_matrix(Geometry::standard(n));
    const auto truth = scale_to_counts(render_phantom(preset_phantom("A", n)), A, 5e4);
    const auto y = sample_poisson(forward_project(A, truth), 17);
    OsemConfig cfg;
    cfg.subsets = 1;
    cfg.iterations = 20;
    double prev = neg_loglik(Image(n, cfg.init_value), y, A);
    double worst_rise = -1e300;
    int steps = 0;
    osem_reconstruct(y, A, cfg, std::nullopt, [&](int, const Image& f) {
        const double u = neg_loglik(f, y, A);
        worst_rise = std::max(worst_rise, u - prev);
        prev = u;
        ++steps;
    });
    return {steps == 20 && worst_rise <= monotone_slack, fmt("%d steps, largest step change %.3e", steps, worst_rise)};
}

Outcome osem_protocol() {
    const int n = 64;
    const auto A = build_system_matrix(Geometry::standard(n));
    const auto truth = scale_to_counts(render_phantom(preset_phantom("A", n)), A, 1e5);
    OsemConfig cfg;
    cfg.iterations = 8;
    cfg.subsets = 4;
    const double before = nmse(Image(n, cfg.init_value), truth);
    const double after = nmse(osem_reconstruct(forward_project(A, truth), A, cfg), truth);
    return {after <= osem_nmse_ratio * before, fmt("NMSE %.4f -> %.4f (ratio %.3f, need <= %.2f)", before, after,
                                                   after / before, osem_nmse_ratio)};
}

Outcome nn_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double conv_err = 0.0, bn_err = 0.0, relu_err = 0.0, resnet_err = 0.0, unroll_err = 0.0;

    for (int inst = 0; inst < 3; ++inst) {
        std::mt19937_64 rng(inst);
        nn::ConvLayer<double> conv(2, 3);
        conv.init_kaiming(rng, 0.01);
        for (auto& b : conv.bias) b = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
        auto x = random_tensor(2, 2, 5, 5, 10 + inst);
        const auto w = random_tensor(2, 3, 5, 5, 20 + inst);
        auto loss = [&] { return weighted_sum(nn::conv_forward(conv, x), w); };
        const auto g = nn::conv_backward(conv, x, w);
        conv_err = std::max({conv_err, rel_error(g.grad_x.data, numeric_gradient(x.data, loss)),
                             rel_error(g.grad_weight, numeric_gradient(conv.weight, loss)),
                             rel_error(g.grad_bias, numeric_gradient(conv.bias, loss))});
    }
    for (nn::Mode mode : {nn::Mode::train, nn::Mode::eval}) {
        nn::BatchNormLayer<double> bn(2);
        bn.gamma = {1.3, 0.6};
        bn.beta = {0.2, -0.4};
        bn.running_mean = {0.3, -0.2};
        bn.running_var = {1.5, 0.7};
        bn.mode = mode;
        auto x = random_tensor(3, 2, 4, 4, 60);
        const auto w = random_tensor(3, 2, 4, 4, 70);
        auto loss = [&] {
            auto scratch = bn;
            return weighted_sum(nn::batchnorm_forward(scratch, x), w);
        };
        const auto g = nn::batchnorm_backward(bn, x, w);
        bn_err = std::max({bn_err, rel_error(g.grad_x.data, numeric_gradient(x.data, loss)),
                           rel_error(g.grad_gamma, numeric_gradient(bn.gamma, loss)),
                           rel_error(g.grad_beta, numeric_gradient(bn.beta, loss))});
    }
    {
        auto x = random_tensor(2, 2, 4, 4, 5);
        for (auto& v : x.data)
            if (std::abs(v) < 1e-3) v = 0.5;
        const auto w = random_tensor(2, 2, 4, 4, 6);
        auto loss = [&] { return weighted_sum(nn::leaky_relu(x, 0.01), w); };
        relu_err = rel_error(nn::leaky_relu_backward(x, w, 0.01).data, numeric_gradient(x.data, loss));
    }
    for (nn::Mode mode : {nn::Mode::train, nn::Mode::eval}) {
        std::mt19937_64 rng(100);
        nn::ResNetOperator<double> op(3);
        op.init(rng);
        op.visit("op", [&](nn::ParamRef<double> p) {
            if (p.name.find(".bn.") == std::string::npos) return;
            for (auto& v : p.value) v += std::uniform_real_distribution<double>(0.05, 0.4)(rng);
        });
        op.set_mode(mode);
        auto x = random_tensor(2, 1, 6, 6, 200);
        const auto w = random_tensor(2, 1, 6, 6, 300);
        nn::ResNetTape<double> tape;
        op.zero_grad();
        op.forward(x, &tape);
        const auto gx = op.backward(tape, w);
        auto loss = [&] {
            auto scratch = op;
            return weighted_sum(scratch.forward(x), w);
        };
        resnet_err = std::max(resnet_err, rel_error(gx.data, numeric_gradient(x.data, loss)));
        op.visit("op", [&](nn::ParamRef<double> p) {
            if (!p.trainable()) return;
            const std::vector<double> analytic(p.grad.begin(), p.grad.end());
            const auto numeric = numeric_gradient(p.value, loss);
            // Batch statistics cancel any shift entering the norm, so this bias has zero gradient.
            if (mode == nn::Mode::train && p.name.ends_with("conv2.bias")) {
                resnet_err = std::max(resnet_err, std::max(max_abs(analytic), max_abs(numeric)));
                return;
            }
            resnet_err = std::max(resnet_err, rel_error(analytic, numeric, 1e-8));
        });
    }
    {
        auto A = std::make_shared<const SystemMatrix>(build_system_matrix(Geometry::standard(16)));
        NetworkConfig net{2, 4};
        net.zero_init_updates = false;
        ObjectiveConfig obj;
        obj.eps_y = 1.0;
        DnrNet<double> model(A, net, obj);
        model.init(21);
        std::vector<Sinogram> ys;
        std::vector<Image> f0s, truths;
        for (std::uint64_t seed : {31, 32}) {
            const auto s = simulate_sample(sample_random_phantom(RandomizationLimits{}, 16, seed), *A, 2e4, seed);
            ys.push_back(s.sinogram);
            f0s.push_back(init_input(s.sinogram, *A));
            truths.push_back(s.truth);
        }
        auto x = to_tensor<double>(std::span<const Image>(f0s));
        const auto truth = to_tensor<double>(std::span<const Image>(truths));
        DnrTape<double> tape;
        model.zero_grad();
        const auto pred = model.forward(x, ys, &tape);
        Tensor4<double> grad(pred.b, pred.c, pred.h, pred.w);
        nn::mse_loss<double>(pred.data, truth.data, grad.data);
        const auto gx = model.backward(tape, grad);
        std::vector<double> scratch(pred.data.size());
        auto loss = [&] {
            DnrNet<double> copy = model;
            const auto p = copy.forward(x, ys);
            return nn::mse_loss<double>(p.data, truth.data, scratch);
        };
        unroll_err = rel_error(gx.data, numeric_gradient(x.data, loss));
        std::vector<double> analytic, numeric;
        model.visit([&](nn::ParamRef<double> p) {
            if (!p.trainable()) return;
            analytic.insert(analytic.end(), p.grad.begin(), p.grad.end());
            const auto g = numeric_gradient(p.value, loss);
            numeric.insert(numeric.end(), g.begin(), g.end());
        });
        unroll_err = std::max(unroll_err, rel_error(analytic, numeric));
    }
    const double layers = std::max({conv_err, bn_err, relu_err, resnet_err});
    const double t = seconds_since(t0);
    return {layers <= layer_fd_tol && unroll_err <= unroll_fd_tol && t < nn_seconds,
            fmt("conv %.1e bn %.1e lrelu %.1e resnet %.1e (tol %.0e); unroll %.1e (tol %.0e); %.1f s", conv_err,
                bn_err, relu_err, resnet_err, layer_fd_tol, unroll_err, unroll_fd_tol, t)};
}

Outcome adam_exact() {
    nn::AdamState s;
    std::vector<double> p{0.0}, g{1.0};
    double m = 0.0, v = 0.0, ref = 0.0, worst = 0.0, step1 = 0.0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1;
        v = 0.999 * v + 0.001;
        ref -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        const double before = p[0];
        nn::adam_step<double>(s, p, g);
        if (t == 1) step1 = p[0] - before;
        worst = std::max(worst, std::abs(p[0] - ref));
    }
    const double step_err = std::abs(step1 - (-0.000999999990));
    return {worst <= adam_tol && step_err <= adam_tol,
            fmt("max deviation %.1e, first step %.12f (tol %.0e)", worst, step1, adam_tol)};
}

Outcome metric_identities() {
    const auto f = render_phantom(preset_phantom("A", 64));
    const double s = ssim(f, f);

    Image h(4);
    std::vector<bool> roi(16, false), bg(16, false);
    for (int j = 0; j < 16; ++j) {
        if (j < 4) {
            h.data[j] = 4.0;
            roi[j] = true;
        } else {
            h.data[j] = (j % 2 == 0) ? 1.5 : 2.5;
            bg[j] = true;
        }
    }
    const double c = cnr(h, roi, bg);
    bool affine = true;
    for (auto [a, b] : {std::pair{2.0, 3.0}, std::pair{0.5, -1.0}, std::pair{8.0, 0.0}}) {
        Image g = h;
        for (auto& v : g.data) v = a * v + b;
        affine = affine && cnr(g, roi, bg) == 4.0;
    }
    return {std::abs(s - 1.0) <= ssim_identity_tol && c == 4.0 && affine,
            fmt("SSIM(F,F) = %.12f, CNR hand case = %.17g, affine invariant: %s", s, c, affine ? "yes" : "no")};
}

Outcome phantom_spots() {
    const int n = 8;
    const auto [x, y] = pixel_center(n, 3, 4);
    SourceSpec src;
    src.cx = x - 3.0;
    src.cy = y;
    src.u = src.v = 3.0;
    src.amplitude = 0.6;
    const double value = render_phantom(PhantomSpec{n, 0.2, {src}}).at(3, 4);

    SourceSpec e;
    e.u = 10.0;
    e.v = 5.0;
    e.phi = 0.0;
    const double r = geometric_radius(e, std::numbers::pi / 4);
    return {value == 0.2 + 0.6 / 2 && std::abs(r - 6.3246) <= radius_tol,
            fmt("boundary value %.17g (want %.17g), radius %.6f", value, 0.2 + 0.6 / 2, r)};
}

Outcome poisson_moments() {
    const auto draws = sample_poisson(Sinogram(100, 100, 100.0), 12345).data;
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= draws.size();
    double var = 0.0;
    for (double v : draws) var += (v - mean) * (v - mean);
    var /= draws.size() - 1;
    return {mean >= 97 && mean <= 103 && var >= 85 && var <= 115, fmt("mean %.3f, variance %.3f", mean, var)};
}

struct HeldOut {
    std::string name;
    PhantomSpec spec;
    Sample sample;
    Image osem;
};

struct DeskResult {
    Outcome end_to_end;
    Outcome filter_order;
    Outcome checkpoint;
};

DeskResult desk_scale() {
    const RunConfig cfg;
    const auto t0 = std::chrono::steady_clock::now();
    auto A = std::make_shared<const SystemMatrix>(build_system_matrix(cfg.geometry.build()));

    const Dataset ds = generate_dataset(cfg.limits, cfg.dataset_config(), *A);
    DnrNet<float> model(A, cfg.network, cfg.operator_config());
    model.init(cfg.model_seed);
    const auto train_report = train(model, ds, cfg.train, [&](const EpochLoss& e) {
        std::printf("      epoch %d  train %.4g  val %.4g  (%.0f s)\n", e.epoch, e.train_mse, e.val_mse,
                    seconds_since(t0));
        std::fflush(stdout);
    });
    const double v0 = train_report.epochs.front().val_mse;
    const double vN = train_report.epochs.back().val_mse;

    std::vector<HeldOut> phantoms;
    int ssim_wins = 0, cnr_wins = 0, ordered = 0;
    std::string scores, order_detail;
    ButterworthConfig fc30 = cfg.butterworth, fc15 = cfg.butterworth;
    fc30.cutoff = 0.3;
    fc15.cutoff = 0.15;
    for (const char* name : {"A", "B", "shepp_logan"}) {
        const auto spec = preset_phantom(name, cfg.geometry.n);
        const auto s = simulate_sample(spec, *A, cfg.total_counts, held_out_seed);
        const Image osem = osem_reconstruct(s.sinogram, *A, cfg.osem);
        const auto rows = score_table({{"dnr", model.reconstruct(s.sinogram)},
                                       {"osem", osem},
                                       {"osem_fc0.3", butterworth_filter(osem, fc30)},
                                       {"osem_fc0.15", butterworth_filter(osem, fc15)}},
                                      s.truth, spec);
        std::printf("      %-12s dnr %.3f/%.2f  osem %.3f/%.2f  fc0.3 %.3f  fc0.15 %.3f\n", name, rows[0].ssim,
                    rows[0].cnr, rows[1].ssim, rows[1].cnr, rows[2].ssim, rows[3].ssim);
        ssim_wins += rows[0].ssim > rows[1].ssim;
        cnr_wins += rows[0].cnr > rows[1].cnr;
        const bool mono = rows[3].ssim >= rows[2].ssim && rows[2].ssim >= rows[1].ssim;
        ordered += mono;
        order_detail += fmt("%s %s ", name, mono ? "ok" : "out of order");
    }
    const bool loss_ok = vN <= val_ratio * v0;
    DeskResult r;
    r.end_to_end = {loss_ok && ssim_wins >= 2 && cnr_wins >= 2,
                    fmt("val MSE %.4g -> %.4g (ratio %.3f, need <= %.1f); DNR beats OSEM on SSIM %d/3, CNR %d/3; %.0f s",
                        v0, vN, vN / v0, val_ratio, ssim_wins, cnr_wins, seconds_since(t0))};
    r.filter_order = {ordered == 3, order_detail + "(fc0.15 >= fc0.3 >= unfiltered SSIM)"};

    // Checkpoint round trip on the trained model.
    const auto dir = scratch_dir("acceptance_checkpoint");
    save_model(model, dir / "model.json");
    const auto loaded = load_model(dir / "model.json");
    const auto y = simulate_sample(preset_phantom("A", cfg.geometry.n), *A, cfg.total_counts, 1).sinogram;
    const bool identical = loaded.reconstruct(y).data == model.reconstruct(y).data;
    r.checkpoint = {identical, identical ? "bit-identical reconstruction after reload" : "reconstructions differ"};
    return r;
}

}  // namespace

int main() {
    report(1, "adjoint identity", adjoint());
    report(2, "objective gradient", objective_gradient());
    report(3, "stationarity", stationarity());
    report(4, "EM monotonicity", em_monotonicity());
    report(5, "OSEM 8x4 sanity", osem_protocol());
    report(6, "network gradients", nn_gradients());
    report(7, "Adam exactness", adam_exact());
    report(8, "metric identities", metric_identities());
    report(9, "phantom spot checks", phantom_spots());
    report(10, "Poisson sampler", poisson_moments());
    std::printf("      desk-scale training run\n");
    const auto desk = desk_scale();
    report(11, "desk-scale end to end", desk.end_to_end);
    report(12, "Butterworth ordering", desk.filter_order);
    report(13, "checkpoint round trip", desk.checkpoint);
    std::printf("%d of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
