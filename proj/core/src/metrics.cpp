#include "foredif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "foredif/common.hpp"
#include "foredif/rng.hpp"
#include "foredif/threads.hpp"

namespace foredif::metrics {

double psnr(const float* pred, const float* truth, int64_t count, double peak) {
    FD_CHECK(count > 0, "psnr needs a non-empty field");
    FD_CHECK(peak > 0.0, "psnr needs a positive peak, got ", peak);
    double mse = 0.0;
    for (int64_t i = 0; i < count; ++i) {
        double d = static_cast<double>(pred[i]) - truth[i];
        mse += d * d;
    }
    mse /= static_cast<double>(count);
    if (mse == 0.0) return 100.0;  // declared cap for identical inputs
    return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> g(kWindow);
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            double d = i - (kWindow - 1) / 2.0;
            g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += g[static_cast<size_t>(i)];
        }
        for (auto& v : g) v /= sum;
        std::vector<double> w2(static_cast<size_t>(kWindow) * kWindow);
        for (int i = 0; i < kWindow; ++i) {
            for (int j = 0; j < kWindow; ++j) {
                w2[static_cast<size_t>(i) * kWindow + j] =
                    g[static_cast<size_t>(i)] * g[static_cast<size_t>(j)];
            }
        }
        return w2;
    }();
    return w;
}

}  // namespace

double ssim(const float* pred, const float* truth, int rows, int cols, double peak) {
    FD_CHECK(rows >= kWindow && cols >= kWindow, "ssim needs fields of at least ",
             kWindow, "x", kWindow, ", got ", rows, "x", cols);
    FD_CHECK(peak > 0.0, "ssim needs a positive peak, got ", peak);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const auto& w = gaussian_window();

    double total = 0.0;
    int64_t windows = 0;
    for (int i = 0; i + kWindow <= rows; ++i) {
        for (int j = 0; j + kWindow <= cols; ++j) {
            double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
            for (int a = 0; a < kWindow; ++a) {
                for (int b = 0; b < kWindow; ++b) {
                    double wt = w[static_cast<size_t>(a) * kWindow + b];
                    double x = pred[static_cast<int64_t>(i + a) * cols + (j + b)];
                    double y = truth[static_cast<int64_t>(i + a) * cols + (j + b)];
                    mx += wt * x;
                    my += wt * y;
                    xx += wt * x * x;
                    yy += wt * y * y;
                    xy += wt * x * y;
                }
            }
            double vx = xx - mx * mx;
            double vy = yy - my * my;
            double cxy = xy - mx * my;
            double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

double l2_rms(const float* pred, const float* truth, int64_t count) {
    FD_CHECK(count > 0, "l2 needs a non-empty field");
    double acc = 0.0;
    for (int64_t i = 0; i < count; ++i) {
        double d = static_cast<double>(pred[i]) - truth[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(count));
}

double relative_l2(const float* pred, const float* truth, int64_t count) {
    FD_CHECK(count > 0, "relative_l2 needs a non-empty field");
    double err = 0.0, ref = 0.0;
    for (int64_t i = 0; i < count; ++i) {
        double d = static_cast<double>(pred[i]) - truth[i];
        err += d * d;
        ref += static_cast<double>(truth[i]) * truth[i];
    }
    FD_CHECK(ref > 0.0, "relative_l2 is undefined for an all-zero reference");
    return std::sqrt(err / ref);
}

ConsistencyStd consistency_std(const std::vector<std::vector<double>>& values) {
    FD_CHECK(!values.empty(), "consistency_std needs at least one condition");
    ConsistencyStd out;
    out.per_condition.reserve(values.size());
    double acc = 0.0;
    for (const auto& v : values) {
        FD_CHECK(v.size() >= 2, "consistency_std needs N >= 2 samples per condition, got ",
                 v.size());
        bool constant = std::all_of(v.begin(), v.end(),
                                    [&](double x) { return x == v.front(); });
        double sd = 0.0;
        if (!constant) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());  // population form
            sd = std::sqrt(var);
        }
        out.per_condition.push_back(sd);
        acc += sd;
    }
    out.dataset = acc / static_cast<double>(values.size());
    return out;
}

flow::VelocityFn bind_velocity(const ModelBundle& model, const Tensor& cond_tokens) {
    return [&model, cond_tokens](const Tensor& x, float t) {
        return model.velocity(x, cond_tokens, t);
    };
}

namespace {

SampleMetrics clip_metrics(const Tensor& pred, const Tensor& truth, const ArchConfig& arch,
                           double peak) {
    SampleMetrics m;
    int64_t count = pred.numel();
    m.l2 = l2_rms(pred.data(), truth.data(), count);
    m.rel_l2 = relative_l2(pred.data(), truth.data(), count);
    m.psnr = psnr(pred.data(), truth.data(), count, peak);
    const int64_t per_frame = static_cast<int64_t>(arch.grid) * arch.grid * arch.channels;
    double s = 0.0;
    for (int f = 0; f < arch.frames_pred; ++f) {
        s += ssim(pred.data() + f * per_frame, truth.data() + f * per_frame, arch.grid,
                  arch.grid, peak);
    }
    m.ssim = s / arch.frames_pred;
    return m;
}

}  // namespace

MetricReport evaluate_run(const ModelBundle& model, const Dataset& dataset,
                          const std::vector<int>& condition_idx, const EvalConfig& cfg) {
    FD_CHECK(cfg.samples >= 2, "evaluation needs N >= 2 samples per condition, got ",
             cfg.samples);
    FD_CHECK(cfg.euler_steps >= 1, "evaluation needs K >= 1 sampler steps");
    FD_CHECK(!condition_idx.empty(), "no evaluation conditions given");
    const ArchConfig& arch = model.arch;
    FD_CHECK(static_cast<int>(dataset.n) == arch.grid, "dataset resolution ", dataset.n,
             " does not match model grid ", arch.grid);

    MetricReport report;
    report.samples = cfg.samples;
    report.euler_steps = cfg.euler_steps;

    double peak = cfg.peak;
    if (peak <= 0.0) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int idx : condition_idx) {
            const auto& traj = dataset.trajectories[static_cast<size_t>(idx)];
            NoGradGuard ng;
            Tensor truth = target_frames(arch, traj.frames.data(),
                                         static_cast<int>(dataset.frames));
            for (int64_t i = 0; i < truth.numel(); ++i) {
                lo = std::min(lo, static_cast<double>(truth.data()[i]));
                hi = std::max(hi, static_cast<double>(truth.data()[i]));
            }
        }
        peak = hi - lo;
        FD_CHECK(peak > 0.0, "ground truth is constant; cannot derive a peak value");
    }
    report.peak = peak;

    const bool deterministic = !model.gen.has_value();
    report.conditions.resize(condition_idx.size());

    parallel_for(static_cast<int64_t>(condition_idx.size()), [&](int64_t ci) {
        NoGradGuard ng;
        int idx = condition_idx[static_cast<size_t>(ci)];
        const auto& traj = dataset.trajectories[static_cast<size_t>(idx)];
        ConditionInput cond =
            build_condition(arch, traj.frames.data(), static_cast<int>(dataset.frames));
        Tensor truth =
            target_frames(arch, traj.frames.data(), static_cast<int>(dataset.frames));

        ConditionReport& cr = report.conditions[static_cast<size_t>(ci)];
        cr.condition = idx;
        cr.samples.resize(static_cast<size_t>(cfg.samples));
        if (deterministic) {
            Tensor pred = model.predict(cond);
            SampleMetrics m = clip_metrics(pred, truth, arch, peak);
            for (auto& s : cr.samples) s = m;
            return;
        }
        Tensor g = model.conditioning(cond, true);
        flow::VelocityFn vel = bind_velocity(model, g);
        for (int j = 0; j < cfg.samples; ++j) {
            flow::SamplerConfig sampler;
            sampler.steps = cfg.euler_steps;
            sampler.seed = derive_seed(cfg.seed, static_cast<uint64_t>(idx),
                                       static_cast<uint64_t>(j));
            Tensor sample = flow::euler_sample(vel, truth.shape(), sampler);
            cr.samples[static_cast<size_t>(j)] = clip_metrics(sample, truth, arch, peak);
        }
    });

    // aggregates in fixed (condition, sample) order
    auto aggregate = [&](double SampleMetrics::* field, double& mean_out, double& std_out,
                         double& min_out, double& max_out) {
        std::vector<std::vector<double>> per_condition;
        per_condition.reserve(report.conditions.size());
        double total = 0.0;
        int64_t count = 0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& cr : report.conditions) {
            std::vector<double> vals;
            vals.reserve(cr.samples.size());
            for (const auto& s : cr.samples) {
                double v = s.*field;
                vals.push_back(v);
                total += v;
                ++count;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            per_condition.push_back(std::move(vals));
        }
        mean_out = total / static_cast<double>(count);
        std_out = consistency_std(per_condition).dataset;
        min_out = lo;
        max_out = hi;
    };
    aggregate(&SampleMetrics::l2, report.mean.l2, report.std.l2, report.min.l2,
              report.max.l2);
    aggregate(&SampleMetrics::rel_l2, report.mean.rel_l2, report.std.rel_l2,
              report.min.rel_l2, report.max.rel_l2);
    aggregate(&SampleMetrics::psnr, report.mean.psnr, report.std.psnr, report.min.psnr,
              report.max.psnr);
    aggregate(&SampleMetrics::ssim, report.mean.ssim, report.std.ssim, report.min.ssim,
              report.max.ssim);
    return report;
}

void write_report_csv(const MetricReport& report, const std::string& path,
                      const std::string& checkpoint_hash) {
    std::ofstream out(path);
    FD_CHECK_T(IoError, out.good(), "cannot open report file for writing: ", path);
    out << "# peak=" << report.peak << " N=" << report.samples
        << " K=" << report.euler_steps << " ckpt=" << checkpoint_hash << "\n";
    out << "condition_id,sample_id,l2,rel_l2,psnr,ssim\n";
    out.precision(10);
    for (const auto& cr : report.conditions) {
        for (size_t j = 0; j < cr.samples.size(); ++j) {
            const auto& s = cr.samples[j];
            out << cr.condition << "," << j << "," << s.l2 << "," << s.rel_l2 << ","
                << s.psnr << "," << s.ssim << "\n";
        }
    }
    auto agg = [&](const char* tag, const SampleMetrics& m) {
        out << "#AGG," << tag << "," << m.l2 << "," << m.rel_l2 << "," << m.psnr << ","
            << m.ssim << "\n";
    };
    agg("mean", report.mean);
    agg("std", report.std);
    agg("min", report.min);
    agg("max", report.max);
    FD_CHECK_T(IoError, out.good(), "write failure on report file: ", path);
}

LemmaReport lemma_check(const ModelBundle& diffusion, const ModelBundle& deterministic,
                        const Dataset& dataset, const std::vector<int>& condition_idx,
                        int trials, uint64_t seed) {
    FD_CHECK(trials >= 1, "lemma_check needs at least one trial");
    FD_CHECK(!condition_idx.empty(), "lemma_check needs at least one condition");
    FD_CHECK(deterministic.pred_head.has_value(),
             "the deterministic reference must carry a PredHead");
    FD_CHECK(diffusion.arch == deterministic.arch,
             "checkpoints were trained with different architectures");
    FD_CHECK(static_cast<int>(dataset.n) == diffusion.arch.grid, "dataset resolution ",
             dataset.n, " does not match model grid ", diffusion.arch.grid);

    const ArchConfig& arch = diffusion.arch;
    const bool eps_ignoring = !diffusion.gen.has_value();

    std::vector<double> diff_mse(condition_idx.size());
    std::vector<double> det_mse(condition_idx.size());
    parallel_for(static_cast<int64_t>(condition_idx.size()), [&](int64_t ci) {
        NoGradGuard ng;
        int idx = condition_idx[static_cast<size_t>(ci)];
        const auto& traj = dataset.trajectories[static_cast<size_t>(idx)];
        ConditionInput cond =
            build_condition(arch, traj.frames.data(), static_cast<int>(dataset.frames));
        Tensor truth =
            target_frames(arch, traj.frames.data(), static_cast<int>(dataset.frames));

        det_mse[static_cast<size_t>(ci)] =
            static_cast<double>(mse(deterministic.predict(cond), truth).item());

        if (eps_ignoring) {
            // single-step path collapses to the prediction itself
            diff_mse[static_cast<size_t>(ci)] =
                static_cast<double>(mse(diffusion.predict(cond), truth).item());
            return;
        }
        Tensor g = diffusion.conditioning(cond, true);
        flow::VelocityFn vel = bind_velocity(diffusion, g);
        double acc = 0.0;
        for (int trial = 0; trial < trials; ++trial) {
            Rng rng(derive_seed(seed, static_cast<uint64_t>(idx),
                                static_cast<uint64_t>(trial)));
            Tensor eps = Tensor::randn(truth.shape(), rng);
            Tensor xhat = flow::single_step_predict(vel, eps);
            acc += static_cast<double>(mse(xhat, truth).item());
        }
        diff_mse[static_cast<size_t>(ci)] = acc / trials;
    });

    LemmaReport report;
    report.trials = eps_ignoring ? 1 : trials;
    report.conditions = static_cast<int>(condition_idx.size());
    double a = 0.0, b = 0.0;
    for (size_t i = 0; i < condition_idx.size(); ++i) {
        a += diff_mse[i];
        b += det_mse[i];
    }
    report.single_step_mse = a / static_cast<double>(condition_idx.size());
    report.deterministic_mse = b / static_cast<double>(condition_idx.size());
    report.ratio = report.single_step_mse / report.deterministic_mse;
    return report;
}

}  // namespace foredif::metrics
