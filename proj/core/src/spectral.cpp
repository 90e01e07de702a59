#include "foredif/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "foredif/common.hpp"
#include "foredif/rng.hpp"

namespace foredif::spectral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_grid(int n) {
    FD_CHECK(n >= 8 && is_pow2(n), "grid size must be a power of two >= 8, got ", n);
}

/// In-place radix-2 Cooley-Tukey on a strided lane of length n.
void fft_lane(std::complex<double>* data, int n, int stride, bool inverse) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[static_cast<int64_t>(i) * stride],
                             data[static_cast<int64_t>(j) * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = (inverse ? kTwoPi : -kTwoPi) / len;
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                auto* lo = data + static_cast<int64_t>(i + j) * stride;
                auto* hi = data + static_cast<int64_t>(i + j + len / 2) * stride;
                std::complex<double> u = *lo;
                std::complex<double> v = *hi * w;
                *lo = u + v;
                *hi = u - v;
                w *= wl;
            }
        }
    }
}

void fft2_inplace(Spectrum& s, bool inverse) {
    const int n = s.n;
    for (int row = 0; row < n; ++row) fft_lane(s.c.data() + static_cast<int64_t>(row) * n, n, 1, inverse);
    for (int col = 0; col < n; ++col) fft_lane(s.c.data() + col, n, n, inverse);
    if (inverse) {
        double scale = 1.0 / (static_cast<double>(n) * n);
        for (auto& v : s.c) v *= scale;
    }
}

/// 2/3-rule mask: keep |k| <= n/3 on each axis.
bool keep_mode(int kx, int ky, int n) {
    int cut = n / 3;
    return std::abs(kx) <= cut && std::abs(ky) <= cut;
}

/// Derivative wavenumbers; the Nyquist mode is treated as zero.
double deriv_wavenumber(int i, int n) {
    int k = wavenumber(i, n);
    return (i == n / 2) ? 0.0 : static_cast<double>(k);
}

struct NonlinearTerm {
    Spectrum value;   // -u.grad(w) + f, dealiased advection
    double max_speed = 0.0;
};

NonlinearTerm nonlinear(const Spectrum& w, const Spectrum& f_hat) {
    const int n = w.n;
    Spectrum u1(n), u2(n), wx(n), wy(n);
    velocity_from_vorticity(w, u1, u2);
    for (int i = 0; i < n; ++i) {
        double ky = deriv_wavenumber(i, n);
        for (int j = 0; j < n; ++j) {
            double kx = deriv_wavenumber(j, n);
            std::complex<double> iw = std::complex<double>(0.0, 1.0) * w.at(i, j);
            wx.at(i, j) = iw * (kTwoPi * kx);
            wy.at(i, j) = iw * (kTwoPi * ky);
            if (!keep_mode(wavenumber(j, n), wavenumber(i, n), n)) {
                u1.at(i, j) = 0.0;
                u2.at(i, j) = 0.0;
                wx.at(i, j) = 0.0;
                wy.at(i, j) = 0.0;
            }
        }
    }
    Field u1r = ifft2(u1), u2r = ifft2(u2), wxr = ifft2(wx), wyr = ifft2(wy);

    NonlinearTerm out;
    Field adv(n);
    for (size_t i = 0; i < adv.v.size(); ++i) {
        adv.v[i] = u1r.v[i] * wxr.v[i] + u2r.v[i] * wyr.v[i];
        out.max_speed = std::max(out.max_speed, std::max(std::abs(u1r.v[i]), std::abs(u2r.v[i])));
    }
    out.value = fft2(adv);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!keep_mode(wavenumber(j, n), wavenumber(i, n), n)) {
                out.value.at(i, j) = 0.0;
            } else {
                out.value.at(i, j) = -out.value.at(i, j) + f_hat.at(i, j);
            }
        }
    }
    // advection transports without creating mean vorticity
    out.value.at(0, 0) = f_hat.at(0, 0);
    return out;
}

}  // namespace

int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

Spectrum fft2(const Field& field) {
    check_grid(field.n);
    Spectrum s(field.n);
    for (size_t i = 0; i < field.v.size(); ++i) s.c[i] = field.v[i];
    fft2_inplace(s, false);
    return s;
}

Field ifft2(const Spectrum& spectrum) {
    check_grid(spectrum.n);
    Spectrum tmp = spectrum;
    fft2_inplace(tmp, true);
    Field f(spectrum.n);
    for (size_t i = 0; i < f.v.size(); ++i) f.v[i] = tmp.c[i].real();
    return f;
}

const char* forcing_name(Forcing f) {
    switch (f) {
        case Forcing::F1: return "F1";
        case Forcing::F2: return "F2";
        case Forcing::F3: return "F3";
        case Forcing::F4: return "F4";
        case Forcing::F5: return "F5";
    }
    return "?";
}

Forcing forcing_from_index(int index) {
    FD_CHECK_T(ConfigError, index >= 1 && index <= 5, "forcing variant must be 1..5, got ",
               index);
    return static_cast<Forcing>(index);
}

Field make_forcing(Forcing variant, int n) {
    check_grid(n);
    Field f(n);
    double w1 = 2.0, w2 = 2.0;
    switch (variant) {
        case Forcing::F1: w1 = 2.0; w2 = 2.0; break;
        case Forcing::F2: w1 = 2.0; w2 = 4.0; break;
        case Forcing::F3: w1 = 4.0; w2 = 4.0; break;
        default: break;
    }
    for (int i = 0; i < n; ++i) {
        double x2 = static_cast<double>(i) / n;
        for (int j = 0; j < n; ++j) {
            double x1 = static_cast<double>(j) / n;
            double val = 0.0;
            switch (variant) {
                case Forcing::F1:
                case Forcing::F2:
                case Forcing::F3:
                    val = std::sin(w1 * std::numbers::pi * (x1 + x2)) +
                          std::cos(w2 * std::numbers::pi * (x1 + x2));
                    break;
                case Forcing::F4:
                    val = std::sin(kTwoPi * (x1 - x2)) + std::cos(kTwoPi * (x1 - x2));
                    break;
                case Forcing::F5:
                    val = std::sin(kTwoPi * (x1 * x1 + x2 * x2)) -
                          std::cos(kTwoPi * (x1 * x1 + x2 * x2));
                    break;
            }
            f.at(i, j) = 0.1 * val;
        }
    }
    return f;
}

void SimConfig::validate() const {
    check_grid(n);
    FD_CHECK_T(ConfigError, viscosity >= 0.0, "viscosity must be >= 0, got ", viscosity);
    FD_CHECK_T(ConfigError, dt > 0.0, "dt must be positive, got ", dt);
    FD_CHECK_T(ConfigError, frames >= 1, "frame count must be >= 1, got ", frames);
    double ratio = frame_interval / dt;
    double rounded = std::round(ratio);
    FD_CHECK_T(ConfigError, rounded >= 1.0 && std::abs(ratio - rounded) < 1e-9 * rounded,
               "frame_interval ", frame_interval, " is not an integer multiple of dt ", dt);
}

int SimConfig::steps_per_frame() const {
    return static_cast<int>(std::llround(frame_interval / dt));
}

void velocity_from_vorticity(const Spectrum& w, Spectrum& u1, Spectrum& u2) {
    const int n = w.n;
    u1 = Spectrum(n);
    u2 = Spectrum(n);
    // raw integer wavenumbers keep ik.u identically zero mode by mode
    for (int i = 0; i < n; ++i) {
        int ky = wavenumber(i, n);
        for (int j = 0; j < n; ++j) {
            int kx = wavenumber(j, n);
            int k2 = kx * kx + ky * ky;
            if (k2 == 0) continue;  // stream function zero mode pinned to 0
            std::complex<double> psi = w.at(i, j) / (kTwoPi * kTwoPi * k2);
            std::complex<double> ipsi = std::complex<double>(0.0, 1.0) * psi;
            u1.at(i, j) = ipsi * (kTwoPi * ky);    // d(psi)/dx2
            u2.at(i, j) = -ipsi * (kTwoPi * kx);   // -d(psi)/dx1
        }
    }
}

Spectrum step(const Spectrum& w, const SimConfig& cfg, const Spectrum& f_hat) {
    const int n = w.n;
    FD_CHECK(f_hat.n == n, "forcing grid ", f_hat.n, " does not match state grid ", n);
    const double dt = cfg.dt;
    const double nu = cfg.viscosity;

    NonlinearTerm n1 = nonlinear(w, f_hat);
    FD_CHECK_T(CflError, dt * n1.max_speed * n < 0.5,
               "advective CFL violated: max|u|=", n1.max_speed, " dt=", dt, " n=", n,
               " (dt*max|u|*n must stay below 0.5)");

    auto cn_combine = [&](const Spectrum& base, const Spectrum& expl, double weight) {
        Spectrum out(n);
        for (int i = 0; i < n; ++i) {
            int ky = wavenumber(i, n);
            for (int j = 0; j < n; ++j) {
                int kx = wavenumber(j, n);
                double lam = kTwoPi * kTwoPi * (kx * kx + ky * ky);
                double numer = 1.0 - 0.5 * dt * nu * lam;
                double denom = 1.0 + 0.5 * dt * nu * lam;
                out.at(i, j) = (numer * base.at(i, j) + weight * expl.at(i, j)) / denom;
            }
        }
        return out;
    };

    // predictor, then trapezoidal correction of the explicit terms
    Spectrum predictor = cn_combine(w, n1.value, dt);
    NonlinearTerm n2 = nonlinear(predictor, f_hat);
    Spectrum avg(n);
    for (size_t i = 0; i < avg.c.size(); ++i) avg.c[i] = 0.5 * (n1.value.c[i] + n2.value.c[i]);
    return cn_combine(w, avg, dt);
}

Field sample_initial_condition(uint64_t seed, int n) {
    check_grid(n);
    constexpr double kTau = 7.0;
    constexpr double kAlpha = 2.5;
    Spectrum s(n);
    auto amplitude = [&](int kx, int ky) {
        double k2 = kTwoPi * kTwoPi * (static_cast<double>(kx) * kx + static_cast<double>(ky) * ky);
        return std::pow(k2 + kTau * kTau, -kAlpha / 2.0);
    };
    auto mode_rng = [&](int kx, int ky) {
        return Rng(derive_seed(seed, static_cast<uint64_t>(kx + (1 << 20)),
                               static_cast<uint64_t>(ky + (1 << 20))));
    };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == 0 && j == 0) continue;
            int i2 = (n - i) % n;
            int j2 = (n - j) % n;
            double amp = amplitude(wavenumber(j, n), wavenumber(i, n));
            if (i2 == i && j2 == j) {
                // self-conjugate (Nyquist) mode: real coefficient
                Rng rng = mode_rng(wavenumber(j, n), wavenumber(i, n));
                s.at(i, j) = amp * rng.normal();
                continue;
            }
            // one draw per conjugate pair, keyed by the canonical member's
            // integer wavenumbers so different resolutions share low modes
            bool canonical = std::tie(i, j) < std::tie(i2, j2);
            int ci = canonical ? i : i2;
            int cj = canonical ? j : j2;
            Rng rng = mode_rng(wavenumber(cj, n), wavenumber(ci, n));
            double a = rng.normal();
            double b = rng.normal();
            std::complex<double> c(a / std::numbers::sqrt2, b / std::numbers::sqrt2);
            s.at(i, j) = amp * (canonical ? c : std::conj(c));
        }
    }
    Field w = ifft2(s);
    double ms = 0.0;
    for (double v : w.v) ms += v * v;
    double rms = std::sqrt(ms / static_cast<double>(w.v.size()));
    if (rms > 0.0) {
        for (double& v : w.v) v /= rms;
    }
    return w;
}

Trajectory simulate(const SimConfig& cfg, Forcing forcing, uint64_t seed) {
    cfg.validate();
    const int n = cfg.n;
    Trajectory traj;
    traj.config = cfg;
    traj.forcing = forcing;
    traj.seed = seed;
    traj.frames.resize(static_cast<size_t>(cfg.frames) * n * n);

    Field w0 = sample_initial_condition(seed, n);
    auto record = [&](int frame, const Field& f) {
        float* dst = traj.frames.data() + static_cast<size_t>(frame) * n * n;
        for (size_t i = 0; i < f.v.size(); ++i) dst[i] = static_cast<float>(f.v[i]);
    };
    record(0, w0);

    Spectrum f_hat = fft2(make_forcing(forcing, n));
    Spectrum w_hat = fft2(w0);
    const int per_frame = cfg.steps_per_frame();
    for (int frame = 1; frame < cfg.frames; ++frame) {
        for (int s = 0; s < per_frame; ++s) w_hat = step(w_hat, cfg, f_hat);
        record(frame, ifft2(w_hat));
    }
    return traj;
}

}  // namespace foredif::spectral
