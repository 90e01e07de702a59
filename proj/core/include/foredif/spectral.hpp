#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace foredif::spectral {

/// Real n-by-n field on the periodic unit square, row-major.
/// Index [i][j] maps to the point (x1, x2) = (j/n, i/n).
struct Field {
    int n = 0;
    std::vector<double> v;

    Field() = default;
    explicit Field(int n_) : n(n_), v(static_cast<size_t>(n_) * n_, 0.0) {}
    double& at(int i, int j) { return v[static_cast<size_t>(i) * n + j]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * n + j]; }
};

/// Complex Fourier coefficients of a Field (full n-by-n grid, row-major).
struct Spectrum {
    int n = 0;
    std::vector<std::complex<double>> c;

    Spectrum() = default;
    explicit Spectrum(int n_) : n(n_), c(static_cast<size_t>(n_) * n_) {}
    std::complex<double>& at(int i, int j) { return c[static_cast<size_t>(i) * n + j]; }
    std::complex<double> at(int i, int j) const { return c[static_cast<size_t>(i) * n + j]; }
};

/// Integer wavenumber of grid index i on an n-point axis.
int wavenumber(int i, int n);

/// 2D DFT. Forward is unnormalized; the inverse carries the 1/n^2
/// factor, so ifft2(fft2(x)) == x. n must be a power of two >= 8.
Spectrum fft2(const Field& field);
Field ifft2(const Spectrum& spectrum);

enum class Forcing : uint8_t { F1 = 1, F2 = 2, F3 = 3, F4 = 4, F5 = 5 };

const char* forcing_name(Forcing f);
Forcing forcing_from_index(int index);  // 1-based

/// Static forcing field f(x), amplitude prefactor 0.1 for every variant.
Field make_forcing(Forcing variant, int n);

struct SimConfig {
    double viscosity = 1e-3;
    double dt = 1e-3;
    double frame_interval = 1.0;  // physical time between recorded frames
    int frames = 20;
    int n = 64;

    void validate() const;
    int steps_per_frame() const;
};

/// Velocity spectra from the vorticity spectrum through the stream
/// function. The returned velocity is exactly divergence-free.
void velocity_from_vorticity(const Spectrum& w, Spectrum& u1, Spectrum& u2);

/// One timestep of dw/dt = -u.grad(w) + nu*Lap(w) + f:
/// Crank-Nicolson diffusion, Heun advection+forcing, 2/3-rule dealiasing
/// of the quadratic term. Throws CflError if dt * max|u| * n >= 0.5.
Spectrum step(const Spectrum& w, const SimConfig& cfg, const Spectrum& f_hat);

/// Gaussian random field with spectral decay (|2 pi k|^2 + tau^2)^(-alpha/2),
/// tau = 7, alpha = 2.5; zero mean, unit RMS. Mode draws are keyed by the
/// integer wavenumber so realizations at different resolutions share their
/// low modes.
Field sample_initial_condition(uint64_t seed, int n);

struct Trajectory {
    SimConfig config;
    Forcing forcing = Forcing::F1;
    uint64_t seed = 0;
    std::vector<float> frames;  // [frames][n][n]

    const float* frame(int t) const {
        return frames.data() + static_cast<size_t>(t) * config.n * config.n;
    }
};

/// Simulates one trajectory; frame 0 is the sampled initial condition.
/// Bitwise reproducible for identical (config, forcing, seed).
Trajectory simulate(const SimConfig& cfg, Forcing forcing, uint64_t seed);

}  // namespace foredif::spectral
