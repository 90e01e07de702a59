#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foredif/spectral.hpp"

namespace foredif {

/// One stored trajectory: generating parameters plus the recorded frames.
struct TrajectoryRecord {
    double viscosity = 0.0;
    uint8_t forcing_variant = 1;  // 1..5
    uint64_t seed = 0;
    std::vector<float> frames;  // [frames][n][n] row-major

    const float* frame(int t, int n) const {
        return frames.data() + static_cast<size_t>(t) * n * n;
    }
};

/// In-memory dataset mirroring the HNS1 file layout:
///   magic "HNS1" | u32 version=1 | u32 trajectory_count | u32 frames | u32 n
///   per trajectory: f64 viscosity | u8 forcing_variant | u64 seed | f32 frames
///   u64 CRC64 of all trajectory record bytes
/// All fields little-endian.
struct Dataset {
    uint32_t frames = 0;
    uint32_t n = 0;
    std::vector<TrajectoryRecord> trajectories;

    int64_t frame_values() const { return static_cast<int64_t>(frames) * n * n; }
};

struct GenerateConfig {
    std::vector<double> viscosities{1e-5, 1e-4, 1e-3};
    std::vector<spectral::Forcing> variants{spectral::Forcing::F1, spectral::Forcing::F2,
                                            spectral::Forcing::F3, spectral::Forcing::F4,
                                            spectral::Forcing::F5};
    int per_config = 100;
    spectral::SimConfig sim;  // sim.viscosity is overridden per config
    uint64_t seed = 0;
};

/// Generates per_config trajectories for every (viscosity, forcing) pair
/// and writes them plus a sidecar "<path>.meta" with the generator
/// settings. Trajectories are simulated in parallel but always written
/// in (config, index) order. A trajectory whose CFL check fails is
/// dropped with a note on stderr. Returns the payload CRC64.
uint64_t generate_dataset(const GenerateConfig& cfg, const std::string& path);

Dataset load_dataset(const std::string& path);

/// Header-only variant (count, frames, n) without reading frame data.
Dataset load_dataset_header(const std::string& path);

}  // namespace foredif
