#include "foredif/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "foredif/common.hpp"
#include "foredif/crc64.hpp"
#include "foredif/rng.hpp"
#include "foredif/threads.hpp"

namespace foredif {

namespace {

constexpr char kMagic[4] = {'H', 'N', 'S', '1'};
constexpr uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, Crc64* crc, const void* data, size_t len) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (crc) crc->update(data, len);
}

template <typename T>
void write_pod(std::ofstream& out, Crc64* crc, T value) {
    write_bytes(out, crc, &value, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, Crc64* crc, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    FD_CHECK_T(IoError, in.good(), "unexpected end of dataset file: ", path);
    if (crc) crc->update(&value, sizeof(T));
    return value;
}

void write_sidecar(const GenerateConfig& cfg, const std::string& path, size_t count,
                   uint64_t crc) {
    std::ofstream meta(path + ".meta");
    FD_CHECK_T(IoError, meta.good(), "cannot write sidecar file: ", path, ".meta");
    meta << "format=HNS1 v" << kVersion << "\n";
    meta << "trajectories=" << count << "\n";
    meta << "frames=" << cfg.sim.frames << "\n";
    meta << "n=" << cfg.sim.n << "\n";
    meta << "dt=" << cfg.sim.dt << "\n";
    meta << "frame_interval=" << cfg.sim.frame_interval << "\n";
    meta << "per_config=" << cfg.per_config << "\n";
    meta << "seed=" << cfg.seed << "\n";
    meta << "viscosities=";
    for (size_t i = 0; i < cfg.viscosities.size(); ++i) {
        if (i) meta << ",";
        meta << cfg.viscosities[i];
    }
    meta << "\n";
    meta << "forcings=";
    for (size_t i = 0; i < cfg.variants.size(); ++i) {
        if (i) meta << ",";
        meta << spectral::forcing_name(cfg.variants[i]);
    }
    meta << "\n";
    meta << "initial_condition=grf spectral decay (|2*pi*k|^2 + tau^2)^(-alpha/2), "
            "tau=7, alpha=2.5, zero mean, unit rms\n";
    meta << "integrator=crank-nicolson diffusion + heun advection, 2/3 dealiasing\n";
    meta << "crc64=" << std::hex << crc << std::dec << "\n";
}

}  // namespace

uint64_t generate_dataset(const GenerateConfig& cfg, const std::string& path) {
    FD_CHECK_T(ConfigError, cfg.per_config >= 0, "per_config must be >= 0");
    FD_CHECK_T(ConfigError, !cfg.viscosities.empty() && !cfg.variants.empty(),
               "viscosity and forcing lists must be non-empty");
    cfg.sim.validate();

    const size_t configs = cfg.viscosities.size() * cfg.variants.size();
    const size_t total = configs * static_cast<size_t>(cfg.per_config);
    std::vector<std::optional<spectral::Trajectory>> results(total);

    parallel_for(static_cast<int64_t>(total), [&](int64_t idx) {
        size_t config_idx = static_cast<size_t>(idx) / cfg.per_config;
        size_t traj_idx = static_cast<size_t>(idx) % cfg.per_config;
        size_t vi = config_idx / cfg.variants.size();
        size_t fi = config_idx % cfg.variants.size();
        spectral::SimConfig sim = cfg.sim;
        sim.viscosity = cfg.viscosities[vi];
        uint64_t seed = derive_seed(cfg.seed, config_idx, traj_idx);
        try {
            results[static_cast<size_t>(idx)] =
                spectral::simulate(sim, cfg.variants[fi], seed);
        } catch (const CflError& e) {
            std::cerr << "dropping trajectory seed=" << seed << ": " << e.what() << "\n";
        }
    });

    std::ofstream out(path, std::ios::binary);
    FD_CHECK_T(IoError, out.good(), "cannot open dataset file for writing: ", path);

    uint32_t count = 0;
    for (const auto& r : results) {
        if (r) ++count;
    }
    write_bytes(out, nullptr, kMagic, 4);
    write_pod<uint32_t>(out, nullptr, kVersion);
    write_pod<uint32_t>(out, nullptr, count);
    write_pod<uint32_t>(out, nullptr, static_cast<uint32_t>(cfg.sim.frames));
    write_pod<uint32_t>(out, nullptr, static_cast<uint32_t>(cfg.sim.n));

    Crc64 crc;
    for (const auto& r : results) {
        if (!r) continue;
        write_pod<double>(out, &crc, r->config.viscosity);
        write_pod<uint8_t>(out, &crc, static_cast<uint8_t>(r->forcing));
        write_pod<uint64_t>(out, &crc, r->seed);
        write_bytes(out, &crc, r->frames.data(), r->frames.size() * sizeof(float));
    }
    uint64_t digest = crc.value();
    write_pod<uint64_t>(out, nullptr, digest);
    FD_CHECK_T(IoError, out.good(), "write failure on dataset file: ", path);
    out.close();

    write_sidecar(cfg, path, count, digest);
    return digest;
}

namespace {

Dataset load_impl(const std::string& path, bool header_only) {
    std::ifstream in(path, std::ios::binary);
    FD_CHECK_T(IoError, in.good(), "cannot open dataset file: ", path);

    char magic[4];
    in.read(magic, 4);
    FD_CHECK_T(IoError, in.good() && std::memcmp(magic, kMagic, 4) == 0,
               "not an HNS1 dataset file: ", path);
    uint32_t version = read_pod<uint32_t>(in, nullptr, path);
    FD_CHECK_T(IoError, version == kVersion, "unsupported dataset version ", version);

    Dataset ds;
    uint32_t count = read_pod<uint32_t>(in, nullptr, path);
    ds.frames = read_pod<uint32_t>(in, nullptr, path);
    ds.n = read_pod<uint32_t>(in, nullptr, path);
    if (header_only) {
        ds.trajectories.resize(count);
        return ds;
    }

    Crc64 crc;
    ds.trajectories.reserve(count);
    const size_t values = static_cast<size_t>(ds.frames) * ds.n * ds.n;
    for (uint32_t t = 0; t < count; ++t) {
        TrajectoryRecord rec;
        rec.viscosity = read_pod<double>(in, &crc, path);
        rec.forcing_variant = read_pod<uint8_t>(in, &crc, path);
        rec.seed = read_pod<uint64_t>(in, &crc, path);
        rec.frames.resize(values);
        in.read(reinterpret_cast<char*>(rec.frames.data()),
                static_cast<std::streamsize>(values * sizeof(float)));
        FD_CHECK_T(IoError, in.good(), "unexpected end of dataset file: ", path);
        crc.update(rec.frames.data(), values * sizeof(float));
        ds.trajectories.push_back(std::move(rec));
    }
    uint64_t stored = read_pod<uint64_t>(in, nullptr, path);
    FD_CHECK_T(IoError, stored == crc.value(), "dataset CRC mismatch in ", path,
               " (file corrupt or truncated)");
    return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path) { return load_impl(path, false); }

Dataset load_dataset_header(const std::string& path) { return load_impl(path, true); }

}  // namespace foredif
