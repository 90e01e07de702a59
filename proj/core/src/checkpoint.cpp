#include "foredif/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "foredif/common.hpp"
#include "foredif/crc64.hpp"

namespace foredif {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

std::string encode_meta(const ModelBundle& model) {
    const ArchConfig& a = model.arch;
    std::ostringstream os;
    os << "variant=" << variant_name(model.variant) << "\n";
    os << "vit_blocks=" << a.vit_blocks << "\n";
    os << "dit_blocks=" << a.dit_blocks << "\n";
    os << "hidden=" << a.hidden << "\n";
    os << "heads=" << a.heads << "\n";
    os << "mlp_ratio=" << a.mlp_ratio << "\n";
    os << "patch=" << a.patch << "\n";
    os << "grid=" << a.grid << "\n";
    os << "frames_obs=" << a.frames_obs << "\n";
    os << "frames_pred=" << a.frames_pred << "\n";
    os << "channels=" << a.channels << "\n";
    os << "frozen=";
    auto frozen = model.frozen_names();
    for (size_t i = 0; i < frozen.size(); ++i) {
        if (i) os << ",";
        os << frozen[i];
    }
    os << "\n";
    return os.str();
}

CheckpointMeta decode_meta(const std::string& text, const std::string& path) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        FD_CHECK_T(CheckpointError, eq != std::string::npos, "malformed metadata line '",
                   line, "' in ", path);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        FD_CHECK_T(CheckpointError, it != kv.end(), "checkpoint metadata missing '", key,
                   "' in ", path);
        return it->second;
    };
    CheckpointMeta meta;
    meta.variant = variant_from_name(get("variant"));
    meta.arch.vit_blocks = std::stoi(get("vit_blocks"));
    meta.arch.dit_blocks = std::stoi(get("dit_blocks"));
    meta.arch.hidden = std::stoi(get("hidden"));
    meta.arch.heads = std::stoi(get("heads"));
    meta.arch.mlp_ratio = std::stof(get("mlp_ratio"));
    meta.arch.patch = std::stoi(get("patch"));
    meta.arch.grid = std::stoi(get("grid"));
    meta.arch.frames_obs = std::stoi(get("frames_obs"));
    meta.arch.frames_pred = std::stoi(get("frames_pred"));
    meta.arch.channels = std::stoi(get("channels"));
    const std::string& frozen = get("frozen");
    size_t pos = 0;
    while (pos < frozen.size()) {
        size_t comma = frozen.find(',', pos);
        if (comma == std::string::npos) comma = frozen.size();
        if (comma > pos) meta.frozen.push_back(frozen.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return meta;
}

void write_all(std::ofstream& out, Crc64& crc, const void* data, size_t len) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    crc.update(data, len);
}

template <typename T>
void write_pod(std::ofstream& out, Crc64& crc, T value) {
    write_all(out, crc, &value, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, Crc64& crc, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    FD_CHECK_T(CheckpointError, in.good(), "unexpected end of checkpoint: ", path);
    crc.update(&value, sizeof(T));
    return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelBundle& model) {
    std::ofstream out(path, std::ios::binary);
    FD_CHECK_T(IoError, out.good(), "cannot open checkpoint for writing: ", path);
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));

    Crc64 crc;
    std::string meta = encode_meta(model);
    write_pod<uint32_t>(out, crc, static_cast<uint32_t>(meta.size()));
    write_all(out, crc, meta.data(), meta.size());

    write_pod<uint32_t>(out, crc, static_cast<uint32_t>(model.params.size()));
    for (const auto& p : model.params) {
        FD_CHECK(p.name.size() <= 0xffff, "parameter name too long: ", p.name);
        write_pod<uint16_t>(out, crc, static_cast<uint16_t>(p.name.size()));
        write_all(out, crc, p.name.data(), p.name.size());
        const Shape& shape = p.tensor.shape();
        write_pod<uint8_t>(out, crc, static_cast<uint8_t>(shape.size()));
        for (int extent : shape) write_pod<uint32_t>(out, crc, static_cast<uint32_t>(extent));
        write_all(out, crc, p.tensor.data(),
                  static_cast<size_t>(p.tensor.numel()) * sizeof(float));
    }
    uint64_t digest = crc.value();
    out.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
    FD_CHECK_T(IoError, out.good(), "write failure on checkpoint: ", path);
}

namespace {

struct OpenCheckpoint {
    std::ifstream in;
    CheckpointMeta meta;
    Crc64 crc;
};

OpenCheckpoint open_checkpoint(const std::string& path) {
    OpenCheckpoint oc;
    oc.in.open(path, std::ios::binary);
    FD_CHECK_T(IoError, oc.in.good(), "cannot open checkpoint: ", path);
    char magic[4];
    oc.in.read(magic, 4);
    FD_CHECK_T(CheckpointError, oc.in.good() && std::memcmp(magic, kMagic, 4) == 0,
               "not an FDCK checkpoint: ", path);
    uint32_t version = 0;
    oc.in.read(reinterpret_cast<char*>(&version), sizeof(version));
    FD_CHECK_T(CheckpointError, oc.in.good() && version == kVersion,
               "unsupported checkpoint version in ", path);
    uint32_t meta_len = read_pod<uint32_t>(oc.in, oc.crc, path);
    std::string meta(meta_len, '\0');
    oc.in.read(meta.data(), meta_len);
    FD_CHECK_T(CheckpointError, oc.in.good(), "unexpected end of checkpoint: ", path);
    oc.crc.update(meta.data(), meta.size());
    oc.meta = decode_meta(meta, path);
    return oc;
}

}  // namespace

CheckpointMeta load_checkpoint_meta(const std::string& path) {
    return open_checkpoint(path).meta;
}

ModelBundle load_checkpoint(const std::string& path) {
    OpenCheckpoint oc = open_checkpoint(path);
    ModelBundle model = build_model(oc.meta.arch, oc.meta.variant, 0);

    uint32_t count = read_pod<uint32_t>(oc.in, oc.crc, path);
    FD_CHECK_T(CheckpointError, count == model.params.size(), "checkpoint holds ", count,
               " parameters but the '", variant_name(oc.meta.variant), "' model declares ",
               model.params.size());
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t name_len = read_pod<uint16_t>(oc.in, oc.crc, path);
        std::string name(name_len, '\0');
        oc.in.read(name.data(), name_len);
        FD_CHECK_T(CheckpointError, oc.in.good(), "unexpected end of checkpoint: ", path);
        oc.crc.update(name.data(), name.size());
        uint8_t rank = read_pod<uint8_t>(oc.in, oc.crc, path);
        Shape shape(rank);
        for (auto& extent : shape) {
            extent = static_cast<int>(read_pod<uint32_t>(oc.in, oc.crc, path));
        }
        Parameter* p = model.find_param(name);
        FD_CHECK_T(CheckpointError, p != nullptr, "checkpoint parameter '", name,
                   "' does not exist in the model");
        FD_CHECK_T(CheckpointError, p->tensor.shape() == shape, "parameter '", name,
                   "' has shape ", shape_str(shape), " in the checkpoint but ",
                   shape_str(p->tensor.shape()), " in the model");
        oc.in.read(reinterpret_cast<char*>(p->tensor.data()),
                   static_cast<std::streamsize>(p->tensor.numel() * sizeof(float)));
        FD_CHECK_T(CheckpointError, oc.in.good(), "unexpected end of checkpoint: ", path);
        oc.crc.update(p->tensor.data(), static_cast<size_t>(p->tensor.numel()) * sizeof(float));
    }
    uint64_t stored = 0;
    oc.in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    FD_CHECK_T(CheckpointError, oc.in.good() && stored == oc.crc.value(),
               "checkpoint CRC mismatch in ", path, " (file corrupt or truncated)");

    for (const auto& name : oc.meta.frozen) {
        Parameter* p = model.find_param(name);
        FD_CHECK_T(CheckpointError, p != nullptr, "frozen parameter '", name,
                   "' does not exist in the model");
        p->frozen = true;
    }
    return model;
}

}  // namespace foredif
