#include "foredif/model.hpp"

#include <cmath>
#include <cstring>

#include "foredif/common.hpp"
#include "foredif/digest.hpp"
#include "foredif/rng.hpp"

namespace foredif {

void ArchConfig::validate() const {
    FD_CHECK_T(ConfigError, hidden >= 16 && hidden % 16 == 0,
               "hidden must be a positive multiple of 16 for the 3:3:2 positional split, got ",
               hidden);
    FD_CHECK_T(ConfigError, heads >= 1 && hidden % heads == 0, "hidden ", hidden,
               " not divisible by heads ", heads);
    FD_CHECK_T(ConfigError, vit_blocks >= 0, "vit_blocks must be >= 0");
    FD_CHECK_T(ConfigError, dit_blocks >= 1, "dit_blocks must be >= 1");
    FD_CHECK_T(ConfigError, patch >= 1 && grid >= patch && grid % patch == 0, "grid ", grid,
               " not divisible by patch ", patch);
    FD_CHECK_T(ConfigError, frames_obs >= 1 && frames_pred >= 1,
               "frames_obs and frames_pred must be >= 1");
    FD_CHECK_T(ConfigError, channels >= 1, "channels must be >= 1");
    FD_CHECK_T(ConfigError, mlp_ratio > 0.0f, "mlp_ratio must be positive");
}

std::array<int, 3> ArchConfig::posenc_split() const {
    int dt = hidden / 4;             // 2/8
    int dx = (hidden - dt) / 2;      // 3/8 each
    return {dx, dx, dt};
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Vanilla: return "vanilla";
        case Variant::ForeDiffZero: return "foredif_zero";
        case Variant::ForeDiffStage1: return "foredif_stage1";
        case Variant::ForeDiffStage2: return "foredif_stage2";
        case Variant::ForeDiffPredHeadAblation: return "foredif_predhead_ablation";
        case Variant::VanillaExtended: return "vanilla_extended";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "vanilla") return Variant::Vanilla;
    if (name == "foredif_zero") return Variant::ForeDiffZero;
    if (name == "foredif_stage1") return Variant::ForeDiffStage1;
    if (name == "foredif_stage2") return Variant::ForeDiffStage2;
    if (name == "foredif_predhead_ablation") return Variant::ForeDiffPredHeadAblation;
    if (name == "vanilla_extended") return Variant::VanillaExtended;
    raise<ConfigError>("unknown variant '", name,
                       "' (expected vanilla, foredif_zero, foredif_stage1, foredif_stage2, "
                       "foredif_predhead_ablation or vanilla_extended)");
}

// ---------------------------------------------------------------------------
// Condition construction

ConditionInput build_condition(const ArchConfig& arch, const float* frames,
                               int frame_count) {
    const int total = arch.frames_obs + arch.frames_pred;
    FD_CHECK(frame_count >= total, "trajectory has ", frame_count,
             " frames but the condition needs ", total);
    const int n = arch.grid;
    const int c = arch.channels;
    ConditionInput cond;
    cond.masked_frames = Tensor::zeros({total, n, n, c});
    cond.mask = Tensor::zeros({total, n, n, 1});
    float* mf = cond.masked_frames.data();
    float* mk = cond.mask.data();
    const int64_t per_frame = static_cast<int64_t>(n) * n;
    for (int t = 0; t < total; ++t) {
        bool observed = t < arch.frames_obs;
        for (int64_t i = 0; i < per_frame; ++i) {
            float v = frames[t * per_frame + i];
            for (int ch = 0; ch < c; ++ch) {
                mf[(t * per_frame + i) * c + ch] = observed ? v : 0.0f;
            }
            mk[t * per_frame + i] = observed ? 1.0f : 0.0f;
        }
    }
    cond.input = concat({cond.masked_frames, cond.mask}, -1);
    return cond;
}

Tensor target_frames(const ArchConfig& arch, const float* frames, int frame_count) {
    const int total = arch.frames_obs + arch.frames_pred;
    FD_CHECK(frame_count >= total, "trajectory has ", frame_count,
             " frames but the target needs ", total);
    const int n = arch.grid;
    const int c = arch.channels;
    Tensor out = Tensor::zeros({arch.frames_pred, n, n, c});
    float* dst = out.data();
    const int64_t per_frame = static_cast<int64_t>(n) * n;
    for (int t = 0; t < arch.frames_pred; ++t) {
        const float* src = frames + (arch.frames_obs + t) * per_frame;
        for (int64_t i = 0; i < per_frame; ++i) {
            for (int ch = 0; ch < c; ++ch) dst[(t * per_frame + i) * c + ch] = src[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Positional encoding

namespace {

void fill_axis_encoding(float* dst, int d, double position) {
    for (int i = 0; i < d / 2; ++i) {
        double freq = std::exp(-std::log(10000.0) * (2.0 * i / d));
        dst[2 * i] = static_cast<float>(std::sin(position * freq));
        dst[2 * i + 1] = static_cast<float>(std::cos(position * freq));
    }
}

}  // namespace

Tensor positional_encoding(int frames, int rows, int cols, int hidden, int frame_offset) {
    FD_CHECK(hidden % 16 == 0, "hidden must be a multiple of 16 for the 3:3:2 split, got ",
             hidden);
    int dt = hidden / 4;
    int dx = (hidden - dt) / 2;
    int dy = dx;
    Tensor out = Tensor::zeros({frames * rows * cols, hidden});
    float* p = out.data();
    for (int t = 0; t < frames; ++t) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                float* tok = p + (static_cast<int64_t>(t) * rows * cols + r * cols + c) * hidden;
                fill_axis_encoding(tok, dx, c);
                fill_axis_encoding(tok + dx, dy, r);
                fill_axis_encoding(tok + dx + dy, dt, t + frame_offset);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layers

Tensor AttentionLayer::forward(const Tensor& x) const {
    const int tokens = x.dim(0);
    const int h = x.dim(1);
    const int dh = h / heads;
    auto split_heads = [&](const Tensor& t) {
        return permute(reshape(t, {tokens, heads, dh}), {1, 0, 2});
    };
    Tensor qh = split_heads(q.forward(x));
    Tensor kh = split_heads(k.forward(x));
    Tensor vh = split_heads(v.forward(x));
    Tensor scores = scale(matmul(qh, transpose_last(kh)),
                          1.0f / std::sqrt(static_cast<float>(dh)));
    Tensor attn = softmax(scores, -1);
    Tensor ctx = matmul(attn, vh);  // [heads, tokens, dh]
    ctx = reshape(permute(ctx, {1, 0, 2}), {tokens, h});
    return o.forward(ctx);
}

Tensor VitBlock::forward(const Tensor& x) const {
    Tensor h = add(x, attn.forward(ln1.forward(x)));
    return add(h, mlp.forward(ln2.forward(h)));
}

namespace {

Tensor plain_layer_norm(const Tensor& x) {
    int h = x.dim(-1);
    return layer_norm(x, Tensor::ones({h}), Tensor::zeros({h}));
}

Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale_t) {
    return add(mul(x, add_scalar(scale_t, 1.0f)), shift);
}

}  // namespace

Tensor DitBlock::forward(const Tensor& x, const Tensor& t_emb) const {
    const int h = x.dim(1);
    Tensor m = modulation.forward(silu(t_emb));  // [1, 6H]
    Tensor shift1 = slice(m, 1, 0, h);
    Tensor scale1 = slice(m, 1, h, 2 * h);
    Tensor gate1 = slice(m, 1, 2 * h, 3 * h);
    Tensor shift2 = slice(m, 1, 3 * h, 4 * h);
    Tensor scale2 = slice(m, 1, 4 * h, 5 * h);
    Tensor gate2 = slice(m, 1, 5 * h, 6 * h);

    Tensor a = attn.forward(modulate(plain_layer_norm(x), shift1, scale1));
    Tensor out = add(x, mul(a, gate1));
    Tensor f = mlp.forward(modulate(plain_layer_norm(out), shift2, scale2));
    return add(out, mul(f, gate2));
}

Tensor FusionModule::forward(const Tensor& h0, const Tensor& g, const Tensor& t_emb) const {
    FD_CHECK_T(ShapeError, h0.dim(0) == g.dim(0), "fusion token count mismatch: ",
               h0.dim(0), " target tokens vs ", g.dim(0), " condition tokens");
    FD_CHECK_T(ShapeError, h0.dim(1) == g.dim(1), "fusion feature width mismatch: ",
               shape_str(h0.shape()), " vs ", shape_str(g.shape()));
    const int h2 = 2 * h0.dim(1);
    Tensor u = concat({h0, g}, -1);  // [T, 2H]
    Tensor m = modulation.forward(silu(t_emb));  // [1, 4H]
    Tensor shift = slice(m, 1, 0, h2);
    Tensor scale_t = slice(m, 1, h2, 2 * h2);
    u = modulate(plain_layer_norm(u), shift, scale_t);
    return fc2.forward(gelu(fc1.forward(u)));
}

Tensor PatchEmbed::forward(const Tensor& frames) const {
    FD_CHECK_T(ShapeError, frames.rank() == 4, "patch embed expects [T,n,n,C], got ",
               shape_str(frames.shape()));
    const int t = frames.dim(0);
    const int n = frames.dim(1);
    const int c = frames.dim(3);
    FD_CHECK_T(ShapeError, frames.dim(2) == n, "patch embed expects square frames, got ",
               shape_str(frames.shape()));
    FD_CHECK_T(ShapeError, c == in_channels, "patch embed channel mismatch: got ", c,
               ", expected ", in_channels);
    FD_CHECK_T(ShapeError, n % patch == 0, "grid ", n, " not divisible by patch ", patch);
    const int hp = n / patch;
    Tensor x = reshape(frames, {t, hp, patch, hp, patch, c});
    x = permute(x, {0, 1, 3, 2, 4, 5});  // [T, hp, hp, p, p, C]
    x = reshape(x, {t * hp * hp, patch * patch * c});
    return proj.forward(x);
}

Tensor unpatchify(const Tensor& tokens, int frames, int grid, int patch, int channels) {
    const int hp = grid / patch;
    FD_CHECK_T(ShapeError,
               tokens.rank() == 2 && tokens.dim(0) == frames * hp * hp &&
                   tokens.dim(1) == patch * patch * channels,
               "unpatchify got ", shape_str(tokens.shape()), " for frames=", frames,
               " grid=", grid, " patch=", patch, " channels=", channels);
    Tensor x = reshape(tokens, {frames, hp, hp, patch, patch, channels});
    x = permute(x, {0, 1, 3, 2, 4, 5});  // [T, hp, p, hp, p, C]
    return reshape(x, {frames, grid, grid, channels});
}

Tensor TimestepEmbed::forward(float t) const {
    const int half = freq_dim / 2;
    Tensor emb = Tensor::zeros({1, freq_dim});
    float* p = emb.data();
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        double arg = static_cast<double>(t) * 1000.0 * freq;
        p[i] = static_cast<float>(std::cos(arg));
        p[half + i] = static_cast<float>(std::sin(arg));
    }
    return fc2.forward(silu(fc1.forward(emb)));
}

Tensor OutHead::forward(const Tensor& tokens, const Tensor& t_emb) const {
    const int h = tokens.dim(1);
    Tensor m = modulation.forward(silu(t_emb));  // [1, 2H]
    Tensor shift = slice(m, 1, 0, h);
    Tensor scale_t = slice(m, 1, h, 2 * h);
    Tensor u = modulate(plain_layer_norm(tokens), shift, scale_t);
    return proj.forward(u);
}

// ---------------------------------------------------------------------------
// Construction

namespace {

class ParamRegistry {
public:
    explicit ParamRegistry(uint64_t seed) : rng_(seed) {}

    Tensor normal(const std::string& name, Shape shape, float stddev) {
        Tensor t = Tensor::randn(std::move(shape), rng_, stddev, true);
        params_.push_back({name, t, false});
        return t;
    }

    Tensor constant(const std::string& name, Shape shape, float value) {
        Tensor t = Tensor::full(std::move(shape), value, true);
        params_.push_back({name, t, false});
        return t;
    }

    std::vector<Parameter> take() { return std::move(params_); }

private:
    Rng rng_;
    std::vector<Parameter> params_;
};

constexpr float kInitStd = 0.02f;

Linear make_linear(ParamRegistry& reg, const std::string& prefix, int in, int out,
                   float w_std, bool with_bias = true) {
    Linear l;
    l.w = w_std > 0.0f ? reg.normal(prefix + ".w", {in, out}, w_std)
                       : reg.constant(prefix + ".w", {in, out}, 0.0f);
    if (with_bias) l.b = reg.constant(prefix + ".b", {out}, 0.0f);
    return l;
}

AttentionLayer make_attention(ParamRegistry& reg, const std::string& prefix, int hidden,
                              int heads) {
    AttentionLayer a;
    a.heads = heads;
    a.q = make_linear(reg, prefix + ".q", hidden, hidden, kInitStd);
    // a key bias shifts every score in a row equally and softmax removes
    // row-constant shifts, so the parameter could never learn
    a.k = make_linear(reg, prefix + ".k", hidden, hidden, kInitStd, false);
    a.v = make_linear(reg, prefix + ".v", hidden, hidden, kInitStd);
    a.o = make_linear(reg, prefix + ".o", hidden, hidden, kInitStd);
    return a;
}

MlpLayer make_mlp(ParamRegistry& reg, const std::string& prefix, int hidden, int mlp_dim,
                  Activation act) {
    MlpLayer m;
    m.fc1 = make_linear(reg, prefix + ".fc1", hidden, mlp_dim, kInitStd);
    m.fc2 = make_linear(reg, prefix + ".fc2", mlp_dim, hidden, kInitStd);
    m.act = act;
    return m;
}

LayerNormAffine make_layer_norm(ParamRegistry& reg, const std::string& prefix, int hidden) {
    LayerNormAffine ln;
    ln.gain = reg.constant(prefix + ".g", {hidden}, 1.0f);
    ln.bias = reg.constant(prefix + ".b", {hidden}, 0.0f);
    return ln;
}

PatchEmbed make_patch_embed(ParamRegistry& reg, const std::string& prefix,
                            const ArchConfig& arch, int in_channels) {
    PatchEmbed pe;
    pe.patch = arch.patch;
    pe.in_channels = in_channels;
    pe.proj = make_linear(reg, prefix, arch.patch * arch.patch * in_channels, arch.hidden,
                          kInitStd);
    return pe;
}

}  // namespace

ModelBundle build_model(const ArchConfig& arch, Variant variant, uint64_t seed) {
    arch.validate();
    if (variant == Variant::Vanilla || variant == Variant::VanillaExtended) {
        FD_CHECK_T(ConfigError, arch.vit_blocks == 0, variant_name(variant),
                   " requires vit_blocks == 0, got ", arch.vit_blocks);
    }
    ModelBundle m;
    m.arch = arch;
    m.variant = variant;
    ParamRegistry reg(derive_seed(seed, 0xa11c));

    m.cond_embed = make_patch_embed(reg, "pred.embed", arch, arch.channels + 1);
    for (int i = 0; i < arch.vit_blocks; ++i) {
        std::string p = "pred.block" + std::to_string(i);
        VitBlock b;
        b.ln1 = make_layer_norm(reg, p + ".ln1", arch.hidden);
        b.attn = make_attention(reg, p + ".attn", arch.hidden, arch.heads);
        b.ln2 = make_layer_norm(reg, p + ".ln2", arch.hidden);
        b.mlp = make_mlp(reg, p + ".mlp", arch.hidden, arch.mlp_dim(), Activation::Silu);
        m.vit_blocks.push_back(std::move(b));
    }

    const bool with_pred_head = variant == Variant::ForeDiffStage1 ||
                                variant == Variant::ForeDiffPredHeadAblation;
    if (with_pred_head) {
        PredHead head;
        head.proj = make_linear(reg, "pred.head", arch.hidden,
                                arch.patch * arch.patch * arch.channels, kInitStd);
        m.pred_head = head;
    }

    if (variant != Variant::ForeDiffStage1) {
        GenerativeStream g;
        g.embed = make_patch_embed(reg, "gen.embed", arch, arch.channels);
        g.time_embed.freq_dim = 256;
        g.time_embed.fc1 = make_linear(reg, "gen.temb.fc1", g.time_embed.freq_dim,
                                       arch.hidden, kInitStd);
        g.time_embed.fc2 = make_linear(reg, "gen.temb.fc2", arch.hidden, arch.hidden,
                                       kInitStd);
        g.fusion.modulation = make_linear(reg, "gen.fusion.mod", arch.hidden,
                                          4 * arch.hidden, 0.0f);
        g.fusion.fc1 = make_linear(reg, "gen.fusion.fc1", 2 * arch.hidden, 2 * arch.hidden,
                                   kInitStd);
        g.fusion.fc2 = make_linear(reg, "gen.fusion.fc2", 2 * arch.hidden, arch.hidden,
                                   kInitStd);
        for (int i = 0; i < arch.dit_blocks; ++i) {
            std::string p = "gen.block" + std::to_string(i);
            DitBlock b;
            b.attn = make_attention(reg, p + ".attn", arch.hidden, arch.heads);
            b.mlp = make_mlp(reg, p + ".mlp", arch.hidden, arch.mlp_dim(), Activation::Silu);
            b.modulation = make_linear(reg, p + ".mod", arch.hidden, 6 * arch.hidden, 0.0f);
            g.blocks.push_back(std::move(b));
        }
        g.out_head.modulation = make_linear(reg, "gen.out.mod", arch.hidden,
                                            2 * arch.hidden, 0.0f);
        g.out_head.proj = make_linear(reg, "gen.out.proj", arch.hidden,
                                      arch.patch * arch.patch * arch.channels, 0.0f);
        m.gen = std::move(g);
    }

    if (variant == Variant::ForeDiffPredHeadAblation) {
        m.ablation_embed = make_patch_embed(reg, "ablate.embed", arch, arch.channels);
    }

    const int hp = arch.patches_per_side();
    m.cond_posenc = positional_encoding(arch.frames_obs + arch.frames_pred, hp, hp,
                                        arch.hidden, 0);
    m.target_posenc = positional_encoding(arch.frames_pred, hp, hp, arch.hidden,
                                          arch.frames_obs);
    m.params = reg.take();
    return m;
}

// ---------------------------------------------------------------------------
// Forward paths

Tensor ModelBundle::predictive_tokens(const ConditionInput& cond) const {
    Tensor x = add(cond_embed.forward(cond.input), cond_posenc);
    for (const auto& block : vit_blocks) x = block.forward(x);
    return x;
}

Tensor ModelBundle::predict(const ConditionInput& cond) const {
    FD_CHECK(pred_head.has_value(), "model variant '", variant_name(variant),
             "' has no PredHead");
    Tensor g = predictive_tokens(cond);
    const int start = arch.frames_obs * arch.tokens_per_frame();
    Tensor future = slice(g, 0, start, arch.cond_tokens());
    Tensor tokens = pred_head->proj.forward(future);
    return unpatchify(tokens, arch.frames_pred, arch.grid, arch.patch, arch.channels);
}

Tensor ModelBundle::conditioning(const ConditionInput& cond, bool stop_gradient) const {
    if (variant == Variant::ForeDiffPredHeadAblation) {
        Tensor prediction = predict(cond);
        if (stop_gradient) prediction = prediction.detach();
        FD_CHECK(ablation_embed.has_value(), "ablation variant missing its re-embedding");
        return add(ablation_embed->forward(prediction), target_posenc);
    }
    Tensor g = predictive_tokens(cond);
    if (stop_gradient) g = g.detach();
    return g;
}

Tensor ModelBundle::velocity(const Tensor& x_t, const Tensor& cond_tokens, float t) const {
    FD_CHECK(gen.has_value(), "model variant '", variant_name(variant),
             "' has no generative stream");
    FD_CHECK(t >= 0.0f && t <= 1.0f, "diffusion time must lie in [0,1], got ", t);
    Tensor h0 = add(gen->embed.forward(x_t), target_posenc);

    // condition tokens either span all O+S frame slots (sliced down to the
    // aligned future positions) or already cover just the S target slots
    Tensor g = cond_tokens;
    if (g.dim(0) == arch.cond_tokens()) {
        const int start = arch.frames_obs * arch.tokens_per_frame();
        g = slice(g, 0, start, arch.cond_tokens());
    } else {
        FD_CHECK_T(ShapeError, g.dim(0) == arch.target_tokens(),
                   "conditioning token count ", g.dim(0), " matches neither ",
                   arch.cond_tokens(), " nor ", arch.target_tokens());
    }

    Tensor c = gen->time_embed.forward(t);
    Tensor h = gen->fusion.forward(h0, g, c);
    for (const auto& block : gen->blocks) h = block.forward(h, c);
    Tensor tokens = gen->out_head.forward(h, c);
    return unpatchify(tokens, arch.frames_pred, arch.grid, arch.patch, arch.channels);
}

// ---------------------------------------------------------------------------
// Parameter bookkeeping

Parameter* ModelBundle::find_param(const std::string& name) {
    for (auto& p : params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

const Parameter* ModelBundle::find_param(const std::string& name) const {
    for (const auto& p : params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

void ModelBundle::freeze_predictive() {
    for (auto& p : params) {
        if (p.name.rfind("pred.", 0) == 0) p.frozen = true;
    }
}

std::vector<std::string> ModelBundle::frozen_names() const {
    std::vector<std::string> out;
    for (const auto& p : params) {
        if (p.frozen) out.push_back(p.name);
    }
    return out;
}

std::string ModelBundle::predictive_digest() const {
    std::string bytes;
    for (const auto& p : params) {
        if (p.name.rfind("pred.", 0) != 0) continue;
        const char* d = reinterpret_cast<const char*>(p.tensor.data());
        bytes.append(d, static_cast<size_t>(p.tensor.numel()) * sizeof(float));
    }
    return sha256_hex(bytes.data(), bytes.size());
}

int64_t ModelBundle::parameter_count() const {
    int64_t total = 0;
    for (const auto& p : params) total += p.tensor.numel();
    return total;
}

}  // namespace foredif
