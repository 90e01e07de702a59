#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "foredif/optimizer.hpp"
#include "foredif/tensor.hpp"

namespace foredif {

class Rng;

struct ArchConfig {
    int vit_blocks = 6;    // M; 0 selects the vanilla conditioning path
    int dit_blocks = 12;   // N
    int hidden = 384;
    int heads = 6;
    float mlp_ratio = 4.0f;
    int patch = 2;
    int grid = 64;         // field resolution n
    int frames_obs = 10;   // O
    int frames_pred = 10;  // S
    int channels = 1;

    void validate() const;
    int patches_per_side() const { return grid / patch; }
    int tokens_per_frame() const { return patches_per_side() * patches_per_side(); }
    int cond_tokens() const { return (frames_obs + frames_pred) * tokens_per_frame(); }
    int target_tokens() const { return frames_pred * tokens_per_frame(); }
    int mlp_dim() const { return static_cast<int>(hidden * mlp_ratio); }

    /// Positional-encoding split (x, y, t) in a 3:3:2 ratio.
    std::array<int, 3> posenc_split() const;

    bool operator==(const ArchConfig&) const = default;
};

enum class Variant {
    Vanilla,
    ForeDiffZero,
    ForeDiffStage1,
    ForeDiffStage2,
    ForeDiffPredHeadAblation,
    VanillaExtended,
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Masked condition: full frame sequence with the future zeroed, plus the
/// binary mask as an extra channel.
struct ConditionInput {
    Tensor masked_frames;  // [O+S, n, n, C], frames O..O+S-1 zeroed
    Tensor mask;           // [O+S, n, n, 1]
    Tensor input;          // channel concat of the two, [O+S, n, n, C+1]
};

/// Builds the condition from a trajectory of at least O+S frames
/// (row-major [frame][row][col], single channel).
ConditionInput build_condition(const ArchConfig& arch, const float* frames,
                               int frame_count);

/// Frames O..O+S-1 as the prediction target, shape [S, n, n, C].
Tensor target_frames(const ArchConfig& arch, const float* frames, int frame_count);

/// Sinusoidal encodings for a (frame, row, col) token grid; feature dims
/// split 3:3:2 across (x, y, t). frame_offset shifts the temporal
/// positions (the target stream uses O..O+S-1).
Tensor positional_encoding(int frames, int rows, int cols, int hidden, int frame_offset);

// --- layers -----------------------------------------------------------------

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [out], optional
    Tensor forward(const Tensor& x) const {
        Tensor y = matmul(x, w);
        return b.defined() ? add(y, b) : y;
    }
};

struct LayerNormAffine {
    Tensor gain, bias;
    Tensor forward(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

struct AttentionLayer {
    int heads = 1;
    Linear q, k, v, o;
    Tensor forward(const Tensor& x) const;  // x [T, H]
};

struct MlpLayer {
    Linear fc1, fc2;
    Activation act = Activation::Silu;
    Tensor forward(const Tensor& x) const { return fc2.forward(activation(fc1.forward(x), act)); }
};

struct VitBlock {
    LayerNormAffine ln1, ln2;
    AttentionLayer attn;
    MlpLayer mlp;
    Tensor forward(const Tensor& x) const;
};

/// DiT block with AdaLN conditioning: the timestep embedding produces
/// per-branch (shift, scale, gate); gates start at zero so a fresh block
/// is the identity map.
struct DitBlock {
    AttentionLayer attn;
    MlpLayer mlp;
    Linear modulation;  // [H -> 6H], zero-init
    Tensor forward(const Tensor& x, const Tensor& t_emb) const;
};

/// Feature-concat fusion of noisy-target tokens with condition tokens:
/// AdaLN over the 2H-wide concat, then a two-layer GELU MLP down to H.
struct FusionModule {
    Linear modulation;  // [H -> 4H], zero-init
    Linear fc1;         // [2H -> 2H]
    Linear fc2;         // [2H -> H]
    Tensor forward(const Tensor& h0, const Tensor& g, const Tensor& t_emb) const;
};

struct PatchEmbed {
    int patch = 2;
    int in_channels = 1;
    Linear proj;  // [p*p*C -> H]
    Tensor forward(const Tensor& frames) const;  // [T,n,n,C] -> [T*hw, H]
};

/// Inverse of the patch layout: tokens [T*hw, p*p*C] -> frames [T,n,n,C].
Tensor unpatchify(const Tensor& tokens, int frames, int grid, int patch, int channels);

struct TimestepEmbed {
    int freq_dim = 256;
    Linear fc1, fc2;
    Tensor forward(float t) const;  // [1, H]
};

struct OutHead {
    Linear modulation;  // [H -> 2H], zero-init
    Linear proj;        // [H -> p*p*C], zero-init
    Tensor forward(const Tensor& tokens, const Tensor& t_emb) const;
};

struct PredHead {
    Linear proj;  // [H -> p*p*C]
};

// --- bundle -----------------------------------------------------------------

struct GenerativeStream {
    PatchEmbed embed;  // target frames, C channels
    TimestepEmbed time_embed;
    FusionModule fusion;
    std::vector<DitBlock> blocks;
    OutHead out_head;
};

/// The full two-stream model. Which components exist depends on the
/// variant: the deterministic stage has no generative stream, joint and
/// stage-2 variants have no PredHead (except the PredHead-conditioning
/// ablation, which keeps a frozen head plus its own re-embedding).
struct ModelBundle {
    ArchConfig arch;
    Variant variant = Variant::Vanilla;

    PatchEmbed cond_embed;  // C+1 channels (mask concatenated)
    std::vector<VitBlock> vit_blocks;
    std::optional<PredHead> pred_head;
    std::optional<GenerativeStream> gen;
    std::optional<PatchEmbed> ablation_embed;  // C channels, embeds PredHead output

    Tensor cond_posenc;    // [cond_tokens, H], constant
    Tensor target_posenc;  // [target_tokens, H], constant

    std::vector<Parameter> params;

    /// g_M: condition tokens after the predictive stack (the embedding
    /// alone when M = 0). Never sees x_t or t.
    Tensor predictive_tokens(const ConditionInput& cond) const;

    /// Deterministic prediction through the PredHead, [S, n, n, C].
    Tensor predict(const ConditionInput& cond) const;

    /// Conditioning tokens handed to the generative stream. For the
    /// PredHead ablation this re-embeds the explicit prediction instead
    /// of passing g_M. stop_gradient detaches at the stream boundary.
    Tensor conditioning(const ConditionInput& cond, bool stop_gradient) const;

    /// Velocity estimate for noisy target x_t [S, n, n, C] at time t.
    Tensor velocity(const Tensor& x_t, const Tensor& cond_tokens, float t) const;

    Parameter* find_param(const std::string& name);
    const Parameter* find_param(const std::string& name) const;
    void freeze_predictive();
    std::vector<std::string> frozen_names() const;

    /// SHA-256 over the predictive-stream parameter bytes in declaration
    /// order; used to prove stage 2 left the stream untouched.
    std::string predictive_digest() const;

    int64_t parameter_count() const;
};

ModelBundle build_model(const ArchConfig& arch, Variant variant, uint64_t seed);

}  // namespace foredif
