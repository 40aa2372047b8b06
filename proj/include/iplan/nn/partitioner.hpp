#pragma once

#include "iplan/core/rng.hpp"
#include "iplan/core/types.hpp"
#include "iplan/nn/locator.hpp"

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>

namespace iplan::nn {

// Single-channel state: -1 outside the interior, 0 on free interior and
// type_code(t) on pixels claimed by a room of type t.
using PartitionState = FloatRaster;

inline constexpr float kExteriorCode = -1.0f;

// Type ids are zero-based, so (t+1)/K keeps every room code in (0,1] and
// distinct from free interior.
inline float type_code(int type_id, int K) { return static_cast<float>(type_id + 1) / static_cast<float>(K); }

PartitionState initial_partition_state(const Boundary& b);

// s' = s (1 - mask) + mask * code, then exterior pixels (s == -1) reset to -1.
PartitionState blend(const PartitionState& s, const FloatRaster& mask, int type_id, int K);
torch::Tensor blend(const torch::Tensor& s, const torch::Tensor& mask, const torch::Tensor& code);

struct PartitionConfig {
    int n_max = 8;
    double lr = 1e-4;        // generator, adversarial phase
    double critic_lr = 1e-4;
    int n_critic = 5;
    double lambda_gp = 10.0;
    double lambda_box = 100.0;
    int batch = 4;
    int iterations = 300;
    // Teacher-forced box regression on lambda_box * L_s alone before the
    // adversarial phase starts.
    int warmup_iterations = 1000;
    double warmup_lr = 1e-3;
    int masker_iterations = 200;
    int masker_batch = 8;
    double masker_lr = 1e-3;
};

// Six stride-2 conv + LayerNorm + ReLU units over a 128x128 input.
class ConvUnitsImpl : public torch::nn::Module {
public:
    ConvUnitsImpl(int in_channels, int units);
    torch::Tensor forward(const torch::Tensor& x);
    int out_features() const;

private:
    torch::nn::Sequential seq_{nullptr};
    int units_;
};
TORCH_MODULE(ConvUnits);

// F_b: (state, center stamp, broadcast one-hot type) -> normalized
// (top, left, bottom, right) in [0,1].
class BoxRegressorImpl : public torch::nn::Module {
public:
    explicit BoxRegressorImpl(int K);
    torch::Tensor forward(const torch::Tensor& input); // [B,K+2,128,128] -> [B,4]
    int K() const { return K_; }

private:
    int K_;
    ConvUnits backbone_{nullptr};
    torch::nn::Sequential head_{nullptr};
};
TORCH_MODULE(BoxRegressor);

// F_m: rasterized box (two coordinate ramps + hard indicator) -> soft mask.
class MaskerImpl : public torch::nn::Module {
public:
    MaskerImpl();
    torch::Tensor forward(const torch::Tensor& raster); // [B,3,128,128] -> [B,128,128]

private:
    torch::nn::Sequential seq_{nullptr};
};
TORCH_MODULE(Masker);

// Critic over a sequence of states stacked as channels (padded to n_max).
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(int n_max);
    torch::Tensor forward(const torch::Tensor& states); // [B,n_max,128,128] -> [B]

private:
    ConvUnits backbone_{nullptr};
    torch::nn::Sequential head_{nullptr};
};
TORCH_MODULE(Discriminator);

// [B,4] normalized boxes -> [B,3,128,128] rasters. Ramps stay differentiable
// in the box coordinates; the indicator channel does not.
torch::Tensor box_raster(const torch::Tensor& boxes);
torch::Tensor normalized_box(const Box<double>& box);

struct Partitioner {
    RoomTypeRegistry registry;
    PartitionConfig cfg;
    BoxRegressor fb{nullptr};
    Masker fm{nullptr};
    Discriminator disc{nullptr};
};

Partitioner make_partitioner(const RoomTypeRegistry& registry, const PartitionConfig& cfg, Rng& rng);

// F_b input for one step: [K+2,128,128].
torch::Tensor generator_input(const torch::Tensor& state, const Pixel& center, int type_id, int K);

struct RegressedBox {
    Box<double> raw;   // canonicalized, pixel units
    PixelBox box;      // rounded to pixel edges
    bool expanded = false; // degenerate output replaced by a 3x3 box at the center
};

RegressedBox regress_box(const Partitioner& p, const PartitionState& s, const Pixel& center, int type_id);
FloatRaster soft_mask(const Partitioner& p, const Box<double>& box);

struct PartitionStep {
    RegressedBox proposal;
    PixelBox box;       // what was blended (the proposal or an edit)
    bool edited = false;
    FloatRaster mask;
    PartitionState state; // after blending
};

PartitionStep partition_step(const Partitioner& p, const PartitionState& s, const Placement& room,
    const std::optional<PixelBox>& override_box = std::nullopt);

using BoxEdit = std::function<std::optional<PixelBox>(int step, const PixelBox& proposed)>;

struct PartitionSequence {
    std::vector<PartitionState> states; // S_0 .. S_N
    std::vector<PartitionStep> steps;
};

PartitionSequence generate_sequence(const Partitioner& p, const Boundary& b, const std::vector<Placement>& rooms,
    const BoxEdit& edit = {});
// Continues a sequence from an intermediate state; step indices start at `first_step`.
PartitionSequence continue_sequence(const Partitioner& p, const PartitionState& s, const std::vector<Placement>& rooms,
    int first_step, const BoxEdit& edit = {});

struct GanLoss {
    torch::Tensor d_loss, gp;
};

using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

// d_loss = E[D(fake)] - E[D(real)] + lambda * gp with gp = E[(|grad D(x)| - 1)^2]
// on x = u fake + (1-u) real. Sequences are [B,T,H,W].
GanLoss wgan_gp_loss(const Critic& critic, const torch::Tensor& fake, const torch::Tensor& real, Rng& rng,
    double lambda_gp = 10.0, bool create_graph = true);
GanLoss wgan_gp_loss(const Partitioner& p, const torch::Tensor& fake, const torch::Tensor& real, Rng& rng);

// Sum over boxes and coordinates of the piecewise smooth-L1 residual.
torch::Tensor box_reg_loss(const torch::Tensor& pred, const torch::Tensor& gt);

struct PartitionTraceRow {
    int iter;
    bool adversarial; // false during warm-up, where only box_loss is set
    double d_loss, gp, g_adv, box_loss, critic_gap;
};

struct MaskerTraceRow {
    int iter;
    double bce;
};

struct PartitionTraining {
    Partitioner partitioner;
    std::vector<MaskerTraceRow> masker_trace;
    std::vector<PartitionTraceRow> trace;
};

// Supervised fit of F_m to hard box masks on random boxes.
std::vector<MaskerTraceRow> prefit_masker(Masker& fm, const PartitionConfig& cfg, Rng& rng);
double masker_iou(const Partitioner& p, const Box<double>& box);

PartitionTraining train_partitioner(const std::vector<Layout>& corpus, const PartitionConfig& cfg, Rng& rng);

void save_partitioner(const std::filesystem::path& path, const Partitioner& p);
// Throws RegistryError when K or the registry differs.
Partitioner load_partitioner(const std::filesystem::path& path, const RoomTypeRegistry& registry);

// FNV-1a over the raw float bytes, as 16 hex digits.
std::string state_hash(const PartitionState& s);

// Per-step playback record: box, RLE of mask > 0.5, and a hash of the state.
nlohmann::json trace_export(const PartitionSequence& seq);

} // namespace iplan::nn
