#pragma once

#include "iplan/core/rng.hpp"
#include "iplan/core/types.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>

namespace iplan::nn {

struct Placement {
    int type_id = 0;
    Pixel center;
    friend bool operator==(const Placement&, const Placement&) = default;
};

// K+4 binary channels: boundary, front door, interior, one stamp channel per
// type, and the OR of all stamps.
struct LocatorState {
    int K = 0;
    std::vector<Mask> channels;

    const Mask& summary() const { return channels.back(); }
    torch::Tensor to_tensor() const;
};

LocatorState build_state(const Boundary& b, const std::vector<Placement>& placed, const RoomTypeRegistry& reg);

// Label order of the classifier output: K room types, then these three.
inline int existing_label(int K) { return K; }
inline int free_label(int K) { return K + 1; }
inline int outside_label(int K) { return K + 2; }

using LabelGrid = Raster<int>;

struct LocatorConfig {
    double width_factor = 0.25;
    double type_weight = 2.0;
    double other_weight = 1.25;
    double temperature = 1.0;
    double lr = 1e-3;
    int batch = 4;
    int epochs = 300;
};

// ResNet-18 style backbone, type-embedding branch, ASPP decoder with a
// transposed-convolution head back to full resolution.
class LocatorNetImpl : public torch::nn::Module {
public:
    LocatorNetImpl(int K, double width_factor = 0.25);

    // state [B,K+4,128,128], one-hot type [B,K] -> logits [B,K+3,128,128]
    torch::Tensor forward(const torch::Tensor& state, const torch::Tensor& type_onehot);

    int K() const { return K_; }
    double width_factor() const { return width_factor_; }

private:
    int K_;
    double width_factor_;
    torch::nn::Sequential stem_{nullptr}, layer1_{nullptr}, layer2_{nullptr}, layer3_{nullptr}, layer4_{nullptr};
    torch::nn::Sequential type_fc_{nullptr}, type_conv_{nullptr};
    torch::nn::ModuleList aspp_{nullptr};
    torch::nn::Sequential fuse_{nullptr}, deconv_{nullptr};
    int type_channels_ = 16;
};
TORCH_MODULE(LocatorNet);

struct RoomLocator {
    RoomTypeRegistry registry;
    LocatorNet net{nullptr};
    LocatorConfig cfg;
};

struct LocatorOutput {
    torch::Tensor logits; // [K+3,128,128]
};

LocatorOutput locator_forward(const RoomLocator& loc, const LocatorState& s, int type_id);

// Weighted pixel cross-entropy summed over pixels, averaged over a leading
// batch dimension. logits [B,C,H,W] or [C,H,W]; target int64 [B,H,W] or [H,W].
torch::Tensor locator_loss(const torch::Tensor& logits, const torch::Tensor& target, int K,
    double type_weight = 2.0, double other_weight = 1.25);
torch::Tensor label_tensor(const LabelGrid& grid);

struct TrainingExample {
    LocatorState state;
    int next_type = 0;
    int next_room = 0; // index into layout.rooms
    std::vector<int> kept;
    LabelGrid target;
};

TrainingExample make_training_example(const Layout& layout, Rng& rng);

enum class DecodeMode { Argmax, Sample };

// Scores each admissible center (interior, not yet stamped) by the mean
// class probability over its 9x9 stamp window. Throws NoFreeSpace when no
// pixel is admissible.
Pixel predict_center(const RoomLocator& loc, const LocatorState& s, int type_id, DecodeMode mode, Rng& rng);

// Called after each step with the proposed center; a returned pixel replaces it.
using CenterEdit = std::function<std::optional<Pixel>(int step, int type_id, const Pixel& proposed)>;

std::vector<Pixel> locate_all(const RoomLocator& loc, const Boundary& b, const std::vector<int>& types, Rng& rng,
    DecodeMode mode, const CenterEdit& edit = {});

struct LocatorTraceRow {
    int epoch;
    double loss;
};

struct LocatorTraining {
    RoomLocator locator;
    std::vector<LocatorTraceRow> trace;
};

LocatorTraining train_locator(const std::vector<Layout>& corpus, const LocatorConfig& cfg, Rng& rng);

void save_locator(const std::filesystem::path& path, const RoomLocator& loc);
// Throws RegistryError when the checkpoint's K or registry differs.
RoomLocator load_locator(const std::filesystem::path& path, const RoomTypeRegistry& registry);

} // namespace iplan::nn
