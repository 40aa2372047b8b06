#pragma once

#include "iplan/core/rng.hpp"
#include "iplan/core/type_bits.hpp"
#include "iplan/core/types.hpp"

#include <torch/torch.h>

#include <filesystem>

namespace iplan::nn {

struct BcvaeConfig {
    int latent_dim = 32;
    int embed_dim = 64;
    double kl_weight = 0.5;
    double lr = 1e-3;
    int batch = 64;
    int epochs = 200;
};

// Boundary-conditioned VAE over TypeBits. Embedding, encoder and decoder are
// registered under the prefixes "embed", "enc" and "dec".
class BcvaeImpl : public torch::nn::Module {
public:
    BcvaeImpl(int n_c, BcvaeConfig cfg = {});

    // [B,1,128,128] -> [B,embed_dim]
    torch::Tensor embed(const torch::Tensor& image);
    // ([B,n_c], [B,embed_dim]) -> (mu, logvar), each [B,latent_dim]
    std::pair<torch::Tensor, torch::Tensor> encode(const torch::Tensor& v, const torch::Tensor& gamma);
    // ([B,latent_dim], [B,embed_dim]) -> [B,n_c] in (0,1)
    torch::Tensor decode(const torch::Tensor& z, const torch::Tensor& gamma);

    int n_c() const { return n_c_; }
    const BcvaeConfig& config() const { return cfg_; }

private:
    int n_c_;
    BcvaeConfig cfg_;
    torch::nn::Sequential embed_{nullptr};
    torch::nn::Linear project_{nullptr}; // only when embed_dim != 64
    torch::nn::Sequential enc_{nullptr};
    torch::nn::Linear mu_{nullptr}, logvar_{nullptr};
    torch::nn::Sequential dec_{nullptr};
};
TORCH_MODULE(Bcvae);

struct TypeSampler {
    RoomTypeRegistry registry;
    Bcvae net{nullptr};
};

// Single-channel boundary image: interior 1, wall 0.5, front door 0.75, exterior 0.
torch::Tensor boundary_image(const Boundary& b);

torch::Tensor embed_boundary(const TypeSampler& s, const Boundary& b);
std::pair<torch::Tensor, torch::Tensor> encode(const TypeSampler& s, const TypeBits& v, const torch::Tensor& gamma);
torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& logvar, Rng& rng);
torch::Tensor decode(const TypeSampler& s, const torch::Tensor& z, const torch::Tensor& gamma);

struct BcvaeLoss {
    torch::Tensor total, rec, kl;
};

// Per-sample sums, averaged over a leading batch dimension when present.
BcvaeLoss bcvae_loss(const torch::Tensor& v, const torch::Tensor& v_hat, const torch::Tensor& mu,
    const torch::Tensor& logvar, double kl_weight);

std::vector<TypeCount> sample_types(const TypeSampler& s, const Boundary& b, Rng& rng, int n);
// Decoded counts from the posterior mean of the layout's own TypeBits.
TypeCount reconstruct_types(const TypeSampler& s, const Layout& layout);

struct BcvaeTraceRow {
    int epoch;
    double total, rec, kl;
};

struct BcvaeTraining {
    TypeSampler sampler;
    std::vector<BcvaeTraceRow> trace;
};

BcvaeTraining train_bcvae(const std::vector<Layout>& corpus, const BcvaeConfig& cfg, Rng& rng);

void save_type_sampler(const std::filesystem::path& path, const TypeSampler& s);
// Throws RegistryError when the checkpoint was trained for another registry.
TypeSampler load_type_sampler(const std::filesystem::path& path, const RoomTypeRegistry& registry);

} // namespace iplan::nn
