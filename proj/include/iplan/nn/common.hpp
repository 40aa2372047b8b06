#pragma once

#include "iplan/core/rng.hpp"
#include "iplan/core/types.hpp"

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <string>

namespace iplan::nn {

// [rows, cols] float tensor copy of a mask.
torch::Tensor to_tensor(const Mask& m);
torch::Tensor to_tensor(const FloatRaster& m);
FloatRaster to_raster(const torch::Tensor& t);

// Standard-normal tensor drawn from `rng` (not from torch's global generator).
torch::Tensor normal_from(Rng& rng, at::IntArrayRef shape);
torch::Tensor uniform_from(Rng& rng, at::IntArrayRef shape);

// Seeds torch's generator (parameter init) from the caller's engine.
void seed_torch(Rng& rng);

// Named-weight archive with a JSON header stored alongside the parameters.
void save_checkpoint(const std::filesystem::path& path, const torch::nn::Module& module, const nlohmann::json& header);
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);
void load_checkpoint_weights(const std::filesystem::path& path, torch::nn::Module& module);

// Total number of scalar parameters.
std::int64_t parameter_count(const torch::nn::Module& module);

} // namespace iplan::nn
