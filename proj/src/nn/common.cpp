#include "iplan/nn/common.hpp"

#include "iplan/core/errors.hpp"

namespace iplan::nn {

torch::Tensor to_tensor(const Mask& m)
{
    return to_tensor(FloatRaster(m.cast<float>()));
}

torch::Tensor to_tensor(const FloatRaster& m)
{
    return torch::from_blob(const_cast<float*>(m.data()), {m.rows(), m.cols()}, torch::kFloat32).clone();
}

FloatRaster to_raster(const torch::Tensor& t)
{
    const torch::Tensor c = t.detach().to(torch::kFloat32).contiguous();
    if (c.dim() != 2)
        throw ShapeError("expected a 2-D tensor");
    FloatRaster out(c.size(0), c.size(1));
    std::copy_n(c.data_ptr<float>(), c.numel(), out.data());
    return out;
}

torch::Tensor normal_from(Rng& rng, at::IntArrayRef shape)
{
    torch::Tensor t = torch::empty(shape, torch::kFloat32);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    float* p = t.data_ptr<float>();
    for (std::int64_t i = 0; i < t.numel(); ++i)
        p[i] = dist(rng);
    return t;
}

torch::Tensor uniform_from(Rng& rng, at::IntArrayRef shape)
{
    torch::Tensor t = torch::empty(shape, torch::kFloat32);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    float* p = t.data_ptr<float>();
    for (std::int64_t i = 0; i < t.numel(); ++i)
        p[i] = dist(rng);
    return t;
}

void seed_torch(Rng& rng) { torch::manual_seed(rng() & 0x7fffffffffffffffull); }

void save_checkpoint(const std::filesystem::path& path, const torch::nn::Module& module, const nlohmann::json& header)
{
    torch::serialize::OutputArchive archive;
    archive.write("iplan.header", c10::IValue(header.dump()));
    module.save(archive);
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    try {
        archive.save_to(path.string());
    } catch (const c10::Error& e) {
        throw Error("IoError", "cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw DataError("checkpoint not found: " + path.string());
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw ParseError(path.string() + ": not a checkpoint (" + e.what_without_backtrace() + ")");
    }
    c10::IValue value;
    if (!archive.try_read("iplan.header", value) || !value.isString())
        throw ParseError(path.string() + ": missing checkpoint header");
    return nlohmann::json::parse(value.toStringRef());
}

void load_checkpoint_weights(const std::filesystem::path& path, torch::nn::Module& module)
{
    try {
        torch::serialize::InputArchive archive;
        archive.load_from(path.string());
        module.load(archive);
    } catch (const c10::Error& e) {
        throw ParseError(path.string() + ": weights do not match (" + e.what_without_backtrace() + ")");
    }
}

std::int64_t parameter_count(const torch::nn::Module& module)
{
    std::int64_t n = 0;
    for (const auto& p : module.parameters())
        n += p.numel();
    return n;
}

} // namespace iplan::nn
