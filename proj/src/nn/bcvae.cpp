#include "iplan/nn/bcvae.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/nn/common.hpp"

#include <algorithm>
#include <numeric>

namespace iplan::nn {

namespace {

constexpr float kClamp = 1e-7f;
constexpr int kFlattened = 64; // 16 channels x 2 x 2 after six stride-2 convs

torch::nn::Sequential conv_stack()
{
    const int widths[] = {1, 16, 16, 32, 32, 16, 16};
    torch::nn::Sequential seq;
    for (int i = 0; i < 6; ++i) {
        seq->push_back(torch::nn::Conv2d(
            torch::nn::Conv2dOptions(widths[i], widths[i + 1], 4).stride(2).padding(1).bias(false)));
        seq->push_back(torch::nn::BatchNorm2d(widths[i + 1]));
        seq->push_back(torch::nn::ReLU());
    }
    seq->push_back(torch::nn::Flatten());
    return seq;
}

std::string header_kind() { return "bcvae"; }

// Inference only reads parameters; the holder's const overload hides that.
BcvaeImpl& model(const TypeSampler& s) { return *s.net.ptr(); }

} // namespace

BcvaeImpl::BcvaeImpl(int n_c, BcvaeConfig cfg)
    : n_c_(n_c)
    , cfg_(cfg)
{
    if (n_c < 1 || cfg.latent_dim < 1 || cfg.embed_dim < 1)
        throw ShapeError("bcvae dimensions must be positive");
    embed_ = register_module("embed", conv_stack());
    if (cfg.embed_dim != kFlattened)
        project_ = register_module("project", torch::nn::Linear(kFlattened, cfg.embed_dim));
    enc_ = register_module("enc",
        torch::nn::Sequential(torch::nn::Linear(n_c + cfg.embed_dim, 128), torch::nn::ReLU(),
            torch::nn::Linear(128, 64), torch::nn::ReLU()));
    mu_ = register_module("mu", torch::nn::Linear(64, cfg.latent_dim));
    logvar_ = register_module("logvar", torch::nn::Linear(64, cfg.latent_dim));
    const int in = cfg.latent_dim + cfg.embed_dim;
    dec_ = register_module("dec",
        torch::nn::Sequential(torch::nn::Linear(in, 96), torch::nn::ReLU(), torch::nn::Linear(96, 64),
            torch::nn::ReLU(), torch::nn::Linear(64, n_c), torch::nn::Sigmoid()));
}

torch::Tensor BcvaeImpl::embed(const torch::Tensor& image)
{
    if (image.dim() != 4 || image.size(1) != 1 || image.size(2) != kResolution || image.size(3) != kResolution)
        throw ShapeError("boundary image must be [B,1,128,128]");
    torch::Tensor g = embed_->forward(image);
    return project_ ? project_->forward(g) : g;
}

std::pair<torch::Tensor, torch::Tensor> BcvaeImpl::encode(const torch::Tensor& v, const torch::Tensor& gamma)
{
    if (v.dim() != 2 || v.size(1) != n_c_)
        throw ShapeError("type bits must have length " + std::to_string(n_c_));
    if (gamma.dim() != 2 || gamma.size(1) != cfg_.embed_dim || gamma.size(0) != v.size(0))
        throw ShapeError("embedding must have length " + std::to_string(cfg_.embed_dim));
    const torch::Tensor h = enc_->forward(torch::cat({v, gamma}, 1));
    return {mu_->forward(h), logvar_->forward(h)};
}

torch::Tensor BcvaeImpl::decode(const torch::Tensor& z, const torch::Tensor& gamma)
{
    if (z.dim() != 2 || z.size(1) != cfg_.latent_dim)
        throw ShapeError("latent must have length " + std::to_string(cfg_.latent_dim));
    if (gamma.dim() != 2 || gamma.size(1) != cfg_.embed_dim || gamma.size(0) != z.size(0))
        throw ShapeError("embedding must have length " + std::to_string(cfg_.embed_dim));
    return dec_->forward(torch::cat({z, gamma}, 1));
}

torch::Tensor boundary_image(const Boundary& b)
{
    FloatRaster img = b.interior.cast<float>();
    img = (b.boundary != 0).select(0.5f, img);
    img = (b.frontdoor != 0).select(0.75f, img);
    return to_tensor(img).unsqueeze(0);
}

torch::Tensor embed_boundary(const TypeSampler& s, const Boundary& b)
{
    torch::NoGradGuard guard;
    return model(s).embed(boundary_image(b).unsqueeze(0)).squeeze(0);
}

std::pair<torch::Tensor, torch::Tensor> encode(const TypeSampler& s, const TypeBits& v, const torch::Tensor& gamma)
{
    if (v.size() != s.net->n_c())
        throw ShapeError("type bits must have length " + std::to_string(s.net->n_c()));
    torch::NoGradGuard guard;
    const torch::Tensor vt = torch::from_blob(const_cast<float*>(v.data()), {1, v.size()}, torch::kFloat32).clone();
    auto [mu, logvar] = model(s).encode(vt, gamma.reshape({1, -1}));
    return {mu.squeeze(0), logvar.squeeze(0)};
}

torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& logvar, Rng& rng)
{
    if (!mu.sizes().equals(logvar.sizes()))
        throw ShapeError("mu and logvar shapes differ");
    return mu + torch::exp(0.5 * logvar) * normal_from(rng, mu.sizes());
}

torch::Tensor decode(const TypeSampler& s, const torch::Tensor& z, const torch::Tensor& gamma)
{
    torch::NoGradGuard guard;
    return model(s).decode(z.reshape({1, -1}), gamma.reshape({1, -1})).squeeze(0);
}

BcvaeLoss bcvae_loss(const torch::Tensor& v, const torch::Tensor& v_hat, const torch::Tensor& mu,
    const torch::Tensor& logvar, double kl_weight)
{
    if (!v.sizes().equals(v_hat.sizes()) || !mu.sizes().equals(logvar.sizes()))
        throw ShapeError("bcvae_loss operand shapes differ");
    {
        torch::NoGradGuard guard;
        if (!torch::all((v_hat >= 0) & (v_hat <= 1)).item<bool>())
            throw DomainError("reconstruction outside [0,1]");
    }
    const torch::Tensor p = v_hat.clamp(kClamp, 1.0f - kClamp);
    const torch::Tensor bce = -(v * torch::log(p) + (1 - v) * torch::log(1 - p));
    const torch::Tensor kl_terms = -0.5 * (1 + logvar - mu.pow(2) - logvar.exp());
    torch::Tensor rec = bce.sum(-1);
    torch::Tensor kl = kl_terms.sum(-1);
    if (rec.dim() > 0) {
        rec = rec.mean();
        kl = kl.mean();
    }
    return {rec + kl_weight * kl, rec, kl};
}

std::vector<TypeCount> sample_types(const TypeSampler& s, const Boundary& b, Rng& rng, int n)
{
    std::vector<TypeCount> out;
    if (n <= 0)
        return out;
    torch::NoGradGuard guard;
    const torch::Tensor gamma = embed_boundary(s, b).unsqueeze(0).expand({n, -1});
    const torch::Tensor z = normal_from(rng, {n, s.net->config().latent_dim});
    const torch::Tensor v = model(s).decode(z, gamma).contiguous();
    for (int i = 0; i < n; ++i) {
        const Eigen::Map<const Eigen::VectorXf> row(v[i].data_ptr<float>(), v.size(1));
        out.push_back(decode_type_bits(row, s.registry));
    }
    return out;
}

TypeCount reconstruct_types(const TypeSampler& s, const Layout& layout)
{
    const torch::Tensor gamma = embed_boundary(s, layout.boundary);
    const auto [mu, logvar] = encode(s, encode_type_bits(type_count_of(layout), s.registry), gamma);
    const torch::Tensor v = decode(s, mu, gamma).contiguous();
    const Eigen::Map<const Eigen::VectorXf> row(v.data_ptr<float>(), v.size(0));
    return decode_type_bits(row, s.registry);
}

BcvaeTraining train_bcvae(const std::vector<Layout>& corpus, const BcvaeConfig& cfg, Rng& rng)
{
    if (corpus.empty())
        throw DataError("train_bcvae: empty corpus");
    const RoomTypeRegistry& reg = corpus.front().registry;
    reg.validate();
    seed_torch(rng);

    std::vector<torch::Tensor> images, bits;
    for (const Layout& l : corpus) {
        if (l.registry != reg)
            throw RegistryError("corpus mixes registries (" + l.id + ")");
        images.push_back(boundary_image(l.boundary));
        const TypeBits v = encode_type_bits(type_count_of(l), reg);
        bits.push_back(torch::from_blob(const_cast<float*>(v.data()), {v.size()}, torch::kFloat32).clone());
    }

    BcvaeTraining result{{reg, Bcvae(reg.n_c(), cfg)}, {}};
    Bcvae& net = result.sampler.net;
    torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.lr));
    net->train();

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = static_cast<std::size_t>(std::max(1, cfg.batch));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0, rec = 0, kl = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::vector<torch::Tensor> xs, vs;
            for (std::size_t i = start; i < end; ++i) {
                xs.push_back(images[order[i]]);
                vs.push_back(bits[order[i]]);
            }
            const torch::Tensor x = torch::stack(xs), v = torch::stack(vs);
            const torch::Tensor gamma = net->embed(x);
            auto [mu, logvar] = net->encode(v, gamma);
            const torch::Tensor z = reparameterize(mu, logvar, rng);
            const BcvaeLoss loss = bcvae_loss(v, net->decode(z, gamma), mu, logvar, cfg.kl_weight);
            if (!std::isfinite(loss.total.item<double>()))
                throw NumericsError("bcvae loss is not finite at epoch " + std::to_string(epoch));
            opt.zero_grad();
            loss.total.backward();
            opt.step();
            const double w = static_cast<double>(end - start) / static_cast<double>(order.size());
            total += w * loss.total.item<double>();
            rec += w * loss.rec.item<double>();
            kl += w * loss.kl.item<double>();
        }
        result.trace.push_back({epoch, total, rec, kl});
    }
    net->eval();
    return result;
}

void save_type_sampler(const std::filesystem::path& path, const TypeSampler& s)
{
    const BcvaeConfig& c = s.net->config();
    nlohmann::json header = {{"kind", header_kind()}, {"n_c", s.net->n_c()}, {"latent_dim", c.latent_dim},
        {"embed_dim", c.embed_dim}, {"kl_weight", c.kl_weight}, {"registry_hash", std::to_string(s.registry.hash())}};
    save_checkpoint(path, *s.net, header);
}

TypeSampler load_type_sampler(const std::filesystem::path& path, const RoomTypeRegistry& registry)
{
    const nlohmann::json header = read_checkpoint_header(path);
    if (header.value("kind", "") != header_kind())
        throw ParseError(path.string() + ": not a bcvae checkpoint");
    if (header.at("registry_hash").get<std::string>() != std::to_string(registry.hash()))
        throw RegistryError(path.string() + ": checkpoint registry hash does not match");
    if (header.at("n_c").get<int>() != registry.n_c())
        throw RegistryError(path.string() + ": checkpoint n_c does not match the registry");
    BcvaeConfig cfg;
    cfg.latent_dim = header.at("latent_dim");
    cfg.embed_dim = header.at("embed_dim");
    cfg.kl_weight = header.value("kl_weight", cfg.kl_weight);
    TypeSampler s{registry, Bcvae(registry.n_c(), cfg)};
    load_checkpoint_weights(path, *s.net);
    s.net->eval();
    return s;
}

} // namespace iplan::nn
