#include "iplan/nn/locator.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/raster.hpp"
#include "iplan/nn/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iplan::nn {

namespace {

namespace tnn = torch::nn;

int scaled(int channels, double factor) { return std::max(4, static_cast<int>(std::lround(channels * factor))); }

tnn::Conv2dOptions conv(int in, int out, int k, int stride = 1, int dilation = 1)
{
    return tnn::Conv2dOptions(in, out, k).stride(stride).padding(dilation * (k / 2)).dilation(dilation).bias(false);
}

class BasicBlockImpl : public tnn::Module {
public:
    BasicBlockImpl(int in, int out, int stride, int dilation)
    {
        conv1_ = register_module("conv1", tnn::Conv2d(conv(in, out, 3, stride, dilation)));
        bn1_ = register_module("bn1", tnn::BatchNorm2d(out));
        conv2_ = register_module("conv2", tnn::Conv2d(conv(out, out, 3, 1, dilation)));
        bn2_ = register_module("bn2", tnn::BatchNorm2d(out));
        if (stride != 1 || in != out)
            down_ = register_module("down",
                tnn::Sequential(tnn::Conv2d(conv(in, out, 1, stride)), tnn::BatchNorm2d(out)));
    }

    torch::Tensor forward(const torch::Tensor& x)
    {
        torch::Tensor y = torch::relu(bn1_(conv1_(x)));
        y = bn2_(conv2_(y));
        return torch::relu(y + (down_ ? down_->forward(x) : x));
    }

private:
    tnn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    tnn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
    tnn::Sequential down_{nullptr};
};
TORCH_MODULE(BasicBlock);

tnn::Sequential res_layer(int in, int out, int stride, int dilation)
{
    return tnn::Sequential(BasicBlock(in, out, stride, dilation), BasicBlock(out, out, 1, dilation));
}

constexpr int kBottleneck = 8; // backbone output is 8x8 for 128x128 input

// Inference only reads parameters; the holder's const overload hides that.
LocatorNetImpl& model(const RoomLocator& loc) { return *loc.net.ptr(); }

torch::Tensor onehot(int type_id, int K)
{
    torch::Tensor t = torch::zeros({1, K});
    t[0][type_id] = 1.0f;
    return t;
}

} // namespace

torch::Tensor LocatorState::to_tensor() const
{
    std::vector<torch::Tensor> planes;
    for (const Mask& m : channels)
        planes.push_back(nn::to_tensor(m));
    return torch::stack(planes);
}

LocatorState build_state(const Boundary& b, const std::vector<Placement>& placed, const RoomTypeRegistry& reg)
{
    const int K = reg.K();
    LocatorState s{K, {b.boundary, b.frontdoor, b.interior}};
    s.channels.resize(static_cast<std::size_t>(K + 4), empty_mask());
    for (const Placement& p : placed) {
        if (p.type_id < 0 || p.type_id >= K)
            throw RegistryError("room type id " + std::to_string(p.type_id) + " out of range");
        if (!inside_canvas(p.center))
            throw DomainError("center outside the canvas");
        stamp_center(s.channels[static_cast<std::size_t>(3 + p.type_id)], p.center);
        stamp_center(s.channels.back(), p.center);
    }
    return s;
}

LocatorNetImpl::LocatorNetImpl(int K, double width_factor)
    : K_(K)
    , width_factor_(width_factor)
{
    if (K < 1)
        throw ShapeError("locator needs at least one room type");
    const int w1 = scaled(64, width_factor), w2 = scaled(128, width_factor);
    const int w3 = scaled(256, width_factor), w4 = scaled(512, width_factor);

    stem_ = register_module("stem",
        tnn::Sequential(tnn::Conv2d(conv(K + 4, w1, 7, 2)), tnn::BatchNorm2d(w1), tnn::ReLU(),
            tnn::MaxPool2d(tnn::MaxPool2dOptions(3).stride(2).padding(1))));
    layer1_ = register_module("layer1", res_layer(w1, w1, 1, 1));
    layer2_ = register_module("layer2", res_layer(w1, w2, 2, 1));
    layer3_ = register_module("layer3", res_layer(w2, w3, 2, 1));
    layer4_ = register_module("layer4", res_layer(w3, w4, 1, 2));

    const int tc = type_channels_;
    type_fc_ = register_module("type_fc",
        tnn::Sequential(tnn::Linear(K, 64), tnn::ReLU(), tnn::Linear(64, 256), tnn::ReLU(),
            tnn::Linear(256, tc * kBottleneck * kBottleneck), tnn::ReLU()));
    type_conv_ = register_module("type_conv", tnn::Sequential());
    for (int i = 0; i < 4; ++i) {
        type_conv_->push_back(tnn::Conv2d(conv(tc, tc, 3)));
        type_conv_->push_back(tnn::BatchNorm2d(tc));
        type_conv_->push_back(tnn::LeakyReLU(tnn::LeakyReLUOptions().negative_slope(0.2)));
    }

    const int fused = w4 + tc, a = w3;
    aspp_ = register_module("aspp", tnn::ModuleList());
    for (int rate : {1, 2, 4, 6}) {
        const int k = rate == 1 ? 1 : 3;
        aspp_->push_back(tnn::Sequential(tnn::Conv2d(conv(fused, a, k, 1, rate)), tnn::BatchNorm2d(a), tnn::ReLU()));
    }
    fuse_ = register_module("fuse",
        tnn::Sequential(tnn::Conv2d(conv(4 * a, a, 1)), tnn::BatchNorm2d(a), tnn::ReLU()));

    const int widths[] = {a, a / 2, a / 2, a / 4, a / 4};
    deconv_ = register_module("deconv", tnn::Sequential());
    for (int i = 0; i < 4; ++i) {
        deconv_->push_back(tnn::ConvTranspose2d(
            tnn::ConvTranspose2dOptions(widths[i], widths[i + 1], 4).stride(2).padding(1).bias(false)));
        deconv_->push_back(tnn::BatchNorm2d(widths[i + 1]));
        deconv_->push_back(tnn::ReLU());
    }
    deconv_->push_back(tnn::Conv2d(tnn::Conv2dOptions(widths[4], K + 3, 1)));
}

torch::Tensor LocatorNetImpl::forward(const torch::Tensor& state, const torch::Tensor& type_onehot)
{
    if (state.dim() != 4 || state.size(1) != K_ + 4 || state.size(2) != kResolution || state.size(3) != kResolution)
        throw ShapeError("locator state must be [B," + std::to_string(K_ + 4) + ",128,128]");
    if (type_onehot.dim() != 2 || type_onehot.size(1) != K_ || type_onehot.size(0) != state.size(0))
        throw ShapeError("type one-hot must be [B," + std::to_string(K_) + "]");
    torch::Tensor x = layer4_->forward(layer3_->forward(layer2_->forward(layer1_->forward(stem_->forward(state)))));
    torch::Tensor t = type_fc_->forward(type_onehot).view({-1, type_channels_, kBottleneck, kBottleneck});
    t = type_conv_->forward(t);
    const torch::Tensor h = torch::cat({x, t}, 1);
    std::vector<torch::Tensor> branches;
    for (const auto& branch : *aspp_)
        branches.push_back(branch->as<tnn::Sequential>()->forward(h));
    return deconv_->forward(fuse_->forward(torch::cat(branches, 1)));
}

LocatorOutput locator_forward(const RoomLocator& loc, const LocatorState& s, int type_id)
{
    if (s.K != loc.registry.K() || static_cast<int>(s.channels.size()) != s.K + 4)
        throw ShapeError("locator state does not match the registry");
    if (type_id < 0 || type_id >= s.K)
        throw RegistryError("room type id " + std::to_string(type_id) + " out of range");
    torch::NoGradGuard guard;
    LocatorNetImpl& net = model(loc);
    return {net.forward(s.to_tensor().unsqueeze(0), onehot(type_id, s.K)).squeeze(0)};
}

torch::Tensor label_tensor(const LabelGrid& grid)
{
    return torch::from_blob(const_cast<int*>(grid.data()), {grid.rows(), grid.cols()}, torch::kInt32)
        .to(torch::kInt64);
}

torch::Tensor locator_loss(const torch::Tensor& logits, const torch::Tensor& target, int K, double type_weight,
    double other_weight)
{
    const bool batched = logits.dim() == 4;
    const torch::Tensor o = batched ? logits : logits.unsqueeze(0);
    const torch::Tensor y = batched ? target : target.unsqueeze(0);
    if (o.dim() != 4 || o.size(1) != K + 3 || y.dim() != 3 || y.size(0) != o.size(0) || y.size(1) != o.size(2)
        || y.size(2) != o.size(3))
        throw ShapeError("locator_loss operand shapes differ");
    if (y.numel() > 0 && (y.min().item<std::int64_t>() < 0 || y.max().item<std::int64_t>() >= K + 3))
        throw DomainError("target label outside [0, K+3)");
    const torch::Tensor logp = torch::log_softmax(o, 1).gather(1, y.unsqueeze(1)).squeeze(1);
    const torch::Tensor w = torch::where(y < K, torch::full({}, type_weight), torch::full({}, other_weight));
    return -(w * logp).sum({1, 2}).mean();
}

TrainingExample make_training_example(const Layout& layout, Rng& rng)
{
    const int N = layout.N();
    if (N < 1)
        throw ValidationError("layout " + layout.id + " has no rooms");
    const int K = layout.registry.K();
    std::vector<int> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    const int m = uniform_int(rng, 0, N - 1);
    std::shuffle(order.begin(), order.end(), rng);

    TrainingExample ex;
    ex.kept.assign(order.begin(), order.begin() + m);
    const std::vector<int> removed(order.begin() + m, order.end());
    ex.next_room = removed[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(removed.size()) - 1))];
    ex.next_type = layout.rooms[static_cast<std::size_t>(ex.next_room)].type_id;

    std::vector<Placement> placed;
    for (int i : ex.kept)
        placed.push_back({layout.rooms[i].type_id, layout.rooms[i].center});
    ex.state = build_state(layout.boundary, placed, layout.registry);

    ex.target = (layout.boundary.interior != 0).select(LabelGrid::Constant(kResolution, kResolution, free_label(K)),
        LabelGrid::Constant(kResolution, kResolution, outside_label(K)));
    ex.target = (ex.state.summary() != 0).select(existing_label(K), ex.target);
    const Mask next = stamped(empty_mask(), layout.rooms[static_cast<std::size_t>(ex.next_room)].center);
    ex.target = (next != 0).select(ex.next_type, ex.target);
    return ex;
}

Pixel predict_center(const RoomLocator& loc, const LocatorState& s, int type_id, DecodeMode mode, Rng& rng)
{
    // Targets are 9x9 blocks, so a center is scored by the mean class-t
    // probability over its stamp window rather than a single pixel.
    const torch::Tensor prob = torch::softmax(locator_forward(loc, s, type_id).logits, 0)[type_id];
    const torch::Tensor pooled = torch::avg_pool2d(prob.view({1, 1, kResolution, kResolution}), kStampSize, 1, kStampSize / 2);
    const torch::Tensor logp = torch::log(pooled.clamp_min(1e-30)).view({kResolution, kResolution}).contiguous();
    const float* lp = logp.data_ptr<float>();
    const Mask& interior = s.channels[2];
    const Mask& taken = s.summary();

    std::vector<int> admissible;
    for (int i = 0; i < kResolution * kResolution; ++i)
        if (interior.data()[i] && !taken.data()[i])
            admissible.push_back(i);
    if (admissible.empty())
        throw NoFreeSpace("no free interior pixel for type " + loc.registry.names[type_id]);

    int chosen = admissible.front();
    if (mode == DecodeMode::Argmax) {
        for (int i : admissible)
            if (lp[i] > lp[chosen])
                chosen = i;
    } else {
        const double temperature = std::max(loc.cfg.temperature, 1e-6);
        double top = -INFINITY;
        for (int i : admissible)
            top = std::max(top, static_cast<double>(lp[i]));
        std::vector<double> weights;
        weights.reserve(admissible.size());
        for (int i : admissible)
            weights.push_back(std::exp((lp[i] - top) / temperature));
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        chosen = admissible[pick(rng)];
    }
    return {chosen / kResolution, chosen % kResolution};
}

std::vector<Pixel> locate_all(const RoomLocator& loc, const Boundary& b, const std::vector<int>& types, Rng& rng,
    DecodeMode mode, const CenterEdit& edit)
{
    if (types.empty())
        throw ValidationError("locate_all needs at least one room type");
    std::vector<Placement> placed;
    std::vector<Pixel> centers;
    for (std::size_t j = 0; j < types.size(); ++j) {
        Pixel c;
        try {
            c = predict_center(loc, build_state(b, placed, loc.registry), types[j], mode, rng);
        } catch (const NoFreeSpace& e) {
            throw NoFreeSpace("step " + std::to_string(j) + ": " + e.detail());
        }
        if (edit)
            if (auto replaced = edit(static_cast<int>(j), types[j], c))
                c = *replaced;
        placed.push_back({types[j], c});
        centers.push_back(c);
    }
    return centers;
}

LocatorTraining train_locator(const std::vector<Layout>& corpus, const LocatorConfig& cfg, Rng& rng)
{
    if (corpus.empty())
        throw DataError("train_locator: empty corpus");
    const RoomTypeRegistry& reg = corpus.front().registry;
    for (const Layout& l : corpus)
        if (l.registry != reg)
            throw RegistryError("corpus mixes registries (" + l.id + ")");
    seed_torch(rng);

    LocatorTraining result{{reg, LocatorNet(reg.K(), cfg.width_factor), cfg}, {}};
    LocatorNet& net = result.locator.net;
    torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.lr));
    net->train();

    const int K = reg.K();
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = static_cast<std::size_t>(std::max(1, cfg.batch));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::vector<torch::Tensor> states, types, targets;
            for (std::size_t i = start; i < end; ++i) {
                const TrainingExample ex = make_training_example(corpus[order[i]], rng);
                states.push_back(ex.state.to_tensor());
                types.push_back(onehot(ex.next_type, K).squeeze(0));
                targets.push_back(label_tensor(ex.target));
            }
            const torch::Tensor loss = locator_loss(net->forward(torch::stack(states), torch::stack(types)),
                torch::stack(targets), K, cfg.type_weight, cfg.other_weight);
            if (!std::isfinite(loss.item<double>()))
                throw NumericsError("locator loss is not finite at epoch " + std::to_string(epoch));
            opt.zero_grad();
            loss.backward();
            opt.step();
            sum += loss.item<double>() * static_cast<double>(end - start);
        }
        result.trace.push_back({epoch, sum / static_cast<double>(order.size())});
    }
    net->eval();
    return result;
}

void save_locator(const std::filesystem::path& path, const RoomLocator& loc)
{
    nlohmann::json labels = loc.registry.names;
    for (const char* extra : {"EXISTING", "FREE", "OUTSIDE"})
        labels.push_back(extra);
    const nlohmann::json header = {{"kind", "locator"}, {"K", loc.registry.K()}, {"labels", labels},
        {"width_factor", loc.cfg.width_factor}, {"temperature", loc.cfg.temperature},
        {"registry_hash", std::to_string(loc.registry.hash())}};
    save_checkpoint(path, *loc.net, header);
}

RoomLocator load_locator(const std::filesystem::path& path, const RoomTypeRegistry& registry)
{
    const nlohmann::json header = read_checkpoint_header(path);
    if (header.value("kind", "") != "locator")
        throw ParseError(path.string() + ": not a locator checkpoint");
    if (header.at("K").get<int>() != registry.K())
        throw RegistryError(path.string() + ": checkpoint K does not match the registry");
    if (header.at("registry_hash").get<std::string>() != std::to_string(registry.hash()))
        throw RegistryError(path.string() + ": checkpoint registry hash does not match");
    LocatorConfig cfg;
    cfg.width_factor = header.at("width_factor");
    cfg.temperature = header.value("temperature", cfg.temperature);
    RoomLocator loc{registry, LocatorNet(registry.K(), cfg.width_factor), cfg};
    load_checkpoint_weights(path, *loc.net);
    loc.net->eval();
    return loc;
}

} // namespace iplan::nn
