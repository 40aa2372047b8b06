#include "iplan/nn/partitioner.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/raster.hpp"
#include "iplan/nn/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace iplan::nn {

namespace {

namespace tnn = torch::nn;

constexpr int kUnitWidths[] = {16, 32, 32, 64, 64, 64};
constexpr double kRampPixels = 4.0; // ramps saturate this far from an edge
constexpr float kMaskEps = 1e-6f;

BoxRegressorImpl& regressor(const Partitioner& p) { return *p.fb.ptr(); }
MaskerImpl& masker(const Partitioner& p) { return *p.fm.ptr(); }

torch::Tensor state_tensor(const PartitionState& s) { return to_tensor(s); }

PixelBox round_box(const Box<double>& b)
{
    const auto edge = [](double v) { return static_cast<int>(std::clamp<long>(std::lround(v), 0, kResolution)); };
    return {edge(b.top), edge(b.left), edge(b.bottom), edge(b.right)};
}

PixelBox expand_at(const Pixel& c)
{
    PixelBox b{c.row - 1, c.col - 1, c.row + 2, c.col + 2};
    b.top = std::max(0, b.top);
    b.left = std::max(0, b.left);
    b.bottom = std::min(kResolution, b.bottom);
    b.right = std::min(kResolution, b.right);
    return b;
}

torch::Tensor pad_sequence(const std::vector<torch::Tensor>& states, int n_max)
{
    if (states.empty())
        throw SequenceError("empty state sequence");
    if (static_cast<int>(states.size()) > n_max)
        throw SequenceError("sequence of " + std::to_string(states.size()) + " rooms exceeds n_max "
            + std::to_string(n_max));
    std::vector<torch::Tensor> padded = states;
    while (static_cast<int>(padded.size()) < n_max)
        padded.push_back(states.back());
    return torch::stack(padded);
}

// Random box in normalized coordinates with sides of at least 2 px.
torch::Tensor random_box(Rng& rng)
{
    const auto side = [&]() {
        const double len = uniform_real(rng, 2.0, 120.0);
        const double lo = uniform_real(rng, 0.0, kResolution - len);
        return std::pair{lo / kResolution, (lo + len) / kResolution};
    };
    const auto [t, b] = side();
    const auto [l, r] = side();
    return torch::tensor({float(t), float(l), float(b), float(r)});
}


} // namespace

PartitionState initial_partition_state(const Boundary& b)
{
    return (b.interior != 0).select(FloatRaster::Zero(b.interior.rows(), b.interior.cols()),
        FloatRaster::Constant(b.interior.rows(), b.interior.cols(), kExteriorCode));
}

PartitionState blend(const PartitionState& s, const FloatRaster& mask, int type_id, int K)
{
    if (s.rows() != mask.rows() || s.cols() != mask.cols())
        throw ShapeError("state and mask shapes differ");
    const PartitionState out = s * (1.0f - mask) + mask * type_code(type_id, K);
    return (s == kExteriorCode).select(kExteriorCode, out);
}

torch::Tensor blend(const torch::Tensor& s, const torch::Tensor& mask, const torch::Tensor& code)
{
    const torch::Tensor out = s * (1 - mask) + mask * code;
    return torch::where(s == kExteriorCode, s, out);
}

ConvUnitsImpl::ConvUnitsImpl(int in_channels, int units)
    : units_(units)
{
    if (units < 1 || units > 6)
        throw ShapeError("conv units must be between 1 and 6");
    seq_ = register_module("units", tnn::Sequential());
    int in = in_channels, size = kResolution;
    for (int i = 0; i < units; ++i) {
        size /= 2;
        seq_->push_back(tnn::Conv2d(tnn::Conv2dOptions(in, kUnitWidths[i], 4).stride(2).padding(1)));
        seq_->push_back(tnn::LayerNorm(tnn::LayerNormOptions({kUnitWidths[i], size, size})));
        seq_->push_back(tnn::ReLU());
        in = kUnitWidths[i];
    }
    seq_->push_back(tnn::Flatten());
}

torch::Tensor ConvUnitsImpl::forward(const torch::Tensor& x) { return seq_->forward(x); }

int ConvUnitsImpl::out_features() const
{
    const int size = kResolution >> units_;
    return kUnitWidths[units_ - 1] * size * size;
}

BoxRegressorImpl::BoxRegressorImpl(int K)
    : K_(K)
{
    backbone_ = register_module("backbone", ConvUnits(K + 2, 6));
    head_ = register_module("head",
        tnn::Sequential(tnn::Linear(backbone_->out_features(), 128), tnn::ReLU(), tnn::Linear(128, 4), tnn::Sigmoid()));
}

torch::Tensor BoxRegressorImpl::forward(const torch::Tensor& input)
{
    if (input.dim() != 4 || input.size(1) != K_ + 2)
        throw ShapeError("box regressor input must be [B," + std::to_string(K_ + 2) + ",128,128]");
    return head_->forward(backbone_->forward(input));
}

MaskerImpl::MaskerImpl()
{
    seq_ = register_module("convs", tnn::Sequential());
    const int widths[] = {3, 8, 8, 8, 8, 8, 1};
    for (int i = 0; i < 6; ++i) {
        seq_->push_back(tnn::Conv2d(tnn::Conv2dOptions(widths[i], widths[i + 1], 3).padding(1)));
        if (i < 5)
            seq_->push_back(tnn::ReLU());
    }
}

torch::Tensor MaskerImpl::forward(const torch::Tensor& raster)
{
    if (raster.dim() != 4 || raster.size(1) != 3)
        throw ShapeError("masker input must be [B,3,128,128]");
    // Squashed so outputs stay strictly inside (0,1) in float precision.
    return kMaskEps + (1 - 2 * kMaskEps) * torch::sigmoid(seq_->forward(raster).squeeze(1));
}

DiscriminatorImpl::DiscriminatorImpl(int n_max)
{
    backbone_ = register_module("backbone", ConvUnits(n_max, 4));
    head_ = register_module("head",
        tnn::Sequential(tnn::Linear(backbone_->out_features(), 128), tnn::ReLU(), tnn::Linear(128, 1)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& states)
{
    return head_->forward(backbone_->forward(states)).squeeze(1);
}

torch::Tensor box_raster(const torch::Tensor& boxes)
{
    if (boxes.dim() != 2 || boxes.size(1) != 4)
        throw ShapeError("boxes must be [B,4]");
    const torch::Tensor y = (torch::arange(kResolution, torch::kFloat32) + 0.5) / kResolution;
    const auto ramp = [&](const torch::Tensor& lo, const torch::Tensor& hi) {
        return torch::minimum(y - lo.unsqueeze(1), hi.unsqueeze(1) - y); // [B,128]
    };
    const torch::Tensor dr = ramp(boxes.select(1, 0), boxes.select(1, 2));
    const torch::Tensor dc = ramp(boxes.select(1, 1), boxes.select(1, 3));
    const double scale = kResolution / kRampPixels;
    const torch::Tensor rr = (dr * scale).clamp(-1, 1).unsqueeze(2).expand({-1, kResolution, kResolution});
    const torch::Tensor rc = (dc * scale).clamp(-1, 1).unsqueeze(1).expand({-1, kResolution, kResolution});
    const torch::Tensor inside = ((dr > 0).unsqueeze(2) & (dc > 0).unsqueeze(1)).to(torch::kFloat32);
    return torch::stack({rr, rc, inside}, 1);
}

torch::Tensor normalized_box(const Box<double>& b)
{
    return torch::tensor({float(b.top), float(b.left), float(b.bottom), float(b.right)}) / float(kResolution);
}

Partitioner make_partitioner(const RoomTypeRegistry& registry, const PartitionConfig& cfg, Rng& rng)
{
    registry.validate();
    seed_torch(rng);
    Partitioner p{registry, cfg, BoxRegressor(registry.K()), Masker(), Discriminator(cfg.n_max)};
    p.fb->eval();
    p.fm->eval();
    p.disc->eval();
    return p;
}

torch::Tensor generator_input(const torch::Tensor& state, const Pixel& center, int type_id, int K)
{
    if (type_id < 0 || type_id >= K)
        throw RegistryError("room type id " + std::to_string(type_id) + " out of range");
    const torch::Tensor stamp = to_tensor(stamped(empty_mask(), center));
    torch::Tensor types = torch::zeros({K, kResolution, kResolution});
    types[type_id].fill_(1.0f);
    return torch::cat({state.unsqueeze(0), stamp.unsqueeze(0), types}, 0);
}

RegressedBox regress_box(const Partitioner& p, const PartitionState& s, const Pixel& center, int type_id)
{
    if (!inside_canvas(center))
        throw DomainError("center outside the canvas");
    torch::NoGradGuard guard;
    const torch::Tensor in = generator_input(state_tensor(s), center, type_id, p.registry.K()).unsqueeze(0);
    const torch::Tensor out = (regressor(p).forward(in)[0] * kResolution).to(torch::kFloat64).contiguous();
    const double* v = out.data_ptr<double>();
    RegressedBox r;
    r.raw = canonicalize(Box<double>{v[0], v[1], v[2], v[3]});
    r.box = round_box(r.raw);
    if (r.box.height() < 1 || r.box.width() < 1) {
        r.box = expand_at(center);
        r.expanded = true;
    }
    return r;
}

FloatRaster soft_mask(const Partitioner& p, const Box<double>& box)
{
    torch::NoGradGuard guard;
    return to_raster(masker(p).forward(box_raster(normalized_box(box).unsqueeze(0)))[0]);
}

namespace {

PartitionStep apply_box(const Partitioner& p, const PartitionState& s, const Placement& room, RegressedBox proposal,
    const std::optional<PixelBox>& override_box)
{
    PartitionStep step;
    step.proposal = proposal;
    step.edited = override_box.has_value();
    step.box = override_box ? *override_box : proposal.box;
    if (!step.box.is_canonical())
        throw DomainError("blended box must be canonical");
    step.mask = soft_mask(p, step.box.cast<double>());
    step.state = blend(s, step.mask, room.type_id, p.registry.K());
    return step;
}

} // namespace

PartitionStep partition_step(const Partitioner& p, const PartitionState& s, const Placement& room,
    const std::optional<PixelBox>& override_box)
{
    return apply_box(p, s, room, regress_box(p, s, room.center, room.type_id), override_box);
}

PartitionSequence continue_sequence(const Partitioner& p, const PartitionState& s, const std::vector<Placement>& rooms,
    int first_step, const BoxEdit& edit)
{
    PartitionSequence seq;
    seq.states.push_back(s);
    for (std::size_t j = 0; j < rooms.size(); ++j) {
        const int index = first_step + static_cast<int>(j);
        try {
            const RegressedBox proposal = regress_box(p, seq.states.back(), rooms[j].center, rooms[j].type_id);
            const std::optional<PixelBox> replaced = edit ? edit(index, proposal.box) : std::nullopt;
            seq.steps.push_back(apply_box(p, seq.states.back(), rooms[j], proposal, replaced));
        } catch (const DomainError& e) {
            throw DomainError("step " + std::to_string(index) + ": " + e.detail());
        }
        seq.states.push_back(seq.steps.back().state);
    }
    return seq;
}

PartitionSequence generate_sequence(const Partitioner& p, const Boundary& b, const std::vector<Placement>& rooms,
    const BoxEdit& edit)
{
    if (rooms.empty())
        throw SequenceError("generate_sequence needs at least one room");
    return continue_sequence(p, initial_partition_state(b), rooms, 0, edit);
}

GanLoss wgan_gp_loss(const Critic& critic, const torch::Tensor& fake, const torch::Tensor& real, Rng& rng,
    double lambda_gp, bool create_graph)
{
    if (!fake.sizes().equals(real.sizes()))
        throw SequenceError("fake and real sequences differ in shape");
    if (fake.dim() < 2)
        throw SequenceError("sequences must carry a batch dimension");
    std::vector<std::int64_t> ushape(static_cast<std::size_t>(fake.dim()), 1);
    ushape[0] = fake.size(0);
    const torch::Tensor u = uniform_from(rng, ushape);
    const torch::Tensor mixed = (u * fake.detach() + (1 - u) * real.detach()).requires_grad_(true);
    const torch::Tensor score = critic(mixed);
    const torch::Tensor grad = torch::autograd::grad({score.sum()}, {mixed}, {}, true, create_graph)[0];
    const torch::Tensor gp = (grad.flatten(1).norm(2, 1) - 1).pow(2).mean();
    const torch::Tensor d_loss = critic(fake).mean() - critic(real).mean() + lambda_gp * gp;
    return {d_loss, gp};
}

GanLoss wgan_gp_loss(const Partitioner& p, const torch::Tensor& fake, const torch::Tensor& real, Rng& rng)
{
    DiscriminatorImpl& d = *p.disc.ptr();
    return wgan_gp_loss([&](const torch::Tensor& x) { return d.forward(x); }, fake, real, rng, p.cfg.lambda_gp);
}

torch::Tensor box_reg_loss(const torch::Tensor& pred, const torch::Tensor& gt)
{
    if (!pred.sizes().equals(gt.sizes()))
        throw SequenceError("predicted and ground-truth box lists differ");
    const torch::Tensor d = (pred - gt).abs();
    return torch::where(d < 1, 0.5 * d * d, d - 0.5).sum();
}

std::vector<MaskerTraceRow> prefit_masker(Masker& fm, const PartitionConfig& cfg, Rng& rng)
{
    std::vector<MaskerTraceRow> trace;
    torch::optim::Adam opt(fm->parameters(), torch::optim::AdamOptions(cfg.masker_lr));
    fm->train();
    for (int it = 0; it < cfg.masker_iterations; ++it) {
        std::vector<torch::Tensor> boxes;
        for (int i = 0; i < cfg.masker_batch; ++i)
            boxes.push_back(random_box(rng));
        torch::Tensor raster = box_raster(torch::stack(boxes));
        const torch::Tensor target = raster.select(1, 2).clone();
        // Hiding the indicator on half the samples forces the stack to read
        // the ramps, which carry the gradient with respect to the box.
        const torch::Tensor keep = (uniform_from(rng, {cfg.masker_batch, 1, 1}) < 0.5).to(torch::kFloat32);
        raster = torch::cat({raster.narrow(1, 0, 2), (raster.select(1, 2) * keep).unsqueeze(1)}, 1);
        const torch::Tensor loss = torch::binary_cross_entropy(fm->forward(raster), target);
        opt.zero_grad();
        loss.backward();
        opt.step();
        trace.push_back({it, loss.item<double>()});
    }
    fm->eval();
    return trace;
}

double masker_iou(const Partitioner& p, const Box<double>& box)
{
    const FloatRaster m = soft_mask(p, box);
    const torch::Tensor hard = box_raster(normalized_box(box).unsqueeze(0))[0][2];
    const FloatRaster truth = to_raster(hard);
    const double inter = ((m > 0.5f) && (truth > 0.5f)).count();
    const double uni = ((m > 0.5f) || (truth > 0.5f)).count();
    return uni == 0 ? 1.0 : inter / uni;
}

namespace {

// Ground-truth masks, boxes and codes per room of one layout.
struct PreparedLayout {
    torch::Tensor initial;
    std::vector<torch::Tensor> masks, boxes, codes;
};

PreparedLayout prepare(const Partitioner& p, const Layout& l)
{
    torch::NoGradGuard guard;
    PreparedLayout out{state_tensor(initial_partition_state(l.boundary)), {}, {}, {}};
    for (const Room& room : l.rooms) {
        const torch::Tensor box = normalized_box(room.box.cast<double>());
        out.boxes.push_back(box);
        out.masks.push_back(masker(p).forward(box_raster(box.unsqueeze(0)))[0]);
        out.codes.push_back(torch::full({}, type_code(room.type_id, l.registry.K())));
    }
    return out;
}

} // namespace

PartitionTraining train_partitioner(const std::vector<Layout>& corpus, const PartitionConfig& cfg, Rng& rng)
{
    if (corpus.empty())
        throw DataError("train_partitioner: empty corpus");
    const RoomTypeRegistry& reg = corpus.front().registry;
    for (const Layout& l : corpus) {
        if (l.registry != reg)
            throw RegistryError("corpus mixes registries (" + l.id + ")");
        if (l.N() < 1 || l.N() > cfg.n_max)
            throw DataError("layout " + l.id + " has " + std::to_string(l.N()) + " rooms; n_max is "
                + std::to_string(cfg.n_max));
    }
    const int K = reg.K();

    PartitionTraining result{make_partitioner(reg, cfg, rng), {}, {}};
    Partitioner& p = result.partitioner;
    result.masker_trace = prefit_masker(p.fm, cfg, rng);
    for (auto& param : p.fm->parameters())
        param.set_requires_grad(false);

    std::vector<PreparedLayout> prepared;
    for (const Layout& l : corpus)
        prepared.push_back(prepare(p, l));

    std::vector<std::size_t> pool;
    std::size_t cursor = 0;
    const auto next_layout = [&]() {
        if (cursor == pool.size()) {
            pool.resize(corpus.size());
            std::iota(pool.begin(), pool.end(), 0);
            std::shuffle(pool.begin(), pool.end(), rng);
            cursor = 0;
        }
        return pool[cursor++];
    };
    const auto room_order = [&](const Layout& l) {
        std::vector<int> order(static_cast<std::size_t>(l.N()));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        return order;
    };

    const int batch = std::max(1, cfg.batch);
    p.fb->train();
    p.disc->train();

    torch::optim::Adam opt_w(p.fb->parameters(), torch::optim::AdamOptions(cfg.warmup_lr));
    for (int it = 0; it < cfg.warmup_iterations; ++it) {
        std::vector<torch::Tensor> inputs, targets;
        for (int b = 0; b < batch; ++b) {
            const std::size_t li = next_layout();
            const Layout& l = corpus[li];
            const PreparedLayout& prep = prepared[li];
            torch::Tensor state = prep.initial;
            for (int j : room_order(l)) {
                const Room& room = l.rooms[static_cast<std::size_t>(j)];
                inputs.push_back(generator_input(state, room.center, room.type_id, K));
                targets.push_back(prep.boxes[j]);
                state = blend(state, prep.masks[j], prep.codes[j]);
            }
        }
        const torch::Tensor box_loss = box_reg_loss(p.fb->forward(torch::stack(inputs)), torch::stack(targets)) / batch;
        opt_w.zero_grad();
        (cfg.lambda_box * box_loss).backward();
        opt_w.step();
        const double value = box_loss.item<double>();
        if (!std::isfinite(value))
            throw NumericsError("partitioner box loss is not finite at warm-up iteration " + std::to_string(it));
        result.trace.push_back({it, false, 0.0, 0.0, 0.0, value, 0.0});
    }

    const auto adam = [&](const std::vector<torch::Tensor>& params, double lr) {
        return torch::optim::Adam(params, torch::optim::AdamOptions(lr).betas({0.5, 0.9}));
    };
    torch::optim::Adam opt_g = adam(p.fb->parameters(), cfg.lr);
    torch::optim::Adam opt_d = adam(p.disc->parameters(), cfg.critic_lr);
    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<torch::Tensor> fakes, reals;
        torch::Tensor box_loss = torch::zeros({});
        for (int b = 0; b < batch; ++b) {
            const std::size_t li = next_layout();
            const Layout& l = corpus[li];
            const PreparedLayout& prep = prepared[li];
            std::vector<torch::Tensor> gt_boxes, pred_boxes, fake_states, real_states;
            torch::Tensor s_fake = prep.initial, s_real = prep.initial;
            for (int j : room_order(l)) {
                const Room& room = l.rooms[static_cast<std::size_t>(j)];
                gt_boxes.push_back(prep.boxes[j]);
                s_real = blend(s_real, prep.masks[j], prep.codes[j]);
                real_states.push_back(s_real);
                const torch::Tensor box = p.fb->forward(generator_input(s_fake, room.center, room.type_id, K).unsqueeze(0));
                pred_boxes.push_back(box[0]);
                s_fake = blend(s_fake, p.fm->forward(box_raster(box))[0], prep.codes[j]);
                fake_states.push_back(s_fake);
            }
            box_loss = box_loss + box_reg_loss(torch::stack(pred_boxes), torch::stack(gt_boxes));
            fakes.push_back(pad_sequence(fake_states, cfg.n_max));
            reals.push_back(pad_sequence(real_states, cfg.n_max));
        }
        box_loss = box_loss / batch;
        const torch::Tensor fake = torch::stack(fakes), real = torch::stack(reals);

        GanLoss gan;
        for (int k = 0; k < std::max(1, cfg.n_critic); ++k) {
            gan = wgan_gp_loss(p, fake.detach(), real, rng);
            opt_d.zero_grad();
            gan.d_loss.backward();
            opt_d.step();
        }

        const torch::Tensor g_adv = -p.disc->forward(fake).mean();
        const torch::Tensor g_loss = g_adv + cfg.lambda_box * box_loss;
        opt_g.zero_grad();
        g_loss.backward();
        opt_g.step();

        double gap;
        {
            torch::NoGradGuard guard;
            gap = (p.disc->forward(real).mean() - p.disc->forward(fake.detach()).mean()).item<double>();
        }
        const PartitionTraceRow row{cfg.warmup_iterations + it, true, gan.d_loss.item<double>(), gan.gp.item<double>(),
            g_adv.item<double>(), box_loss.item<double>(), gap};
        if (!std::isfinite(row.d_loss) || !std::isfinite(row.gp) || !std::isfinite(row.box_loss))
            throw NumericsError("partitioner loss is not finite at iteration " + std::to_string(row.iter));
        result.trace.push_back(row);
    }
    p.fb->eval();
    p.disc->eval();
    return result;
}

namespace {

struct Bundle : torch::nn::Module {
    explicit Bundle(const Partitioner& p)
    {
        register_module("fb", p.fb.ptr());
        register_module("fm", p.fm.ptr());
        register_module("disc", p.disc.ptr());
    }
};

} // namespace

void save_partitioner(const std::filesystem::path& path, const Partitioner& p)
{
    const nlohmann::json header = {{"kind", "partitioner"}, {"K", p.registry.K()}, {"n_max", p.cfg.n_max},
        {"encoding", "type-code-(t+1)/K/1"}, {"registry_hash", std::to_string(p.registry.hash())}};
    save_checkpoint(path, Bundle(p), header);
}

Partitioner load_partitioner(const std::filesystem::path& path, const RoomTypeRegistry& registry)
{
    const nlohmann::json header = read_checkpoint_header(path);
    if (header.value("kind", "") != "partitioner")
        throw ParseError(path.string() + ": not a partitioner checkpoint");
    if (header.at("K").get<int>() != registry.K())
        throw RegistryError(path.string() + ": checkpoint K does not match the registry");
    if (header.at("registry_hash").get<std::string>() != std::to_string(registry.hash()))
        throw RegistryError(path.string() + ": checkpoint registry hash does not match");
    PartitionConfig cfg;
    cfg.n_max = header.at("n_max");
    Partitioner p{registry, cfg, BoxRegressor(registry.K()), Masker(), Discriminator(cfg.n_max)};
    Bundle bundle(p);
    load_checkpoint_weights(path, bundle);
    p.fb->eval();
    p.fm->eval();
    p.disc->eval();
    return p;
}

std::string state_hash(const PartitionState& s)
{
    std::uint64_t h = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(s.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.size()) * sizeof(float); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json trace_export(const PartitionSequence& seq)
{
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t j = 0; j < seq.steps.size(); ++j) {
        const PartitionStep& s = seq.steps[j];
        const Mask hard = (s.mask > 0.5f).cast<std::uint8_t>();
        steps.push_back({{"step", j}, {"box", {s.box.top, s.box.left, s.box.bottom, s.box.right}},
            {"edited", s.edited}, {"expanded", s.proposal.expanded}, {"mask_rle", rle_encode(hard)},
            {"state_hash", state_hash(s.state)}});
    }
    return steps;
}

} // namespace iplan::nn
