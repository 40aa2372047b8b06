#pragma once

#include "iplan/core/errors.hpp"
#include "iplan/core/rng.hpp"
#include "iplan/service/session.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

namespace iplan::testing {

// Untrained networks in eval mode; enough to drive the session machinery.
inline std::shared_ptr<const service::Models> random_models(std::uint64_t seed, RoomTypeRegistry reg = synthetic_registry())
{
    Rng rng(seed);
    torch::manual_seed(seed);
    auto m = std::make_shared<service::Models>();
    m->registry = reg;
    m->types = nn::TypeSampler{reg, nn::Bcvae(reg.n_c())};
    m->types->net->eval();
    m->locator = nn::RoomLocator{reg, nn::LocatorNet(reg.K(), 0.25), {}};
    m->locator->net->eval();
    m->partitioner = nn::make_partitioner(reg, {}, rng);
    m->repair.max_iters = 100;
    return m;
}

inline Pixel random_interior_pixel(const Boundary& b, Rng& rng)
{
    for (;;) {
        const Pixel p{uniform_int(rng, 0, kResolution - 1), uniform_int(rng, 0, kResolution - 1)};
        if (b.interior(p.row, p.col))
            return p;
    }
}

// Applies up to `ops` random steps and edits, most of them valid for the
// current phase. Rejected calls are skipped. Returns the number that succeeded.
inline int run_random_script(service::Session& s, Rng& rng, int ops)
{
    using service::EditOp;
    using service::Phase;
    int applied = 0;
    for (int i = 0; i < ops && s.phase() != Phase::Done; ++i) {
        const int N = static_cast<int>(s.types().size());
        const double u = uniform_real(rng);
        try {
            if (u < 0.35) {
                s.step();
            } else if (u < 0.65) {
                s.edit({});
            } else if (u < 0.70) {
                s.edit({EditOp::Kind::Reject});
            } else if (u < 0.78) {
                EditOp op{EditOp::Kind::MoveCenter};
                op.index = uniform_int(rng, 0, std::max(N, 1));
                if (s.phase() == Phase::Partition)
                    op.index = uniform_int(rng, static_cast<int>(s.boxes().size()), N - 1);
                op.center = random_interior_pixel(s.spec().boundary, rng);
                s.edit(op);
            } else if (u < 0.85) {
                EditOp op{EditOp::Kind::SetBox};
                op.index = -1;
                const int top = uniform_int(rng, 0, 100), left = uniform_int(rng, 0, 100);
                op.box = {top, left, top + uniform_int(rng, 4, 27), left + uniform_int(rng, 4, 27)};
                s.edit(op);
            } else if (u < 0.91) {
                EditOp op{EditOp::Kind::ReorderRemaining};
                const int first = static_cast<int>(s.phase() == Phase::Partition ? s.boxes().size() : s.centers().size());
                op.order.resize(static_cast<std::size_t>(std::max(N - first, 0)));
                std::iota(op.order.begin(), op.order.end(), first);
                std::shuffle(op.order.begin(), op.order.end(), rng);
                s.edit(op);
            } else if (u < 0.96) {
                EditOp op{EditOp::Kind::RollbackTo};
                op.step = uniform_int(rng, 0, s.commits());
                s.edit(op);
            } else {
                EditOp op{EditOp::Kind::SetTypes};
                const int n = uniform_int(rng, 1, 4);
                for (int k = 0; k < n; ++k)
                    op.types.push_back(uniform_int(rng, 0, s.models().registry.K() - 1));
                s.edit(op);
            }
            ++applied;
        } catch (const Error&) {
        }
    }
    return applied;
}

} // namespace iplan::testing
