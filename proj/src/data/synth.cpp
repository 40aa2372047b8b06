#include "iplan/data/synth.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/raster.hpp"

#include <algorithm>
#include <numeric>

namespace iplan::data {

namespace {

enum Type { kLiving = 0, kMaster = 1, kKitchen = 2, kBathroom = 3, kSecond = 4, kBalcony = 5 };

bool split_leaf(const PixelBox& leaf, int min_side, Rng& rng, PixelBox& a, PixelBox& b)
{
    const bool vertical = leaf.width() > leaf.height() || (leaf.width() == leaf.height() && uniform_int(rng, 0, 1));
    const int extent = vertical ? leaf.width() : leaf.height();
    if (extent < 2 * min_side)
        return false;
    const int lo = std::max(min_side, static_cast<int>(0.3 * extent));
    const int hi = std::min(extent - min_side, static_cast<int>(0.7 * extent));
    if (hi < lo)
        return false;
    const int cut = uniform_int(rng, lo, hi);
    a = leaf;
    b = leaf;
    if (vertical) {
        a.right = leaf.left + cut;
        b.left = a.right;
    } else {
        a.bottom = leaf.top + cut;
        b.top = a.bottom;
    }
    return true;
}

bool touches_corner(const PixelBox& leaf, const PixelBox& hull)
{
    const bool top = leaf.top == hull.top;
    const bool bottom = leaf.bottom == hull.bottom;
    const bool left = leaf.left == hull.left;
    const bool right = leaf.right == hull.right;
    // Leaves spanning a full side would shrink the hull rather than notch it.
    if ((top && bottom) || (left && right))
        return false;
    return (top || bottom) && (left || right);
}

void place_door(Boundary& b, int width, Rng& rng)
{
    struct Run {
        int fixed, start, length;
        bool horizontal;
    };
    std::vector<Run> runs;
    const Mask& in = b.interior;
    const Mask& ring = b.boundary;
    auto scan = [&](bool horizontal, int inward) {
        for (int u = 1; u + 1 < kResolution; ++u) {
            int start = -1;
            for (int v = 0; v <= kResolution; ++v) {
                bool ok = false;
                if (v < kResolution) {
                    const int r = horizontal ? u : v;
                    const int c = horizontal ? v : u;
                    const int ir = horizontal ? u + inward : v;
                    const int ic = horizontal ? v : u + inward;
                    ok = ring(r, c) && in(ir, ic);
                }
                if (ok && start < 0)
                    start = v;
                if (!ok && start >= 0) {
                    if (v - start >= width + 2)
                        runs.push_back({u, start, v - start, horizontal});
                    start = -1;
                }
            }
        }
    };
    scan(true, -1);
    scan(true, +1);
    scan(false, -1);
    scan(false, +1);
    if (runs.empty())
        return;
    const Run& run = runs[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(runs.size()) - 1))];
    const int offset = run.start + uniform_int(rng, 1, run.length - width - 1);
    for (int i = 0; i < width; ++i) {
        if (run.horizontal)
            b.frontdoor(run.fixed, offset + i) = 1;
        else
            b.frontdoor(offset + i, run.fixed) = 1;
    }
}

std::vector<int> assign_types(const std::vector<PixelBox>& boxes, Rng& rng)
{
    const int n = static_cast<int>(boxes.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
        [&](int a, int b) { return boxes[static_cast<std::size_t>(a)].area() > boxes[static_cast<std::size_t>(b)].area(); });
    std::vector<int> types(static_cast<std::size_t>(n), -1);
    types[static_cast<std::size_t>(order.front())] = kLiving;
    int baths = n >= 5 ? 2 : (n >= 3 ? 1 : 0);
    for (int i = 0; i < baths; ++i)
        types[static_cast<std::size_t>(order[static_cast<std::size_t>(n - 1 - i)])] = kBathroom;
    std::vector<int> pool{kMaster, kKitchen, kSecond, kSecond, kBalcony};
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t next = 0;
    for (int& t : types)
        if (t < 0)
            t = pool.at(next++);
    return types;
}

} // namespace

int count_corners(const Mask& interior)
{
    const int rows = static_cast<int>(interior.rows());
    const int cols = static_cast<int>(interior.cols());
    auto at = [&](int r, int c) { return (r >= 0 && c >= 0 && r < rows && c < cols && interior(r, c)) ? 1 : 0; };
    int corners = 0;
    for (int r = -1; r < rows; ++r)
        for (int c = -1; c < cols; ++c) {
            const int a = at(r, c), b = at(r, c + 1), d = at(r + 1, c), e = at(r + 1, c + 1);
            const int sum = a + b + d + e;
            if (sum == 1 || sum == 3)
                ++corners;
            else if (sum == 2 && a == e)
                return -1;
        }
    return corners;
}

Mask boundary_ring(const Mask& interior)
{
    const int rows = static_cast<int>(interior.rows());
    const int cols = static_cast<int>(interior.cols());
    Mask ring = Mask::Zero(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (interior(r, c))
                continue;
            for (int dr = -1; dr <= 1 && !ring(r, c); ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr >= 0 && cc >= 0 && rr < rows && cc < cols && interior(rr, cc)) {
                        ring(r, c) = 1;
                        break;
                    }
                }
        }
    return ring;
}

Layout synth_layout(const SynthConfig& cfg, Rng& rng, std::string id)
{
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const int height = uniform_int(rng, cfg.min_extent, cfg.max_extent);
        const int width = uniform_int(rng, cfg.min_extent, cfg.max_extent);
        const int top = uniform_int(rng, 2, kResolution - 2 - height);
        const int left = uniform_int(rng, 2, kResolution - 2 - width);
        const PixelBox hull{top, left, top + height, left + width};

        const int rooms = uniform_int(rng, cfg.min_rooms, cfg.max_rooms);
        const int max_notches = std::max(0, (cfg.max_corners - 4) / 2);
        const int notches = uniform_int(rng, 0, std::min(3, max_notches));

        std::vector<PixelBox> leaves{hull};
        bool ok = true;
        while (static_cast<int>(leaves.size()) < rooms + notches && ok) {
            auto largest = std::max_element(leaves.begin(), leaves.end(),
                [](const PixelBox& a, const PixelBox& b) { return a.area() < b.area(); });
            PixelBox a, b;
            ok = split_leaf(*largest, cfg.min_side, rng, a, b);
            if (ok) {
                *largest = a;
                leaves.push_back(b);
            }
        }
        if (!ok)
            continue;

        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < leaves.size(); ++i)
            if (touches_corner(leaves[i], hull))
                candidates.push_back(i);
        if (static_cast<int>(candidates.size()) < notches)
            continue;
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(static_cast<std::size_t>(notches));
        std::vector<PixelBox> kept;
        for (std::size_t i = 0; i < leaves.size(); ++i)
            if (std::find(candidates.begin(), candidates.end(), i) == candidates.end())
                kept.push_back(leaves[i]);

        Boundary boundary;
        for (const PixelBox& box : kept)
            boundary.interior.block(box.top, box.left, box.height(), box.width()).setOnes();
        const int corners = count_corners(boundary.interior);
        if (corners < cfg.min_corners || corners > cfg.max_corners || !is_four_connected(boundary.interior))
            continue;
        boundary.boundary = boundary_ring(boundary.interior);
        place_door(boundary, cfg.door_width, rng);

        std::sort(kept.begin(), kept.end(),
            [](const PixelBox& a, const PixelBox& b) { return std::tie(a.top, a.left) < std::tie(b.top, b.left); });
        const std::vector<int> types = assign_types(kept, rng);

        Layout layout;
        layout.id = std::move(id);
        layout.registry = synthetic_registry();
        layout.boundary = std::move(boundary);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            const PixelBox& box = kept[i];
            layout.rooms.push_back(
                {types[i], {(box.top + box.bottom) / 2, (box.left + box.right) / 2}, box});
        }
        layout.validate();
        return layout;
    }
    throw DataError("synthetic generator failed to produce a valid layout");
}

std::vector<Layout> synth_corpus(int n, const SynthConfig& cfg, Rng& rng)
{
    if (n < 1)
        throw DataError("synthetic corpus size must be >= 1");
    std::vector<Layout> corpus;
    corpus.reserve(static_cast<std::size_t>(n));
    const int digits = static_cast<int>(std::to_string(n - 1).size());
    for (int i = 0; i < n; ++i) {
        std::string index = std::to_string(i);
        index.insert(0, static_cast<std::size_t>(std::max(0, std::max(digits, 5) - static_cast<int>(index.size()))), '0');
        corpus.push_back(synth_layout(cfg, rng, cfg.id_prefix + "-" + index));
    }
    return corpus;
}

} // namespace iplan::data
