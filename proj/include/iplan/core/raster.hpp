#pragma once

#include "iplan/core/types.hpp"

namespace iplan {

inline constexpr int kStampSize = 9;

// Sets the 9x9 block centered at `center` to one, clipped at the canvas.
template <typename Derived>
void stamp_center(Eigen::ArrayBase<Derived>& grid, const Pixel& center)
{
    const int half = kStampSize / 2;
    const int r0 = std::max(0, center.row - half);
    const int c0 = std::max(0, center.col - half);
    const int r1 = std::min(static_cast<int>(grid.rows()), center.row + half + 1);
    const int c1 = std::min(static_cast<int>(grid.cols()), center.col + half + 1);
    if (r1 <= r0 || c1 <= c0)
        return;
    grid.derived().block(r0, c0, r1 - r0, c1 - c0).setConstant(1);
}

inline Mask stamped(Mask grid, const Pixel& center)
{
    stamp_center(grid, center);
    return grid;
}

inline bool inside_canvas(const Pixel& p, int rows = kResolution, int cols = kResolution)
{
    return p.row >= 0 && p.col >= 0 && p.row < rows && p.col < cols;
}

// Hard indicator of a box clipped to the canvas.
Mask box_mask(const PixelBox& box, int rows = kResolution, int cols = kResolution);

// Run-length encoding of a binary mask in row-major order. Runs alternate
// starting with a run of zeros (possibly empty).
std::vector<int> rle_encode(const Mask& m);
Mask rle_decode(const std::vector<int>& runs, int rows = kResolution, int cols = kResolution);

} // namespace iplan
