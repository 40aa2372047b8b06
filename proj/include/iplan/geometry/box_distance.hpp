#pragma once

#include "iplan/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace iplan::geometry {

template <typename Scalar>
struct Point2 {
    Scalar row{};
    Scalar col{};
};

// Per-axis clamp offsets of a point from a box; both zero iff the point lies in
// the closed box.
template <typename Scalar>
Scalar axis_offset(Scalar x, Scalar lo, Scalar hi)
{
    return std::max({lo - x, Scalar(0), x - hi});
}

template <typename Scalar>
Scalar point_box_distance_sq(const Point2<Scalar>& p, const Box<Scalar>& box)
{
    const Scalar dy = axis_offset(p.row, box.top, box.bottom);
    const Scalar dx = axis_offset(p.col, box.left, box.right);
    return dy * dy + dx * dx;
}

// Zero inside the box, otherwise the Euclidean distance to its boundary.
template <typename Scalar>
Scalar point_box_distance(const Point2<Scalar>& p, const Box<Scalar>& box)
{
    using std::sqrt;
    return sqrt(point_box_distance_sq(p, box));
}

// Pixel (r, c) is evaluated at its center (r + 0.5, c + 0.5), which makes
// half-open integer boxes and continuous boxes agree on membership.
template <typename Scalar>
Point2<Scalar> pixel_center(int row, int col)
{
    return {Scalar(row) + Scalar(0.5), Scalar(col) + Scalar(0.5)};
}

// Length of [lo, hi) ∩ [cell, cell + 1).
template <typename Scalar>
Scalar cell_overlap(Scalar lo, Scalar hi, int cell)
{
    const Scalar a = std::max(lo, Scalar(cell));
    const Scalar b = std::min(hi, Scalar(cell + 1));
    return std::max(b - a, Scalar(0));
}

} // namespace iplan::geometry
