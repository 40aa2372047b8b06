#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace iplan {

inline constexpr int kResolution = 128;

template <typename Scalar>
using Raster = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Raster<std::uint8_t>;
using FloatRaster = Raster<float>;

inline Mask empty_mask(int rows = kResolution, int cols = kResolution)
{
    return Mask::Zero(rows, cols);
}

struct Pixel {
    int row = 0;
    int col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

std::ostream& operator<<(std::ostream& os, const Pixel& p);

// Axis-aligned box, half-open: rows [top, bottom), cols [left, right).
template <typename Scalar>
struct Box {
    Scalar top{};
    Scalar left{};
    Scalar bottom{};
    Scalar right{};

    Scalar height() const { return bottom - top; }
    Scalar width() const { return right - left; }
    Scalar area() const { return height() * width(); }

    bool is_canonical() const { return top < bottom && left < right; }
    bool contains(const Pixel& p) const
    {
        return Scalar(p.row) >= top && Scalar(p.row) < bottom && Scalar(p.col) >= left
            && Scalar(p.col) < right;
    }

    template <typename Other>
    Box<Other> cast() const
    {
        return {Other(top), Other(left), Other(bottom), Other(right)};
    }

    friend bool operator==(const Box&, const Box&) = default;
};

using PixelBox = Box<int>;

// Swap coordinates so that top < bottom and left < right (ties are left as is).
template <typename Scalar>
Box<Scalar> canonicalize(Box<Scalar> b)
{
    if (b.bottom < b.top)
        std::swap(b.top, b.bottom);
    if (b.right < b.left)
        std::swap(b.left, b.right);
    return b;
}

struct RoomTypeRegistry {
    std::vector<std::string> names;
    std::vector<int> max_counts;

    int K() const { return static_cast<int>(names.size()); }
    int n_c() const;
    int offset(int type_id) const;
    int id_of(const std::string& name) const;

    // Throws RegistryError when invariants are violated.
    void validate() const;
    // Stable FNV-1a hash over names and max_counts.
    std::uint64_t hash() const;

    friend bool operator==(const RoomTypeRegistry&, const RoomTypeRegistry&) = default;
};

// The thirteen RPLAN room categories (max counts are corpus-dependent).
RoomTypeRegistry rplan_registry();
// Small registry used by the synthetic corpus.
RoomTypeRegistry synthetic_registry();

struct Boundary {
    Mask boundary = empty_mask();
    Mask frontdoor = empty_mask();
    Mask interior = empty_mask();

    // Throws ValidationError when any mask invariant fails.
    void validate() const;
    // Bounding box of boundary ∪ interior pixels in pixel-edge coordinates.
    PixelBox bounding_box() const;

    friend bool operator==(const Boundary& a, const Boundary& b)
    {
        return (a.boundary == b.boundary).all() && (a.frontdoor == b.frontdoor).all()
            && (a.interior == b.interior).all();
    }
};

struct Room {
    int type_id = 0;
    Pixel center;
    PixelBox box;
    friend bool operator==(const Room&, const Room&) = default;
};

struct Layout {
    std::string id;
    RoomTypeRegistry registry;
    Boundary boundary;
    std::vector<Room> rooms;

    int N() const { return static_cast<int>(rooms.size()); }
    // Throws ValidationError (or RegistryError for bad type ids).
    void validate() const;

    friend bool operator==(const Layout&, const Layout&) = default;
};

struct TypeCount {
    std::vector<int> counts;

    int total() const;
    friend bool operator==(const TypeCount&, const TypeCount&) = default;
    friend auto operator<=>(const TypeCount& a, const TypeCount& b)
    {
        return a.counts <=> b.counts;
    }
};

std::ostream& operator<<(std::ostream& os, const TypeCount& q);

TypeCount type_count_of(const Layout& layout);
// Rooms expanded in registry order: type k repeated counts[k] times.
std::vector<int> expand_types(const TypeCount& q);

bool is_four_connected(const Mask& m);

} // namespace iplan
