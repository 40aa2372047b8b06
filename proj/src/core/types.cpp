#include "iplan/core/types.hpp"

#include "iplan/core/errors.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace iplan {

std::ostream& operator<<(std::ostream& os, const Pixel& p)
{
    return os << '(' << p.row << ',' << p.col << ')';
}

std::ostream& operator<<(std::ostream& os, const TypeCount& q)
{
    os << '[';
    for (std::size_t k = 0; k < q.counts.size(); ++k)
        os << (k ? "," : "") << q.counts[k];
    return os << ']';
}

int RoomTypeRegistry::n_c() const
{
    return std::accumulate(max_counts.begin(), max_counts.end(), 0);
}

int RoomTypeRegistry::offset(int type_id) const
{
    return std::accumulate(max_counts.begin(), max_counts.begin() + type_id, 0);
}

int RoomTypeRegistry::id_of(const std::string& name) const
{
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        throw RegistryError("unknown room type '" + name + "'");
    return static_cast<int>(it - names.begin());
}

void RoomTypeRegistry::validate() const
{
    if (names.empty())
        throw RegistryError("registry must hold at least one type");
    if (names.size() != max_counts.size())
        throw RegistryError("names and max_counts differ in length");
    if (std::set<std::string>(names.begin(), names.end()).size() != names.size())
        throw RegistryError("duplicate room type name");
    for (std::size_t k = 0; k < max_counts.size(); ++k)
        if (max_counts[k] < 1)
            throw RegistryError("max_count of '" + names[k] + "' must be >= 1");
}

std::uint64_t RoomTypeRegistry::hash() const
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (std::size_t k = 0; k < names.size(); ++k) {
        for (char c : names[k])
            mix(static_cast<unsigned char>(c));
        mix(0);
        for (int shift = 0; shift < 32; shift += 8)
            mix(static_cast<unsigned char>((max_counts[k] >> shift) & 0xff));
    }
    return h;
}

RoomTypeRegistry rplan_registry()
{
    return {{"LivingRoom", "MasterRoom", "Kitchen", "Bathroom", "DiningRoom", "ChildRoom",
                "StudyRoom", "SecondRoom", "GuestRoom", "Balcony", "Entrance", "Storage",
                "Wall-in"},
        std::vector<int>(13, 1)};
}

RoomTypeRegistry synthetic_registry()
{
    return {{"LivingRoom", "MasterRoom", "Kitchen", "Bathroom", "SecondRoom", "Balcony"},
        {1, 1, 1, 2, 2, 1}};
}

bool is_four_connected(const Mask& m)
{
    const int rows = static_cast<int>(m.rows());
    const int cols = static_cast<int>(m.cols());
    const auto total = static_cast<long>((m != 0).count());
    if (total == 0)
        return true;
    Mask seen = Mask::Zero(rows, cols);
    std::vector<Pixel> stack;
    for (int r = 0; r < rows && stack.empty(); ++r)
        for (int c = 0; c < cols; ++c)
            if (m(r, c)) {
                stack.push_back({r, c});
                seen(r, c) = 1;
                break;
            }
    long visited = 0;
    while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        ++visited;
        const Pixel nbrs[4] = {{p.row - 1, p.col}, {p.row + 1, p.col}, {p.row, p.col - 1},
            {p.row, p.col + 1}};
        for (const Pixel& q : nbrs) {
            if (q.row < 0 || q.col < 0 || q.row >= rows || q.col >= cols)
                continue;
            if (m(q.row, q.col) && !seen(q.row, q.col)) {
                seen(q.row, q.col) = 1;
                stack.push_back(q);
            }
        }
    }
    return visited == total;
}

void Boundary::validate() const
{
    for (const Mask* m : {&boundary, &frontdoor, &interior}) {
        if (m->rows() != kResolution || m->cols() != kResolution)
            throw ValidationError("boundary masks must be 128x128");
        if (((*m != 0) && (*m != 1)).any())
            throw ValidationError("boundary masks must be {0,1}-valued");
    }
    if (((interior != 0) && (boundary != 0)).any())
        throw ValidationError("interior and boundary masks overlap");
    if (((frontdoor != 0) && (boundary == 0) && (interior == 0)).any())
        throw ValidationError("front door lies outside boundary and interior");
    if ((interior != 0).count() == 0)
        throw ValidationError("interior is empty");
    if (!is_four_connected(interior))
        throw ValidationError("interior is not 4-connected");
}

PixelBox Boundary::bounding_box() const
{
    PixelBox b{kResolution, kResolution, 0, 0};
    for (int r = 0; r < kResolution; ++r)
        for (int c = 0; c < kResolution; ++c)
            if (boundary(r, c) || interior(r, c)) {
                b.top = std::min(b.top, r);
                b.left = std::min(b.left, c);
                b.bottom = std::max(b.bottom, r + 1);
                b.right = std::max(b.right, c + 1);
            }
    if (b.top >= b.bottom)
        return {0, 0, 0, 0};
    return b;
}

void Layout::validate() const
{
    registry.validate();
    boundary.validate();
    if (rooms.empty())
        throw ValidationError("layout '" + id + "' has no rooms");
    for (std::size_t j = 0; j < rooms.size(); ++j) {
        const Room& room = rooms[j];
        std::ostringstream where;
        where << "layout '" << id << "' room " << j;
        if (room.type_id < 0 || room.type_id >= registry.K())
            throw RegistryError(where.str() + ": type id out of range");
        const PixelBox& b = room.box;
        if (!(0 <= b.top && b.top < b.bottom && b.bottom <= kResolution && 0 <= b.left
                && b.left < b.right && b.right <= kResolution))
            throw ValidationError(where.str() + ": box outside canvas or degenerate");
        if (!b.contains(room.center))
            throw ValidationError(where.str() + ": center outside its box");
    }
}

int TypeCount::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

TypeCount type_count_of(const Layout& layout)
{
    TypeCount q{std::vector<int>(static_cast<std::size_t>(layout.registry.K()), 0)};
    for (const Room& room : layout.rooms)
        ++q.counts.at(static_cast<std::size_t>(room.type_id));
    return q;
}

std::vector<int> expand_types(const TypeCount& q)
{
    std::vector<int> types;
    for (std::size_t k = 0; k < q.counts.size(); ++k)
        types.insert(types.end(), static_cast<std::size_t>(q.counts[k]), static_cast<int>(k));
    return types;
}

} // namespace iplan
