#pragma once

#include "iplan/core/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace iplan {

// Interleaved 8-bit image, row-major.
struct Image {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int r, int c, int ch, std::uint8_t fill = 0)
        : rows(r), cols(c), channels(ch), pixels(static_cast<std::size_t>(r * c * ch), fill)
    {
    }

    std::uint8_t& at(int r, int c, int ch = 0) { return pixels[index(r, c, ch)]; }
    std::uint8_t at(int r, int c, int ch = 0) const { return pixels[index(r, c, ch)]; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int r, int c, int ch) const
    {
        return static_cast<std::size_t>((r * cols + c) * channels + ch);
    }
};

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kExteriorColor{255, 255, 255};
inline constexpr Rgb kFreeColor{230, 230, 230};
inline constexpr Rgb kBoundaryColor{0, 0, 0};
inline constexpr Rgb kFrontDoorColor{200, 40, 40};

Rgb room_color(int type_id);

// Flat fills per room type in list order, then the boundary stroke and front door.
Image render_layout(const Layout& layout);
Image render_rooms(const Boundary& boundary, const std::vector<Room>& rooms);

Image to_grayscale(const Image& rgb);

void write_png(const std::string& path, const Image& image);
std::vector<std::uint8_t> encode_png(const Image& image);

} // namespace iplan
