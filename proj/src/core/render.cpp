#include "iplan/core/render.hpp"

#include "iplan/core/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

namespace iplan {

namespace {

constexpr std::array<Rgb, 13> kPalette{{
    {238, 232, 170}, // living
    {144, 202, 249}, // master
    {255, 183, 77},  // kitchen
    {129, 199, 132}, // bathroom
    {240, 98, 146},  // dining
    {186, 104, 200}, // child
    {77, 182, 172},  // study
    {121, 134, 203}, // second
    {255, 138, 101}, // guest
    {174, 213, 129}, // balcony
    {161, 136, 127}, // entrance
    {144, 164, 174}, // storage
    {255, 241, 118}, // wall-in
}};

void fill(Image& img, const Mask& m, const Rgb& color)
{
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            if (m(r, c))
                for (int ch = 0; ch < 3; ++ch)
                    img.at(r, c, ch) = color[static_cast<std::size_t>(ch)];
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length)
{
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

} // namespace

Rgb room_color(int type_id)
{
    if (type_id < 0)
        return kFreeColor;
    const auto k = static_cast<std::size_t>(type_id);
    if (k < kPalette.size())
        return kPalette[k];
    // Deterministic fallback for registries larger than the palette.
    const auto h = static_cast<unsigned>(type_id) * 2654435761u;
    return {static_cast<std::uint8_t>(64 + (h >> 8) % 160), static_cast<std::uint8_t>(64 + (h >> 16) % 160),
        static_cast<std::uint8_t>(64 + (h >> 24) % 160)};
}

Image render_rooms(const Boundary& boundary, const std::vector<Room>& rooms)
{
    Image img(kResolution, kResolution, 3, 255);
    fill(img, boundary.interior, kFreeColor);
    for (const Room& room : rooms) {
        const Rgb color = room_color(room.type_id);
        const int r0 = std::clamp(room.box.top, 0, kResolution);
        const int r1 = std::clamp(room.box.bottom, 0, kResolution);
        const int c0 = std::clamp(room.box.left, 0, kResolution);
        const int c1 = std::clamp(room.box.right, 0, kResolution);
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    img.at(r, c, ch) = color[static_cast<std::size_t>(ch)];
    }
    fill(img, boundary.boundary, kBoundaryColor);
    fill(img, boundary.frontdoor, kFrontDoorColor);
    return img;
}

Image render_layout(const Layout& layout) { return render_rooms(layout.boundary, layout.rooms); }

Image to_grayscale(const Image& rgb)
{
    if (rgb.channels == 1)
        return rgb;
    Image gray(rgb.rows, rgb.cols, 1);
    for (int r = 0; r < rgb.rows; ++r)
        for (int c = 0; c < rgb.cols; ++c)
            gray.at(r, c) = static_cast<std::uint8_t>(
                (299 * rgb.at(r, c, 0) + 587 * rgb.at(r, c, 1) + 114 * rgb.at(r, c, 2) + 500) / 1000);
    return gray;
}

std::vector<std::uint8_t> encode_png(const Image& image)
{
    if (image.channels != 1 && image.channels != 3)
        throw ShapeError("png export supports 1 or 3 channels");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw Error("IoError", "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> out;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("IoError", "png encoding failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols), static_cast<png_uint_32>(image.rows), 8,
        image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
        PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < image.rows; ++r) {
        auto* row = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(r * image.cols * image.channels));
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::string& path, const Image& image)
{
    const auto bytes = encode_png(image);
    std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!f)
        throw Error("IoError", "cannot open " + path + " for writing");
    if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
        throw Error("IoError", "short write to " + path);
}

} // namespace iplan
