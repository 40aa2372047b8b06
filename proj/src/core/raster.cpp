#include "iplan/core/raster.hpp"

#include "iplan/core/errors.hpp"

#include <algorithm>

namespace iplan {

Mask box_mask(const PixelBox& box, int rows, int cols)
{
    Mask m = Mask::Zero(rows, cols);
    const int r0 = std::clamp(box.top, 0, rows);
    const int r1 = std::clamp(box.bottom, 0, rows);
    const int c0 = std::clamp(box.left, 0, cols);
    const int c1 = std::clamp(box.right, 0, cols);
    if (r1 > r0 && c1 > c0)
        m.block(r0, c0, r1 - r0, c1 - c0).setOnes();
    return m;
}

std::vector<int> rle_encode(const Mask& m)
{
    std::vector<int> runs;
    std::uint8_t current = 0;
    int length = 0;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            const std::uint8_t v = m(r, c) ? 1 : 0;
            if (v != current) {
                runs.push_back(length);
                current = v;
                length = 0;
            }
            ++length;
        }
    runs.push_back(length);
    return runs;
}

Mask rle_decode(const std::vector<int>& runs, int rows, int cols)
{
    Mask m = Mask::Zero(rows, cols);
    const long total = static_cast<long>(rows) * cols;
    long pos = 0;
    std::uint8_t value = 0;
    for (int run : runs) {
        if (run < 0 || pos + run > total)
            throw ParseError("run-length data overflows the mask");
        for (int i = 0; i < run; ++i, ++pos)
            m(pos / cols, pos % cols) = value;
        value ^= 1;
    }
    if (pos != total)
        throw ParseError("run-length data covers " + std::to_string(pos) + " of "
            + std::to_string(total) + " pixels");
    return m;
}

} // namespace iplan
