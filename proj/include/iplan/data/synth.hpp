#pragma once

#include "iplan/core/rng.hpp"
#include "iplan/core/types.hpp"

#include <vector>

namespace iplan::data {

struct SynthConfig {
    int min_rooms = 2;
    int max_rooms = 6;
    int min_corners = 4;
    int max_corners = 10;
    int min_extent = 64;
    int max_extent = 112;
    int min_side = 14;
    int door_width = 8;
    std::string id_prefix = "synth";
};

// Rectilinear footprints sliced by recursive guillotine cuts. Rooms tile the
// interior exactly; the largest is the living room and bathrooms are the
// smallest rooms.
std::vector<Layout> synth_corpus(int n, const SynthConfig& cfg, Rng& rng);
Layout synth_layout(const SynthConfig& cfg, Rng& rng, std::string id);

// Number of polygon vertices of a rectilinear mask (counted on 2x2 windows);
// returns -1 when two regions touch only diagonally.
int count_corners(const Mask& interior);

// One-pixel ring of exterior pixels 8-adjacent to the interior.
Mask boundary_ring(const Mask& interior);

} // namespace iplan::data
