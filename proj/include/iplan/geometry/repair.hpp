#pragma once

#include "iplan/core/types.hpp"
#include "iplan/geometry/box_distance.hpp"

#include <vector>

namespace iplan::geometry {

using RealBox = Box<double>;
using Field = Raster<double>;

struct RepairWeights {
    double coverage = 1.0;
    double interior = 1.0;
};

// Boxes to be adjusted against a boundary. `hull` is the bounding box of the
// boundary; `interior` may be any size (the full pipeline uses 128x128).
struct RepairProblem {
    Mask interior;
    RealBox hull;
    std::vector<RealBox> boxes;
    RepairWeights weights;
    // Penalize distance to the interior mask instead of the hull.
    bool strict = false;

    int rows() const { return static_cast<int>(interior.rows()); }
    int cols() const { return static_cast<int>(interior.cols()); }

    static RepairProblem from_boundary(const Boundary& b, const std::vector<PixelBox>& boxes);
    void validate() const;
};

struct LossTerms {
    double coverage = 0.0;
    double interior = 0.0;
    double total = 0.0;
};

// Squared distance of every pixel center to the hull (or, in strict mode, to
// the union of interior pixels).
Field outside_penalty_field(const RepairProblem& problem);

// Mean over interior pixels of the squared distance to the nearest box.
double coverage_loss(const Mask& interior, const std::vector<RealBox>& boxes,
    std::vector<RealBox>* grad = nullptr);

// Area-weighted mean of the outside penalty over the pixels each box covers.
// At integer box coordinates the weights are exactly the half-open pixel
// membership; in between they are the fractional pixel overlap, which keeps the
// loss continuous in the box corners.
double interior_loss(const Field& penalty, const std::vector<RealBox>& boxes,
    std::vector<RealBox>* grad = nullptr);

double coverage_loss(const RepairProblem& problem);
double interior_loss(const RepairProblem& problem);

LossTerms evaluate(const RepairProblem& problem, const std::vector<RealBox>& boxes,
    const Field& penalty, std::vector<RealBox>* grad = nullptr);

struct RepairConfig {
    int max_iters = 500;
    double tol = 1e-6;
    int window = 10;
    double initial_step = 10.0;
    double min_step = 1e-6;
    double armijo = 1e-4;
    double min_size = 1.0;
};

struct TraceRow {
    int iter = 0;
    double coverage = 0.0;
    double interior = 0.0;
};

struct RepairResult {
    std::vector<RealBox> boxes;
    std::vector<TraceRow> trace;
    LossTerms initial;
    LossTerms final;
    int iterations = 0;

    std::vector<PixelBox> rounded() const;
};

// Keeps boxes inside the canvas with at least `min_size` extent per axis.
RealBox project_box(RealBox b, int rows, int cols, double min_size);

// Projected gradient descent with backtracking; never increases the total loss.
RepairResult repair(const RepairProblem& problem, const RepairConfig& cfg = {});

} // namespace iplan::geometry
