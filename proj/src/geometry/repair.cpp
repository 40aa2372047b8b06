#include "iplan/geometry/repair.hpp"

#include "iplan/core/errors.hpp"

#include <cmath>
#include <limits>

namespace iplan::geometry {

namespace {

// Row/col overlap profiles of a box with the pixel grid.
Eigen::VectorXd overlap_profile(double lo, double hi, int n)
{
    Eigen::VectorXd ov = Eigen::VectorXd::Zero(n);
    if (hi <= lo)
        return ov;
    const int first = std::max(0, static_cast<int>(std::floor(lo)));
    const int last = std::min(n - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int i = first; i <= last; ++i)
        ov[i] = cell_overlap(lo, hi, i);
    return ov;
}

// Pixel index whose overlap changes when the lower edge moves (inside side).
int lower_edge_cell(double lo) { return static_cast<int>(std::floor(lo)); }
// Pixel index whose overlap changes when the upper edge moves (inside side).
int upper_edge_cell(double hi) { return static_cast<int>(std::ceil(hi)) - 1; }

double dot(const std::vector<RealBox>& a, const std::vector<RealBox>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i].top * b[i].top + a[i].left * b[i].left + a[i].bottom * b[i].bottom
            + a[i].right * b[i].right;
    return s;
}

} // namespace

RepairProblem RepairProblem::from_boundary(const Boundary& b, const std::vector<PixelBox>& boxes)
{
    RepairProblem p;
    p.interior = b.interior;
    p.hull = b.bounding_box().cast<double>();
    for (const PixelBox& box : boxes)
        p.boxes.push_back(canonicalize(box).cast<double>());
    return p;
}

void RepairProblem::validate() const
{
    if (boxes.empty())
        throw DataError("repair problem needs at least one box");
    if ((interior != 0).count() == 0)
        throw DataError("repair problem has an empty interior");
    for (int r = 0; r < rows(); ++r)
        for (int c = 0; c < cols(); ++c)
            if (interior(r, c) && point_box_distance_sq(pixel_center<double>(r, c), hull) > 0.0)
                throw ValidationError("interior pixel outside the boundary hull");
}

Field outside_penalty_field(const RepairProblem& problem)
{
    const int rows = problem.rows();
    const int cols = problem.cols();
    Field field = Field::Zero(rows, cols);
    if (!problem.strict) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                field(r, c) = point_box_distance_sq(pixel_center<double>(r, c), problem.hull);
        return field;
    }
    std::vector<Pixel> inside;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (problem.interior(r, c))
                inside.push_back({r, c});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (problem.interior(r, c))
                continue;
            double best = std::numeric_limits<double>::infinity();
            const auto p = pixel_center<double>(r, c);
            for (const Pixel& q : inside) {
                const RealBox cell{double(q.row), double(q.col), double(q.row + 1), double(q.col + 1)};
                best = std::min(best, point_box_distance_sq(p, cell));
            }
            field(r, c) = best;
        }
    return field;
}

double coverage_loss(const Mask& interior, const std::vector<RealBox>& boxes, std::vector<RealBox>* grad)
{
    if (boxes.empty())
        throw DataError("coverage loss needs at least one box");
    const long count = (interior != 0).count();
    if (count == 0)
        throw DataError("coverage loss over an empty interior");
    if (grad)
        grad->assign(boxes.size(), RealBox{});
    const double inv = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (int r = 0; r < interior.rows(); ++r)
        for (int c = 0; c < interior.cols(); ++c) {
            if (!interior(r, c))
                continue;
            const auto p = pixel_center<double>(r, c);
            std::size_t best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < boxes.size(); ++i) {
                const double d2 = point_box_distance_sq(p, boxes[i]);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = i;
                }
            }
            sum += best_d2;
            if (grad && best_d2 > 0.0) {
                const RealBox& b = boxes[best];
                RealBox& g = (*grad)[best];
                if (b.top > p.row)
                    g.top += 2.0 * (b.top - p.row) * inv;
                if (p.row > b.bottom)
                    g.bottom -= 2.0 * (p.row - b.bottom) * inv;
                if (b.left > p.col)
                    g.left += 2.0 * (b.left - p.col) * inv;
                if (p.col > b.right)
                    g.right -= 2.0 * (p.col - b.right) * inv;
            }
        }
    return sum * inv;
}

double interior_loss(const Field& penalty, const std::vector<RealBox>& boxes, std::vector<RealBox>* grad)
{
    if (boxes.empty())
        throw DataError("interior loss needs at least one box");
    const int rows = static_cast<int>(penalty.rows());
    const int cols = static_cast<int>(penalty.cols());
    const Eigen::MatrixXd g = penalty.matrix();

    struct Partial {
        Eigen::VectorXd ov_r, ov_c;
    };
    std::vector<Partial> parts;
    parts.reserve(boxes.size());
    double num = 0.0;
    double den = 0.0;
    for (const RealBox& b : boxes) {
        Partial part{overlap_profile(b.top, b.bottom, rows), overlap_profile(b.left, b.right, cols)};
        num += part.ov_r.dot(g * part.ov_c);
        den += part.ov_r.sum() * part.ov_c.sum();
        parts.push_back(std::move(part));
    }
    if (den <= 0.0)
        throw DataError("interior loss: every box is degenerate");
    const double loss = num / den;
    if (!grad)
        return loss;

    grad->assign(boxes.size(), RealBox{});
    // dL = (dA - L dW) / W, with A the weighted penalty sum and W the total weight.
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const RealBox& b = boxes[i];
        const Partial& part = parts[i];
        RealBox& out = (*grad)[i];
        if (b.bottom <= b.top || b.right <= b.left)
            continue;
        const double width_sum = part.ov_c.sum();
        const double height_sum = part.ov_r.sum();
        auto row_term = [&](int cell) {
            if (cell < 0 || cell >= rows)
                return 0.0;
            const double dA = g.row(cell).dot(part.ov_c);
            return (dA - loss * width_sum) / den;
        };
        auto col_term = [&](int cell) {
            if (cell < 0 || cell >= cols)
                return 0.0;
            const double dA = g.col(cell).dot(part.ov_r);
            return (dA - loss * height_sum) / den;
        };
        out.top = -row_term(lower_edge_cell(b.top));
        out.bottom = row_term(upper_edge_cell(b.bottom));
        out.left = -col_term(lower_edge_cell(b.left));
        out.right = col_term(upper_edge_cell(b.right));
    }
    return loss;
}

double coverage_loss(const RepairProblem& problem) { return coverage_loss(problem.interior, problem.boxes); }

double interior_loss(const RepairProblem& problem)
{
    return interior_loss(outside_penalty_field(problem), problem.boxes);
}

LossTerms evaluate(const RepairProblem& problem, const std::vector<RealBox>& boxes, const Field& penalty,
    std::vector<RealBox>* grad)
{
    std::vector<RealBox> g_cov;
    std::vector<RealBox> g_int;
    LossTerms t;
    t.coverage = coverage_loss(problem.interior, boxes, grad ? &g_cov : nullptr);
    t.interior = interior_loss(penalty, boxes, grad ? &g_int : nullptr);
    t.total = problem.weights.coverage * t.coverage + problem.weights.interior * t.interior;
    if (grad) {
        grad->resize(boxes.size());
        const double wc = problem.weights.coverage;
        const double wi = problem.weights.interior;
        for (std::size_t i = 0; i < boxes.size(); ++i)
            (*grad)[i] = {wc * g_cov[i].top + wi * g_int[i].top, wc * g_cov[i].left + wi * g_int[i].left,
                wc * g_cov[i].bottom + wi * g_int[i].bottom, wc * g_cov[i].right + wi * g_int[i].right};
    }
    return t;
}

RealBox project_box(RealBox b, int rows, int cols, double min_size)
{
    b = canonicalize(b);
    auto fix_axis = [min_size](double& lo, double& hi, double extent) {
        lo = std::clamp(lo, 0.0, extent);
        hi = std::clamp(hi, 0.0, extent);
        if (hi - lo < min_size) {
            const double mid = std::clamp(0.5 * (lo + hi), 0.5 * min_size, extent - 0.5 * min_size);
            lo = mid - 0.5 * min_size;
            hi = mid + 0.5 * min_size;
        }
    };
    fix_axis(b.top, b.bottom, rows);
    fix_axis(b.left, b.right, cols);
    return b;
}

std::vector<PixelBox> RepairResult::rounded() const
{
    std::vector<PixelBox> out;
    out.reserve(boxes.size());
    for (const RealBox& b : boxes) {
        PixelBox p{static_cast<int>(std::lround(b.top)), static_cast<int>(std::lround(b.left)),
            static_cast<int>(std::lround(b.bottom)), static_cast<int>(std::lround(b.right))};
        if (p.bottom <= p.top)
            p.bottom = p.top + 1;
        if (p.right <= p.left)
            p.right = p.left + 1;
        out.push_back(p);
    }
    return out;
}

RepairResult repair(const RepairProblem& problem, const RepairConfig& cfg)
{
    problem.validate();
    for (const RealBox& b : problem.boxes)
        if (!std::isfinite(b.top) || !std::isfinite(b.left) || !std::isfinite(b.bottom) || !std::isfinite(b.right))
            throw NumericsError("repair input box has non-finite coordinates");
    const Field penalty = outside_penalty_field(problem);
    const int rows = problem.rows();
    const int cols = problem.cols();

    std::vector<RealBox> x;
    for (const RealBox& b : problem.boxes)
        x.push_back(project_box(b, rows, cols, cfg.min_size));

    std::vector<RealBox> grad;
    LossTerms current = evaluate(problem, x, penalty, &grad);
    auto check_finite = [](const LossTerms& t, int iter) {
        if (!std::isfinite(t.total))
            throw NumericsError("repair loss is not finite at iteration " + std::to_string(iter));
    };
    check_finite(current, 0);

    RepairResult result;
    result.initial = evaluate(problem, problem.boxes, penalty);
    check_finite(result.initial, 0);
    // Projection alone may already change the loss; keep whichever is better.
    if (current.total > result.initial.total) {
        x = problem.boxes;
        current = evaluate(problem, x, penalty, &grad);
    }
    result.trace.push_back({0, current.coverage, current.interior});

    double step = cfg.initial_step;
    std::vector<double> history{current.total};
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        if (dot(grad, grad) == 0.0)
            break;
        bool accepted = false;
        std::vector<RealBox> candidate(x.size());
        LossTerms next;
        while (step >= cfg.min_step) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                const RealBox& b = x[i];
                const RealBox& g = grad[i];
                candidate[i] = project_box({b.top - step * g.top, b.left - step * g.left,
                                               b.bottom - step * g.bottom, b.right - step * g.right},
                    rows, cols, cfg.min_size);
            }
            next = evaluate(problem, candidate, penalty);
            check_finite(next, iter);
            std::vector<RealBox> moved(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                moved[i] = {x[i].top - candidate[i].top, x[i].left - candidate[i].left,
                    x[i].bottom - candidate[i].bottom, x[i].right - candidate[i].right};
            const double predicted = dot(grad, moved);
            if (predicted > 0.0 && next.total <= current.total - cfg.armijo * predicted) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            break;
        x = candidate;
        current = evaluate(problem, x, penalty, &grad);
        step = std::min(step * 2.0, 1e4);
        result.iterations = iter;
        result.trace.push_back({iter, current.coverage, current.interior});
        history.push_back(current.total);
        const auto n = history.size();
        if (n > static_cast<std::size_t>(cfg.window)
            && history[n - 1 - static_cast<std::size_t>(cfg.window)] - history[n - 1] < cfg.tol)
            break;
    }
    result.boxes = (result.iterations == 0) ? problem.boxes : x;
    result.final = evaluate(problem, result.boxes, penalty);
    return result;
}

} // namespace iplan::geometry
