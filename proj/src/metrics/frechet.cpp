#include "iplan/metrics/frechet.hpp"

#include "iplan/core/errors.hpp"

#include <Eigen/Eigenvalues>

namespace iplan::metrics {

std::string to_string(FeatureKind kind)
{
    switch (kind) {
    case FeatureKind::Image: return "img";
    case FeatureKind::Area: return "area";
    case FeatureKind::Type: return "type";
    }
    return "unknown";
}

CorpusFeatures CorpusFeatures::from_vectors(FeatureKind kind, Eigen::MatrixXd vectors, double shrinkage)
{
    if (vectors.rows() == 0)
        throw DataError("cannot summarize an empty feature set");
    CorpusFeatures f;
    f.kind = kind;
    f.mean = vectors.colwise().mean().transpose();
    const Eigen::MatrixXd centered = vectors.rowwise() - f.mean.transpose();
    const auto n = static_cast<double>(vectors.rows());
    f.cov = Eigen::MatrixXd::Zero(vectors.cols(), vectors.cols());
    if (vectors.rows() > 1)
        f.cov = centered.transpose() * centered / (n - 1.0);
    f.cov.diagonal().array() += shrinkage;
    f.vectors = std::move(vectors);
    return f;
}

CorpusFeatures CorpusFeatures::from_moments(FeatureKind kind, Eigen::VectorXd mean, Eigen::MatrixXd cov)
{
    if (cov.rows() != mean.size() || cov.cols() != mean.size())
        throw ShapeError("covariance shape does not match mean");
    CorpusFeatures f;
    f.kind = kind;
    f.mean = std::move(mean);
    f.cov = std::move(cov);
    return f;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m)
{
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

double frechet_distance(const CorpusFeatures& a, const CorpusFeatures& b)
{
    if (a.dim() != b.dim())
        throw ShapeError("feature dimensions differ: " + std::to_string(a.dim()) + " vs "
            + std::to_string(b.dim()));
    const double mean_term = (a.mean - b.mean).squaredNorm();
    // Tr((S_a S_b)^{1/2}) = Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}), which stays symmetric.
    const Eigen::MatrixXd root_a = sqrtm_psd(a.cov);
    const Eigen::MatrixXd inner = root_a * b.cov * root_a;
    const Eigen::MatrixXd sym = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    return std::max(d, 0.0);
}

} // namespace iplan::metrics
