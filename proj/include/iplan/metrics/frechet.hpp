#pragma once

#include <Eigen/Core>

#include <string>

namespace iplan::metrics {

enum class FeatureKind { Image, Area, Type };

std::string to_string(FeatureKind kind);

// Gaussian summary of a set of feature vectors (one per row).
struct CorpusFeatures {
    FeatureKind kind = FeatureKind::Image;
    Eigen::MatrixXd vectors;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    int dim() const { return static_cast<int>(mean.size()); }

    // Unbiased covariance plus `shrinkage`·I.
    static CorpusFeatures from_vectors(FeatureKind kind, Eigen::MatrixXd vectors, double shrinkage = 1e-6);
    static CorpusFeatures from_moments(FeatureKind kind, Eigen::VectorXd mean, Eigen::MatrixXd cov);
};

// Principal square root of a symmetric PSD matrix; negative eigenvalues clipped.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), floored at zero.
double frechet_distance(const CorpusFeatures& a, const CorpusFeatures& b);

} // namespace iplan::metrics
