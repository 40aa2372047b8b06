#pragma once

#include "iplan/core/render.hpp"
#include "iplan/core/types.hpp"
#include "iplan/metrics/frechet.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace iplan::metrics {

// Entry k: mean box area over rooms of type k (0 when absent).
Eigen::VectorXd area_vector(const Layout& layout);
// Entry k: number of rooms of type k.
Eigen::VectorXd type_vector(const Layout& layout);

struct ImageExtractor {
    std::string id;
    std::function<Eigen::VectorXd(const Image&)> extract;
};

// Grayscale, average-pooled to cells×cells, scaled to [0, 1].
ImageExtractor pooled_gray_extractor(int cells = 16);

double fid_images(const std::vector<Image>& gen, const std::vector<Image>& real, const ImageExtractor& extractor);
double fid_img(const std::vector<Layout>& gen, const std::vector<Layout>& real,
    const ImageExtractor& extractor = pooled_gray_extractor());
double fid_area(const std::vector<Layout>& gen, const std::vector<Layout>& real);
double fid_type(const std::vector<Layout>& gen, const std::vector<Layout>& real);

struct EvaluationReport {
    double fid_img = 0.0;
    double fid_area = 0.0;
    double fid_type = 0.0;
    int n_gen = 0;
    int n_real = 0;
    std::string extractor_id;

    nlohmann::json to_json() const;
};

EvaluationReport evaluate(const std::vector<Layout>& gen, const std::vector<Layout>& real,
    const ImageExtractor& extractor = pooled_gray_extractor());

} // namespace iplan::metrics
