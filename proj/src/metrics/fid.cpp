#include "iplan/metrics/fid.hpp"

#include "iplan/core/errors.hpp"

namespace iplan::metrics {

namespace {

void require_nonempty(const std::vector<Layout>& gen, const std::vector<Layout>& real)
{
    if (gen.empty() || real.empty())
        throw DataError("FID needs non-empty generated and real corpora");
}

template <typename Fn>
Eigen::MatrixXd stack(const std::vector<Layout>& corpus, Fn&& fn)
{
    Eigen::MatrixXd rows;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Eigen::VectorXd v = fn(corpus[i]);
        if (i == 0)
            rows.resize(static_cast<Eigen::Index>(corpus.size()), v.size());
        else if (v.size() != rows.cols())
            throw ShapeError("feature length differs across corpus items");
        rows.row(static_cast<Eigen::Index>(i)) = v.transpose();
    }
    return rows;
}

} // namespace

Eigen::VectorXd area_vector(const Layout& layout)
{
    const int K = layout.registry.K();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(K);
    for (const Room& room : layout.rooms) {
        sum[room.type_id] += static_cast<double>(room.box.area());
        count[room.type_id] += 1.0;
    }
    return (count.array() > 0.0).select(sum.array() / count.array().max(1.0), 0.0).matrix();
}

Eigen::VectorXd type_vector(const Layout& layout)
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(layout.registry.K());
    for (const Room& room : layout.rooms)
        v[room.type_id] += 1.0;
    return v;
}

ImageExtractor pooled_gray_extractor(int cells)
{
    return {"pooled-gray-" + std::to_string(cells) + "x" + std::to_string(cells), [cells](const Image& img) {
                const Image gray = to_grayscale(img);
                if (gray.rows % cells != 0 || gray.cols % cells != 0)
                    throw ShapeError("image size not divisible by pooling grid");
                const int bh = gray.rows / cells;
                const int bw = gray.cols / cells;
                Eigen::VectorXd f = Eigen::VectorXd::Zero(cells * cells);
                for (int r = 0; r < gray.rows; ++r)
                    for (int c = 0; c < gray.cols; ++c)
                        f[(r / bh) * cells + c / bw] += gray.at(r, c);
                return Eigen::VectorXd(f / (255.0 * bh * bw));
            }};
}

double fid_images(const std::vector<Image>& gen, const std::vector<Image>& real, const ImageExtractor& extractor)
{
    if (gen.empty() || real.empty())
        throw DataError("FID needs non-empty image sets");
    auto features = [&](const std::vector<Image>& images) {
        Eigen::MatrixXd rows;
        for (std::size_t i = 0; i < images.size(); ++i) {
            const Eigen::VectorXd v = extractor.extract(images[i]);
            if (i == 0)
                rows.resize(static_cast<Eigen::Index>(images.size()), v.size());
            rows.row(static_cast<Eigen::Index>(i)) = v.transpose();
        }
        return CorpusFeatures::from_vectors(FeatureKind::Image, std::move(rows));
    };
    return frechet_distance(features(gen), features(real));
}

double fid_img(const std::vector<Layout>& gen, const std::vector<Layout>& real, const ImageExtractor& extractor)
{
    require_nonempty(gen, real);
    std::vector<Image> g;
    std::vector<Image> r;
    for (const Layout& l : gen)
        g.push_back(render_layout(l));
    for (const Layout& l : real)
        r.push_back(render_layout(l));
    return fid_images(g, r, extractor);
}

double fid_area(const std::vector<Layout>& gen, const std::vector<Layout>& real)
{
    require_nonempty(gen, real);
    return frechet_distance(CorpusFeatures::from_vectors(FeatureKind::Area, stack(gen, area_vector)),
        CorpusFeatures::from_vectors(FeatureKind::Area, stack(real, area_vector)));
}

double fid_type(const std::vector<Layout>& gen, const std::vector<Layout>& real)
{
    require_nonempty(gen, real);
    return frechet_distance(CorpusFeatures::from_vectors(FeatureKind::Type, stack(gen, type_vector)),
        CorpusFeatures::from_vectors(FeatureKind::Type, stack(real, type_vector)));
}

nlohmann::json EvaluationReport::to_json() const
{
    return {{"fid_img", fid_img}, {"fid_area", fid_area}, {"fid_type", fid_type}, {"n_gen", n_gen},
        {"n_real", n_real}, {"extractor_id", extractor_id}};
}

EvaluationReport evaluate(const std::vector<Layout>& gen, const std::vector<Layout>& real,
    const ImageExtractor& extractor)
{
    EvaluationReport report;
    report.fid_img = fid_img(gen, real, extractor);
    report.fid_area = fid_area(gen, real);
    report.fid_type = fid_type(gen, real);
    report.n_gen = static_cast<int>(gen.size());
    report.n_real = static_cast<int>(real.size());
    report.extractor_id = extractor.id;
    return report;
}

} // namespace iplan::metrics
