#include <doctest.h>

#include "iplan/core/errors.hpp"
#include "iplan/core/rng.hpp"
#include "iplan/data/synth.hpp"
#include "iplan/metrics/fid.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

using namespace iplan;
using namespace iplan::metrics;

namespace {

std::vector<Layout> corpus(int n, std::uint64_t seed)
{
    Rng rng(seed);
    return data::synth_corpus(n, {}, rng);
}

Layout with_rooms(std::vector<Room> rooms)
{
    Rng rng(1);
    Layout l = data::synth_layout({}, rng, "x");
    l.rooms = std::move(rooms);
    return l;
}

std::vector<Image> noisy(const std::vector<Image>& images, double sigma, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<Image> out = images;
    for (Image& img : out)
        for (auto& px : img.pixels)
            px = static_cast<std::uint8_t>(std::clamp(std::lround(px + noise(rng)), 0L, 255L));
    return out;
}

// Naive unbiased covariance, written independently of CorpusFeatures.
Eigen::MatrixXd naive_cov(const Eigen::MatrixXd& x)
{
    const int n = static_cast<int>(x.rows()), d = static_cast<int>(x.cols());
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k)
            mu[k] += x(i, k) / n;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                c(a, b) += (x(i, a) - mu[a]) * (x(i, b) - mu[b]) / (n - 1);
    return c;
}

} // namespace

TEST_CASE("area_vector")
{
    const Layout l = with_rooms({{3, {2, 2}, {0, 0, 5, 5}}, {3, {12, 2}, {10, 0, 15, 7}}, {0, {50, 50}, {20, 20, 100, 100}}});
    const Eigen::VectorXd a = area_vector(l);
    CHECK(a.size() == l.registry.K());
    CHECK(a[3] == doctest::Approx(30.0));
    CHECK(a[0] == doctest::Approx(6400.0));
    CHECK(a[1] == 0.0);
}

TEST_CASE("type_vector counts rooms per type")
{
    const Layout single = with_rooms({{2, {50, 50}, {20, 20, 100, 100}}});
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(single.registry.K());
    expected[2] = 1.0;
    CHECK(type_vector(single) == expected);
    for (const Layout& l : corpus(100, 4)) {
        const Eigen::VectorXd v = type_vector(l);
        CHECK(v.sum() == doctest::Approx(l.N()));
        const TypeCount q = type_count_of(l);
        for (int k = 0; k < l.registry.K(); ++k)
            CHECK(v[k] == q.counts[static_cast<std::size_t>(k)]);
    }
}

TEST_CASE("frechet_distance closed forms")
{
    Eigen::MatrixXd one(1, 1);
    one << 1.0;
    const auto a = CorpusFeatures::from_moments(FeatureKind::Area, Eigen::VectorXd::Zero(1), one);
    const auto b = CorpusFeatures::from_moments(FeatureKind::Area, Eigen::VectorXd::Constant(1, 3.0), one);
    CHECK(frechet_distance(a, b) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(std::abs(frechet_distance(a, a)) <= 1e-8);

    SUBCASE("diagonal covariances reduce to per-dimension terms")
    {
        Eigen::VectorXd ma(3), mb(3), sa(3), sb(3);
        ma << 0.5, -1.0, 2.0;
        mb << 1.5, 0.0, -2.0;
        sa << 0.3, 2.0, 1.1;
        sb << 1.7, 0.2, 1.1;
        double expected = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double dm = ma[i] - mb[i];
            expected += dm * dm + sa[i] + sb[i] - 2.0 * std::sqrt(sa[i] * sb[i]);
        }
        const auto fa = CorpusFeatures::from_moments(FeatureKind::Area, ma, sa.asDiagonal().toDenseMatrix());
        const auto fb = CorpusFeatures::from_moments(FeatureKind::Area, mb, sb.asDiagonal().toDenseMatrix());
        CHECK(frechet_distance(fa, fb) == doctest::Approx(expected).epsilon(1e-10));
        CHECK(frechet_distance(fb, fa) == doctest::Approx(expected).epsilon(1e-10));
    }
    SUBCASE("commuting covariances match the eigenvalue form")
    {
        Rng rng(12);
        std::normal_distribution<double> g;
        Eigen::MatrixXd m(4, 4);
        for (int i = 0; i < 16; ++i)
            m.data()[i] = g(rng);
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
        Eigen::VectorXd lam(4), nu(4), dmu(4);
        lam << 0.5, 1.0, 2.0, 4.0;
        nu << 3.0, 0.1, 2.0, 0.7;
        dmu << 0.1, -0.2, 0.3, 1.0;
        const Eigen::MatrixXd sa = q * lam.asDiagonal() * q.transpose();
        const Eigen::MatrixXd sb = q * nu.asDiagonal() * q.transpose();
        double expected = dmu.squaredNorm();
        for (int i = 0; i < 4; ++i)
            expected += std::pow(std::sqrt(lam[i]) - std::sqrt(nu[i]), 2);
        const auto fa = CorpusFeatures::from_moments(FeatureKind::Image, Eigen::VectorXd::Zero(4), sa);
        const auto fb = CorpusFeatures::from_moments(FeatureKind::Image, dmu, sb);
        CHECK(frechet_distance(fa, fb) == doctest::Approx(expected).epsilon(1e-9));
    }
    CHECK_THROWS_AS(frechet_distance(a, CorpusFeatures::from_moments(FeatureKind::Area, Eigen::VectorXd::Zero(2),
                                            Eigen::MatrixXd::Identity(2, 2))),
        ShapeError);
}

TEST_CASE("shrinkage keeps self-distance at zero")
{
    Rng rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(5, 12); // fewer samples than dimensions: rank-deficient
    for (int i = 0; i < x.size(); ++i)
        x.data()[i] = g(rng);
    const auto f = CorpusFeatures::from_vectors(FeatureKind::Image, x);
    CHECK(std::abs(frechet_distance(f, f)) <= 1e-6);
}

TEST_CASE("FIDs vanish on identical corpora and are symmetric")
{
    const auto real = corpus(30, 10);
    const auto gen = corpus(30, 11);
    CHECK(std::abs(fid_img(real, real)) <= 1e-6);
    CHECK(std::abs(fid_area(real, real)) <= 1e-6);
    CHECK(std::abs(fid_type(real, real)) <= 1e-6);
    CHECK(fid_img(real, gen) == doctest::Approx(fid_img(gen, real)).epsilon(1e-6));
    CHECK(fid_area(real, gen) == doctest::Approx(fid_area(gen, real)).epsilon(1e-6));
    CHECK(fid_type(real, gen) == doctest::Approx(fid_type(gen, real)).epsilon(1e-6));
    CHECK_THROWS_AS(fid_img({}, real), DataError);
}

TEST_CASE("fid_img reacts to a recolored room and grows with noise")
{
    const auto real = corpus(20, 5);
    auto changed = real;
    changed[0].rooms[0].type_id = (changed[0].rooms[0].type_id + 1) % changed[0].registry.K();
    CHECK(fid_img(changed, real) > 0.0);

    std::vector<Image> images;
    for (const Layout& l : real)
        images.push_back(render_layout(l));
    const auto extractor = pooled_gray_extractor();
    double previous = 0.0;
    for (double sigma : {5.0, 20.0, 60.0}) {
        const double d = fid_images(noisy(images, sigma, 99), images, extractor);
        CHECK(d > previous);
        previous = d;
    }
}

TEST_CASE("fid_area against a brute-force doubled-area corpus")
{
    const auto real = corpus(25, 6);
    auto doubled = real;
    for (Layout& l : doubled)
        for (Room& r : l.rooms)
            r.box.right = r.box.left + 2 * r.box.width(); // areas double
    Eigen::MatrixXd x(static_cast<int>(real.size()), real[0].registry.K());
    for (std::size_t i = 0; i < real.size(); ++i)
        x.row(static_cast<int>(i)) = area_vector(real[i]).transpose();
    // Features scale by 2, so both covariances share eigenvectors.
    const Eigen::VectorXd mu = x.colwise().mean().transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(naive_cov(x));
    double expected = mu.squaredNorm();
    const double eps = 1e-6;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = std::max(es.eigenvalues()[i], 0.0);
        expected += std::pow(std::sqrt(lam + eps) - std::sqrt(4.0 * lam + eps), 2);
    }
    const double got = fid_area(doubled, real);
    CHECK(got > 0.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("fid_type ignores room order")
{
    const auto real = corpus(20, 8);
    auto shuffled = real;
    Rng rng(2);
    for (Layout& l : shuffled)
        std::shuffle(l.rooms.begin(), l.rooms.end(), rng);
    CHECK(std::abs(fid_type(shuffled, real)) <= 1e-9);
}

TEST_CASE("evaluation report fields")
{
    const auto real = corpus(12, 1);
    const auto report = evaluate(real, real);
    const auto j = report.to_json();
    for (const char* key : {"fid_img", "fid_area", "fid_type", "n_gen", "n_real", "extractor_id"})
        CHECK(j.contains(key));
    CHECK(j["n_gen"] == 12);
    CHECK(j["extractor_id"] == "pooled-gray-16x16");
}
