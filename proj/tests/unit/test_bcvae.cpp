#include "torch_doctest.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/data/synth.hpp"
#include "iplan/nn/bcvae.hpp"
#include "iplan/nn/common.hpp"

#include <cmath>
#include <filesystem>
#include <map>

using namespace iplan;
using namespace iplan::nn;

namespace {

TypeSampler untrained(std::uint64_t seed = 1)
{
    torch::manual_seed(seed);
    TypeSampler s{synthetic_registry(), Bcvae(synthetic_registry().n_c())};
    s.net->eval();
    return s;
}

Layout one_layout(std::uint64_t seed = 2)
{
    Rng rng(seed);
    return data::synth_layout({}, rng, "one");
}

double tail_mean(const std::vector<BcvaeTraceRow>& trace, int n, double BcvaeTraceRow::*field)
{
    double sum = 0;
    for (std::size_t i = trace.size() - n; i < trace.size(); ++i)
        sum += trace[i].*field;
    return sum / n;
}

} // namespace

TEST_CASE("parameter shapes follow the architecture table")
{
    const int n_c = synthetic_registry().n_c();
    const auto s = untrained();
    std::map<std::string, std::vector<std::int64_t>> expected;
    const int widths[] = {1, 16, 16, 32, 32, 16, 16};
    for (int i = 0; i < 6; ++i) {
        const std::string conv = "embed." + std::to_string(3 * i);
        const std::string norm = "embed." + std::to_string(3 * i + 1);
        expected[conv + ".weight"] = {widths[i + 1], widths[i], 4, 4};
        expected[norm + ".weight"] = {widths[i + 1]};
        expected[norm + ".bias"] = {widths[i + 1]};
    }
    expected["enc.0.weight"] = {128, n_c + 64};
    expected["enc.0.bias"] = {128};
    expected["enc.2.weight"] = {64, 128};
    expected["enc.2.bias"] = {64};
    expected["mu.weight"] = {32, 64};
    expected["mu.bias"] = {32};
    expected["logvar.weight"] = {32, 64};
    expected["logvar.bias"] = {32};
    expected["dec.0.weight"] = {96, 96};
    expected["dec.0.bias"] = {96};
    expected["dec.2.weight"] = {64, 96};
    expected["dec.2.bias"] = {64};
    expected["dec.4.weight"] = {n_c, 64};
    expected["dec.4.bias"] = {n_c};

    std::int64_t count = 0;
    for (const auto& [name, shape] : expected) {
        std::int64_t n = 1;
        for (auto d : shape)
            n *= d;
        count += n;
    }
    const auto params = s.net->named_parameters();
    CHECK(params.size() == expected.size());
    for (const auto& item : params) {
        INFO(item.key());
        REQUIRE(expected.count(item.key()) == 1);
        CHECK(item.value().sizes().vec() == expected[item.key()]);
    }
    CHECK(parameter_count(*s.net) == count);
}

TEST_CASE("embed, encode and decode shapes and determinism")
{
    const auto s = untrained();
    const Layout l = one_layout();
    const torch::Tensor g = embed_boundary(s, l.boundary);
    CHECK(g.sizes().vec() == std::vector<std::int64_t>{64});
    CHECK(torch::equal(g, embed_boundary(s, l.boundary)));
    CHECK(torch::isfinite(embed_boundary(s, Boundary{})).all().item<bool>());

    const TypeBits v = encode_type_bits(type_count_of(l), s.registry);
    const auto [mu, logvar] = encode(s, v, g);
    CHECK(mu.size(0) == 32);
    CHECK(logvar.size(0) == 32);
    CHECK(torch::equal(mu, encode(s, v, g).first));
    const auto ones = encode(s, TypeBits::Ones(v.size()), g);
    CHECK(torch::isfinite(ones.first).all().item<bool>());
    CHECK_THROWS_AS(encode(s, TypeBits::Ones(v.size() + 1), g), ShapeError);

    const torch::Tensor v_hat = decode(s, mu, g);
    CHECK(v_hat.size(0) == s.registry.n_c());
    CHECK(((v_hat > 0) & (v_hat < 1)).all().item<bool>());
    CHECK(torch::equal(v_hat, decode(s, mu, g)));
    CHECK_THROWS_AS(decode(s, torch::zeros({31}), g), ShapeError);
}

TEST_CASE("reparameterize")
{
    const torch::Tensor mu = torch::tensor({0.5f, -2.0f, 3.0f});
    CHECK(torch::allclose(reparameterize(mu, torch::full({3}, -200.0f), *std::make_unique<Rng>(1)), mu));
    Rng a(4), b(4);
    const torch::Tensor logvar = torch::tensor({0.0f, 1.0f, -1.0f});
    CHECK(torch::equal(reparameterize(mu, logvar, a), reparameterize(mu, logvar, b)));

    // Monte-Carlo mean within 3 standard errors.
    Rng rng(9);
    const int n = 100000;
    const torch::Tensor draws = reparameterize(mu.expand({n, 3}), logvar.expand({n, 3}), rng);
    const torch::Tensor mean = draws.mean(0);
    const torch::Tensor se = torch::exp(0.5 * logvar) / std::sqrt(double(n));
    CHECK(((mean - mu).abs() <= 3 * se).all().item<bool>());
}

TEST_CASE("bcvae_loss hand values")
{
    const torch::Tensor z2 = torch::zeros({2});
    auto loss = bcvae_loss(torch::tensor({1.0f, 0.0f}), torch::tensor({0.5f, 0.5f}), z2, z2, 0.5);
    CHECK(loss.rec.item<double>() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-6));
    CHECK(loss.kl.item<double>() == doctest::Approx(0.0));

    const torch::Tensor v = torch::tensor({1.0f, 0.0f, 1.0f, 1.0f});
    loss = bcvae_loss(v, v, torch::zeros({4}), torch::zeros({4}), 0.5);
    CHECK(loss.rec.item<double>() <= 4 * 2e-7);

    // Closed-form KL per dimension: 0.5 (mu^2 + e^lv - 1 - lv).
    const torch::Tensor mu = torch::tensor({1.0f, -0.5f});
    const torch::Tensor lv = torch::tensor({0.3f, -1.2f});
    double expected = 0;
    for (auto [m, l] : {std::pair{1.0, 0.3}, std::pair{-0.5, -1.2}})
        expected += 0.5 * (m * m + std::exp(l) - 1 - l);
    loss = bcvae_loss(torch::tensor({1.0f, 0.0f}), torch::tensor({0.5f, 0.5f}), mu, lv, 0.5);
    CHECK(loss.kl.item<double>() == doctest::Approx(expected).epsilon(1e-5));
    CHECK(loss.total.item<double>() == doctest::Approx(2 * std::log(2.0) + 0.5 * expected).epsilon(1e-5));

    CHECK_THROWS_AS(bcvae_loss(v, torch::full({4}, 1.5f), z2, z2, 0.5), DomainError);
}

TEST_CASE("sample_types respects the registry")
{
    const auto s = untrained();
    const Layout l = one_layout();
    Rng rng(3);
    CHECK(sample_types(s, l.boundary, rng, 0).empty());
    Rng a(5), b(5);
    const auto draws = sample_types(s, l.boundary, a, 50);
    CHECK(draws == sample_types(s, l.boundary, b, 50));
    for (const TypeCount& q : draws)
        for (int k = 0; k < s.registry.K(); ++k) {
            CHECK(q.counts[k] >= 0);
            CHECK(q.counts[k] <= s.registry.max_counts[k]);
        }
}

TEST_CASE("training on one layout")
{
    const std::vector<Layout> corpus{one_layout()};
    BcvaeConfig cfg;
    cfg.epochs = 200;
    Rng rng(7);
    const auto trained = train_bcvae(corpus, cfg, rng);
    REQUIRE(trained.trace.size() == 200);
    for (const auto& row : trained.trace)
        CHECK(std::isfinite(row.total));
    CHECK(trained.trace.back().rec < 0.05);
    CHECK(reconstruct_types(trained.sampler, corpus[0]) == type_count_of(corpus[0]));

    cfg.kl_weight = 0.0;
    Rng rng0(7);
    const auto ablation = train_bcvae(corpus, cfg, rng0);
    CHECK(tail_mean(ablation.trace, 20, &BcvaeTraceRow::rec) <= tail_mean(trained.trace, 20, &BcvaeTraceRow::rec));

    CHECK_THROWS_AS(train_bcvae({}, cfg, rng), DataError);

    SUBCASE("checkpoint round trip and registry guard")
    {
        const auto path = std::filesystem::temp_directory_path() / "iplan_bcvae.pt";
        save_type_sampler(path, trained.sampler);
        const TypeSampler loaded = load_type_sampler(path, synthetic_registry());
        const torch::Tensor g = embed_boundary(loaded, corpus[0].boundary);
        CHECK(torch::allclose(g, embed_boundary(trained.sampler, corpus[0].boundary)));
        RoomTypeRegistry other = synthetic_registry();
        other.names[0] = "Lounge";
        CHECK_THROWS_AS(load_type_sampler(path, other), RegistryError);
        std::filesystem::remove(path);
    }
}
