#include "iplan/core/errors.hpp"
#include "iplan/core/layout_io.hpp"
#include "iplan/core/render.hpp"
#include "iplan/data/corpus.hpp"
#include "iplan/data/synth.hpp"
#include "iplan/geometry/repair.hpp"
#include "iplan/metrics/fid.hpp"
#include "iplan/service/config.hpp"
#include "iplan/service/http.hpp"
#include "iplan/service/session.hpp"
#include "iplan/service/store.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

using namespace iplan;
namespace fs = std::filesystem;

namespace {

service::HttpService* g_server = nullptr;

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw Error("IoError", "cannot write " + path.string());
    return out;
}

std::vector<Layout> read_corpus(const fs::path& dir, const RoomTypeRegistry& reg)
{
    if (fs::exists(dir / data::kManifestFile))
        return data::load_corpus(dir);
    return data::load_corpus(dir, data::CorpusManifest::for_source(data::CorpusSource::Synthetic, reg));
}

std::vector<Layout> training_corpus(const service::Config& cfg, const fs::path& dir, const std::string& part)
{
    const fs::path from = dir.empty() ? cfg.paths.corpus : dir;
    if (from.empty())
        throw DataError("no corpus given (use --corpus or paths.corpus in the config)");
    std::vector<Layout> corpus = read_corpus(from, cfg.registry);
    if (part == "train") {
        const auto manifest = fs::exists(from / data::kManifestFile)
            ? data::read_manifest(from)
            : data::CorpusManifest::for_source(data::CorpusSource::Synthetic, cfg.registry);
        corpus = data::split(corpus, manifest).train;
    }
    if (corpus.empty())
        throw DataError("corpus at " + from.string() + " is empty");
    return corpus;
}

void write_log(const fs::path& path, const std::vector<nlohmann::json>& log)
{
    auto out = open_out(path);
    for (const auto& e : log)
        out << e.dump() << '\n';
}

Layout generate_one(const Layout& input, service::Variant variant, std::uint64_t seed,
    std::shared_ptr<const service::Models> models, const fs::path& log_path)
{
    service::Session s(service::spec_from_layout(input, variant, seed), std::move(models));
    while (s.phase() != service::Phase::Done) {
        s.step();
        s.edit({});
    }
    if (!log_path.empty())
        write_log(log_path, s.log());
    return *s.result();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"iplan: boundary-conditioned floorplan generation"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "Config file (iplan-config/1)");

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
    int synth_n = 20;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    int min_rooms = 2, max_rooms = 6;
    synth->add_option("--n", synth_n, "Number of layouts")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--min-rooms", min_rooms);
    synth->add_option("--max-rooms", max_rooms);

    // train
    auto* train = app.add_subcommand("train", "Train one network");
    std::string which, corpus_dir, model_out, trace_out, part = "all";
    std::optional<std::uint64_t> train_seed;
    std::optional<int> epochs, iterations, warmup, masker;
    train->add_option("model", which, "bcvae, locator or partitioner")
        ->required()
        ->check(CLI::IsMember({"bcvae", "locator", "partitioner"}));
    train->add_option("--corpus", corpus_dir);
    train->add_option("--out", model_out)->required();
    train->add_option("--trace", trace_out, "Loss trace CSV");
    train->add_option("--split", part, "Train on all layouts or on the train split")
        ->check(CLI::IsMember({"all", "train"}));
    train->add_option("--seed", train_seed);
    train->add_option("--epochs", epochs, "bcvae and locator epochs");
    train->add_option("--iterations", iterations, "partitioner adversarial iterations");
    train->add_option("--warmup", warmup, "partitioner warm-up iterations");
    train->add_option("--masker", masker, "partitioner mask pre-fit iterations");

    // generate
    auto* generate = app.add_subcommand("generate", "Generate layouts for given boundaries");
    std::string variant_name = "III", gen_in, gen_out, log_out, png_out;
    std::optional<std::uint64_t> gen_seed;
    generate->add_option("--variant", variant_name, "I (types+centers), II (types) or III (boundary only)")
        ->check(CLI::IsMember({"I", "II", "III"}));
    generate->add_option("--in", gen_in, "Layout file or corpus directory")->required();
    generate->add_option("--out", gen_out, "Output file or directory")->required();
    generate->add_option("--seed", gen_seed);
    generate->add_option("--log", log_out, "Session event log (single layout)");
    generate->add_option("--png", png_out, "Render (single layout)");

    // repair
    auto* repair_cmd = app.add_subcommand("repair", "Run the geometric post-optimizer on a layout");
    std::string repair_in, repair_out, repair_trace;
    repair_cmd->add_option("--in", repair_in)->required();
    repair_cmd->add_option("--out", repair_out)->required();
    repair_cmd->add_option("--trace", repair_trace, "Per-iteration CSV (iter, L_cov, L_int)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "FID metrics between two corpora");
    std::string gen_dir, real_dir, report_out;
    evaluate->add_option("--gen", gen_dir)->required();
    evaluate->add_option("--real", real_dir)->required();
    evaluate->add_option("--report", report_out);

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the session HTTP API");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve->add_option("--port", port);
    serve->add_option("--host", host);

    CLI11_PARSE(app, argc, argv);

    try {
        const service::Config cfg = service::load_config(config_path);

        if (*synth) {
            data::SynthConfig sc;
            sc.min_rooms = min_rooms;
            sc.max_rooms = max_rooms;
            Rng rng(synth_seed);
            const auto corpus = data::synth_corpus(synth_n, sc, rng);
            data::save_corpus(synth_out,
                corpus, data::CorpusManifest::for_source(data::CorpusSource::Synthetic, synthetic_registry(), synth_seed));
            std::cout << "wrote " << corpus.size() << " layouts to " << synth_out << '\n';
        } else if (*train) {
            const auto corpus = training_corpus(cfg, corpus_dir, part);
            Rng rng(train_seed.value_or(cfg.train_seed));
            std::ofstream trace;
            if (!trace_out.empty())
                trace = open_out(trace_out);
            if (which == "bcvae") {
                nn::BcvaeConfig bc = cfg.bcvae;
                if (epochs)
                    bc.epochs = *epochs;
                const auto result = nn::train_bcvae(corpus, bc, rng);
                nn::save_type_sampler(model_out, result.sampler);
                if (trace.is_open()) {
                    trace << "epoch,total,rec,kl\n";
                    for (const auto& r : result.trace)
                        trace << r.epoch << ',' << r.total << ',' << r.rec << ',' << r.kl << '\n';
                }
            } else if (which == "locator") {
                nn::LocatorConfig lc = cfg.locator;
                if (epochs)
                    lc.epochs = *epochs;
                const auto result = nn::train_locator(corpus, lc, rng);
                nn::save_locator(model_out, result.locator);
                if (trace.is_open()) {
                    trace << "epoch,loss\n";
                    for (const auto& r : result.trace)
                        trace << r.epoch << ',' << r.loss << '\n';
                }
            } else {
                nn::PartitionConfig pc = cfg.partitioner;
                if (iterations)
                    pc.iterations = *iterations;
                if (warmup)
                    pc.warmup_iterations = *warmup;
                if (masker)
                    pc.masker_iterations = *masker;
                const auto result = nn::train_partitioner(corpus, pc, rng);
                nn::save_partitioner(model_out, result.partitioner);
                if (trace.is_open()) {
                    trace << "iter,adversarial,d_loss,gp,g_adv,box_loss,critic_gap\n";
                    for (const auto& r : result.trace)
                        trace << r.iter << ',' << r.adversarial << ',' << r.d_loss << ',' << r.gp << ',' << r.g_adv
                              << ',' << r.box_loss << ',' << r.critic_gap << '\n';
                }
            }
            std::cout << "trained " << which << " on " << corpus.size() << " layouts -> " << model_out << '\n';
        } else if (*generate) {
            const auto models = service::load_models(cfg);
            const auto variant = service::variant_from_string(variant_name);
            const std::uint64_t seed = gen_seed.value_or(cfg.generate_seed);
            if (fs::is_directory(gen_in)) {
                const auto inputs = read_corpus(gen_in, cfg.registry);
                std::vector<Layout> outputs;
                for (std::size_t i = 0; i < inputs.size(); ++i)
                    outputs.push_back(generate_one(inputs[i], variant, seed + i, models, {}));
                data::save_corpus(gen_out, outputs,
                    data::CorpusManifest::for_source(data::CorpusSource::Synthetic, cfg.registry, seed));
                std::cout << "generated " << outputs.size() << " layouts into " << gen_out << '\n';
            } else {
                const Layout out = generate_one(load_layout(gen_in), variant, seed, models, log_out);
                if (fs::path(gen_out).has_parent_path())
                    fs::create_directories(fs::path(gen_out).parent_path());
                save_layout(gen_out, out);
                if (!png_out.empty())
                    write_png(png_out, render_layout(out));
                std::cout << "generated " << out.N() << " rooms -> " << gen_out << '\n';
            }
        } else if (*repair_cmd) {
            Layout layout = load_layout(repair_in);
            std::vector<PixelBox> boxes;
            for (const Room& r : layout.rooms)
                boxes.push_back(r.box);
            const auto result = geometry::repair(geometry::RepairProblem::from_boundary(layout.boundary, boxes), cfg.repair);
            const auto rounded = result.rounded();
            for (std::size_t i = 0; i < rounded.size(); ++i) {
                Room& r = layout.rooms[i];
                r.box = rounded[i];
                r.center = {std::clamp(r.center.row, r.box.top, r.box.bottom - 1),
                    std::clamp(r.center.col, r.box.left, r.box.right - 1)};
            }
            save_layout(repair_out, layout);
            if (!repair_trace.empty()) {
                auto trace = open_out(repair_trace);
                trace << "iter,L_cov,L_int\n";
                trace.precision(17);
                for (const auto& row : result.trace)
                    trace << row.iter << ',' << row.coverage << ',' << row.interior << '\n';
            }
            std::cout << "repair: L " << result.initial.total << " -> " << result.final.total << " in "
                      << result.iterations << " iterations\n";
        } else if (*evaluate) {
            const auto report = metrics::evaluate(read_corpus(gen_dir, cfg.registry), read_corpus(real_dir, cfg.registry));
            const auto j = report.to_json();
            if (!report_out.empty())
                write_json_file(report_out, j);
            std::cout << j.dump(1) << '\n';
        } else if (*serve) {
            const auto models = service::load_models(cfg);
            std::optional<fs::path> dir;
            if (!cfg.paths.sessions.empty())
                dir = cfg.paths.sessions;
            service::SessionStore store(models, dir);
            service::HttpService http(store);
            const int bound = http.bind(host, port);
            g_server = &http;
            std::signal(SIGINT, [](int) {
                if (g_server)
                    g_server->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (g_server)
                    g_server->stop();
            });
            std::cout << "listening on " << host << ':' << bound << std::endl;
            http.serve();
            g_server = nullptr;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return service::http_status(e.kind()) == 500 ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
