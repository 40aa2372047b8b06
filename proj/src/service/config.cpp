#include "iplan/service/config.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/layout_io.hpp"

#include <cstdlib>

namespace iplan::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out)
{
    if (j.contains(key))
        j.at(key).get_to(out);
}

void read_path(const json& j, const char* key, fs::path& out, const fs::path& base)
{
    if (!j.contains(key))
        return;
    fs::path p = j.at(key).get<std::string>();
    out = p.is_relative() && !base.empty() ? base / p : p;
}

RoomTypeRegistry registry_from(const json& j)
{
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "synthetic")
            return synthetic_registry();
        if (name == "rplan")
            return rplan_registry();
        throw ParseError("unknown registry '" + name + "'");
    }
    return registry_from_json(j);
}

std::string decode_name(nn::DecodeMode m) { return m == nn::DecodeMode::Argmax ? "argmax" : "sample"; }

} // namespace

json Config::to_json() const
{
    return {{"format", kConfigFormat}, {"registry", registry_to_json(registry)},
        {"paths",
            {{"bcvae", paths.bcvae.string()}, {"locator", paths.locator.string()},
                {"partitioner", paths.partitioner.string()}, {"sessions", paths.sessions.string()},
                {"corpus", paths.corpus.string()}}},
        {"decode", decode_name(decode)}, {"widths", {{"locator", locator.width_factor}}},
        {"seeds", {{"train", train_seed}, {"generate", generate_seed}}},
        {"train",
            {{"bcvae", {{"epochs", bcvae.epochs}, {"batch", bcvae.batch}, {"lr", bcvae.lr}, {"kl_weight", bcvae.kl_weight}}},
                {"locator", {{"epochs", locator.epochs}, {"batch", locator.batch}, {"lr", locator.lr}}},
                {"partitioner",
                    {{"iterations", partitioner.iterations}, {"warmup_iterations", partitioner.warmup_iterations},
                        {"masker_iterations", partitioner.masker_iterations}, {"batch", partitioner.batch},
                        {"lr", partitioner.lr}, {"critic_lr", partitioner.critic_lr},
                        {"warmup_lr", partitioner.warmup_lr}, {"n_critic", partitioner.n_critic}}}}},
        {"repair", {{"max_iters", repair.max_iters}, {"tol", repair.tol}}}};
}

Config Config::from_json(const json& j, const fs::path& base)
{
    if (j.value("format", std::string()) != kConfigFormat)
        throw ParseError("config: missing or unsupported format tag (expected " + std::string(kConfigFormat) + ")");
    try {
        Config cfg;
        if (j.contains("registry"))
            cfg.registry = registry_from(j["registry"]);
        if (j.contains("paths")) {
            const json& p = j["paths"];
            read_path(p, "bcvae", cfg.paths.bcvae, base);
            read_path(p, "locator", cfg.paths.locator, base);
            read_path(p, "partitioner", cfg.paths.partitioner, base);
            read_path(p, "sessions", cfg.paths.sessions, base);
            read_path(p, "corpus", cfg.paths.corpus, base);
        }
        const std::string decode = j.value("decode", std::string("argmax"));
        if (decode != "argmax" && decode != "sample")
            throw ParseError("config: decode must be argmax or sample");
        cfg.decode = decode == "argmax" ? nn::DecodeMode::Argmax : nn::DecodeMode::Sample;
        if (j.contains("widths"))
            read(j["widths"], "locator", cfg.locator.width_factor);
        if (j.contains("seeds")) {
            read(j["seeds"], "train", cfg.train_seed);
            read(j["seeds"], "generate", cfg.generate_seed);
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            if (t.contains("bcvae")) {
                read(t["bcvae"], "epochs", cfg.bcvae.epochs);
                read(t["bcvae"], "batch", cfg.bcvae.batch);
                read(t["bcvae"], "lr", cfg.bcvae.lr);
                read(t["bcvae"], "kl_weight", cfg.bcvae.kl_weight);
            }
            if (t.contains("locator")) {
                read(t["locator"], "epochs", cfg.locator.epochs);
                read(t["locator"], "batch", cfg.locator.batch);
                read(t["locator"], "lr", cfg.locator.lr);
            }
            if (t.contains("partitioner")) {
                const json& p = t["partitioner"];
                read(p, "iterations", cfg.partitioner.iterations);
                read(p, "warmup_iterations", cfg.partitioner.warmup_iterations);
                read(p, "masker_iterations", cfg.partitioner.masker_iterations);
                read(p, "batch", cfg.partitioner.batch);
                read(p, "lr", cfg.partitioner.lr);
                read(p, "critic_lr", cfg.partitioner.critic_lr);
                read(p, "warmup_lr", cfg.partitioner.warmup_lr);
                read(p, "n_critic", cfg.partitioner.n_critic);
            }
        }
        if (j.contains("repair")) {
            read(j["repair"], "max_iters", cfg.repair.max_iters);
            read(j["repair"], "tol", cfg.repair.tol);
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
}

void apply_env_overrides(Config& cfg)
{
    const std::pair<const char*, fs::path*> vars[] = {{"IPLAN_BCVAE", &cfg.paths.bcvae},
        {"IPLAN_LOCATOR", &cfg.paths.locator}, {"IPLAN_PARTITIONER", &cfg.paths.partitioner},
        {"IPLAN_SESSIONS", &cfg.paths.sessions}, {"IPLAN_CORPUS", &cfg.paths.corpus}};
    for (const auto& [name, target] : vars)
        if (const char* v = std::getenv(name))
            *target = v;
}

Config load_config(const fs::path& path)
{
    Config cfg = path.empty() ? Config{} : Config::from_json(read_json_file(path), path.parent_path());
    apply_env_overrides(cfg);
    return cfg;
}

std::shared_ptr<const Models> load_models(const Config& cfg)
{
    auto models = std::make_shared<Models>();
    models->registry = cfg.registry;
    models->decode = cfg.decode;
    models->repair = cfg.repair;
    const auto require = [](const fs::path& p) {
        if (!fs::exists(p))
            throw DataError("model file " + p.string() + " does not exist");
        return p;
    };
    if (!cfg.paths.bcvae.empty())
        models->types = nn::load_type_sampler(require(cfg.paths.bcvae), cfg.registry);
    if (!cfg.paths.locator.empty()) {
        models->locator = nn::load_locator(require(cfg.paths.locator), cfg.registry);
        models->locator->cfg.temperature = cfg.locator.temperature;
    }
    if (!cfg.paths.partitioner.empty())
        models->partitioner = nn::load_partitioner(require(cfg.paths.partitioner), cfg.registry);
    models->validate();
    return models;
}

} // namespace iplan::service
