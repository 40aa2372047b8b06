#pragma once

#include "iplan/geometry/repair.hpp"
#include "iplan/nn/bcvae.hpp"
#include "iplan/nn/locator.hpp"
#include "iplan/nn/partitioner.hpp"
#include "iplan/service/session.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>

namespace iplan::service {

inline constexpr const char* kConfigFormat = "iplan-config/1";

struct Paths {
    std::filesystem::path bcvae;
    std::filesystem::path locator;
    std::filesystem::path partitioner;
    std::filesystem::path sessions; // empty keeps sessions in memory only
    std::filesystem::path corpus;
};

struct Config {
    RoomTypeRegistry registry = synthetic_registry();
    Paths paths;
    nn::DecodeMode decode = nn::DecodeMode::Argmax;
    std::uint64_t train_seed = 1;
    std::uint64_t generate_seed = 0;
    nn::BcvaeConfig bcvae;
    nn::LocatorConfig locator;
    nn::PartitionConfig partitioner;
    geometry::RepairConfig repair;

    nlohmann::json to_json() const;
    // Relative paths resolve against `base`. Throws ParseError on a wrong
    // format tag or malformed fields.
    static Config from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
};

// Environment variables may replace paths, nothing else:
// IPLAN_BCVAE, IPLAN_LOCATOR, IPLAN_PARTITIONER, IPLAN_SESSIONS, IPLAN_CORPUS.
void apply_env_overrides(Config& cfg);

// Reads the file (defaults when `path` is empty) and applies env overrides.
Config load_config(const std::filesystem::path& path);

// Loads every model whose path is set. Throws DataError for a set path that
// does not exist.
std::shared_ptr<const Models> load_models(const Config& cfg);

} // namespace iplan::service
