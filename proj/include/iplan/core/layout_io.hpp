#pragma once

#include "iplan/core/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace iplan {

inline constexpr const char* kLayoutFormat = "iplan-layout/1";

nlohmann::json registry_to_json(const RoomTypeRegistry& reg);
RoomTypeRegistry registry_from_json(const nlohmann::json& j);

nlohmann::json boundary_to_json(const Boundary& b);
Boundary boundary_from_json(const nlohmann::json& j);

nlohmann::json room_to_json(const Room& room, const RoomTypeRegistry& reg);
Room room_from_json(const nlohmann::json& j, const RoomTypeRegistry& reg);

nlohmann::json layout_to_json(const Layout& layout);
// Throws ParseError on schema violations; does not run Layout::validate.
Layout layout_from_json(const nlohmann::json& j);

void save_layout(const std::filesystem::path& path, const Layout& layout);
// Parses and validates; any failure is reported as ParseError naming the file.
Layout load_layout(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace iplan
