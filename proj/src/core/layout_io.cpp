#include "iplan/core/layout_io.hpp"

#include "iplan/core/errors.hpp"
#include "iplan/core/raster.hpp"

#include <fstream>
#include <sstream>

namespace iplan {

using nlohmann::json;

json registry_to_json(const RoomTypeRegistry& reg)
{
    return {{"names", reg.names}, {"max_counts", reg.max_counts}};
}

RoomTypeRegistry registry_from_json(const json& j)
{
    try {
        RoomTypeRegistry reg{j.at("names").get<std::vector<std::string>>(),
            j.at("max_counts").get<std::vector<int>>()};
        reg.validate();
        return reg;
    } catch (const json::exception& e) {
        throw ParseError(std::string("registry: ") + e.what());
    }
}

json boundary_to_json(const Boundary& b)
{
    return {{"resolution", kResolution}, {"encoding", "rle-row-major-zero-first"},
        {"boundary", rle_encode(b.boundary)}, {"frontdoor", rle_encode(b.frontdoor)},
        {"interior", rle_encode(b.interior)}};
}

Boundary boundary_from_json(const json& j)
{
    try {
        if (j.value("resolution", kResolution) != kResolution)
            throw ParseError("boundary resolution must be 128");
        Boundary b;
        b.boundary = rle_decode(j.at("boundary").get<std::vector<int>>());
        b.frontdoor = rle_decode(j.at("frontdoor").get<std::vector<int>>());
        b.interior = rle_decode(j.at("interior").get<std::vector<int>>());
        return b;
    } catch (const json::exception& e) {
        throw ParseError(std::string("boundary: ") + e.what());
    }
}

json room_to_json(const Room& room, const RoomTypeRegistry& reg)
{
    return {{"type", reg.names.at(static_cast<std::size_t>(room.type_id))},
        {"center", {room.center.row, room.center.col}},
        {"box", {room.box.top, room.box.left, room.box.bottom, room.box.right}}};
}

Room room_from_json(const json& j, const RoomTypeRegistry& reg)
{
    try {
        Room room;
        const json& type = j.at("type");
        room.type_id = type.is_string() ? reg.id_of(type.get<std::string>()) : type.get<int>();
        const auto center = j.at("center").get<std::vector<int>>();
        const auto box = j.at("box").get<std::vector<int>>();
        if (center.size() != 2 || box.size() != 4)
            throw ParseError("room center needs 2 and box 4 coordinates");
        room.center = {center[0], center[1]};
        room.box = {box[0], box[1], box[2], box[3]};
        return room;
    } catch (const json::exception& e) {
        throw ParseError(std::string("room: ") + e.what());
    }
}

json layout_to_json(const Layout& layout)
{
    json rooms = json::array();
    for (const Room& room : layout.rooms)
        rooms.push_back(room_to_json(room, layout.registry));
    return {{"format", kLayoutFormat}, {"id", layout.id}, {"registry", registry_to_json(layout.registry)},
        {"boundary", boundary_to_json(layout.boundary)}, {"rooms", rooms}};
}

Layout layout_from_json(const json& j)
{
    try {
        if (j.value("format", std::string()) != kLayoutFormat)
            throw ParseError("missing or unsupported format tag (expected " + std::string(kLayoutFormat) + ")");
        Layout layout;
        layout.id = j.value("id", std::string());
        layout.registry = registry_from_json(j.at("registry"));
        layout.boundary = boundary_from_json(j.at("boundary"));
        for (const json& r : j.at("rooms"))
            layout.rooms.push_back(room_from_json(r, layout.registry));
        return layout;
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    } catch (const RegistryError& e) {
        throw ParseError(e.what());
    }
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out)
        throw Error("IoError", "cannot open " + path.string() + " for writing");
    out << j.dump(1) << '\n';
}

void save_layout(const std::filesystem::path& path, const Layout& layout)
{
    write_json_file(path, layout_to_json(layout));
}

Layout load_layout(const std::filesystem::path& path)
{
    try {
        Layout layout = layout_from_json(read_json_file(path));
        layout.validate();
        return layout;
    } catch (const Error& e) {
        throw ParseError(path.filename().string() + ": " + e.what());
    }
}

} // namespace iplan
