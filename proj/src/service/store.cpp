#include "iplan/service/store.hpp"

#include <fstream>
#include <regex>

namespace iplan::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path snapshot_path(const fs::path& dir, std::size_t events)
{
    return dir / ("snapshot-" + std::to_string(events) + ".cbor");
}

bool valid_id(const std::string& id)
{
    static const std::regex pattern("[A-Za-z0-9_.-]{1,64}");
    return std::regex_match(id, pattern) && id != "." && id != "..";
}

} // namespace

std::vector<json> read_events(const fs::path& dir)
{
    std::ifstream in(dir / "events.jsonl");
    if (!in)
        throw NotFound("no event log in " + dir.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(dir.string() + " event " + std::to_string(out.size()) + ": " + e.what());
        }
    }
    return out;
}

void persist(const fs::path& dir, const Session& s, std::size_t from)
{
    const auto& log = s.log();
    if (from >= log.size())
        return;
    fs::create_directories(dir);
    std::ofstream out(dir / "events.jsonl", std::ios::app);
    if (!out)
        throw Error("IoError", "cannot append to " + (dir / "events.jsonl").string());
    for (std::size_t i = from; i < log.size(); ++i)
        out << log[i].dump() << '\n';
    out.flush();
    // Snapshots hold the state after the most recent multiple of the interval.
    if (log.size() / kSnapshotInterval > from / kSnapshotInterval && log.size() % kSnapshotInterval == 0) {
        const auto bytes = s.state_bytes();
        std::ofstream snap(snapshot_path(dir, log.size()), std::ios::binary);
        snap.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
}

Session load_session(const fs::path& dir, std::shared_ptr<const Models> models)
{
    const std::vector<json> log = read_events(dir);
    std::size_t best = 0;
    for (const auto& item : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = item.path().filename().string();
        static const std::regex pattern("snapshot-([0-9]+)\\.cbor");
        if (std::regex_match(name, m, pattern)) {
            const std::size_t n = std::stoul(m[1].str());
            if (n <= log.size())
                best = std::max(best, n);
        }
    }
    if (best == 0)
        return Session::replay(log, std::move(models));
    std::ifstream in(snapshot_path(dir, best), std::ios::binary);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return Session::restore(json::from_cbor(bytes), log, std::move(models));
    } catch (const json::exception& e) {
        throw ParseError(snapshot_path(dir, best).string() + ": " + e.what());
    }
}

SessionStore::SessionStore(std::shared_ptr<const Models> models, std::optional<fs::path> dir)
    : models_(std::move(models)), dir_(std::move(dir))
{
    if (!dir_)
        return;
    fs::create_directories(*dir_);
    for (const auto& item : fs::directory_iterator(*dir_)) {
        if (!item.is_directory() || !fs::exists(item.path() / "events.jsonl"))
            continue;
        auto e = std::make_shared<Entry>();
        e->session = std::make_unique<Session>(load_session(item.path(), models_));
        e->persisted = e->session->log().size();
        sessions_[item.path().filename().string()] = e;
    }
}

std::string SessionStore::create(SessionSpec spec)
{
    std::lock_guard lock(mutex_);
    std::string id = spec.id;
    if (id.empty() || id == "session") {
        do
            id = "s" + std::to_string(next_id_++);
        while (sessions_.count(id));
    } else if (!valid_id(id)) {
        throw ValidationError("session id '" + id + "' must match [A-Za-z0-9_.-]+");
    } else if (sessions_.count(id)) {
        throw ValidationError("session '" + id + "' already exists");
    }
    spec.id = id;
    auto e = std::make_shared<Entry>();
    e->session = std::make_unique<Session>(std::move(spec), models_);
    flush(id, *e);
    sessions_[id] = e;
    return id;
}

std::vector<std::string> SessionStore::ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, e] : sessions_)
        out.push_back(id);
    return out;
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end())
        throw NotFound("no session '" + id + "'");
    return it->second;
}

void SessionStore::flush(const std::string& id, Entry& e)
{
    if (dir_)
        persist(*dir_ / id, *e.session, e.persisted);
    e.persisted = e.session->log().size();
}

} // namespace iplan::service
