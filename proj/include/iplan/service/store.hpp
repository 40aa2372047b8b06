#pragma once

#include "iplan/core/errors.hpp"
#include "iplan/service/session.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace iplan::service {

inline constexpr std::size_t kSnapshotInterval = 20;

// On-disk session: `events.jsonl` plus `snapshot-<n>.cbor` after every
// kSnapshotInterval events.
std::vector<nlohmann::json> read_events(const std::filesystem::path& dir);
// Appends log entries from `from` on and writes any snapshot now due.
void persist(const std::filesystem::path& dir, const Session& s, std::size_t from);
// Latest snapshot plus the events after it.
Session load_session(const std::filesystem::path& dir, std::shared_ptr<const Models> models);

// Live sessions keyed by id. Calls on one session are serialized; different
// sessions run concurrently.
class SessionStore {
public:
    // Reloads every session found under `dir` when given.
    explicit SessionStore(std::shared_ptr<const Models> models, std::optional<std::filesystem::path> dir = {});

    // Uses spec.id when it is set and free, otherwise assigns "s<n>".
    std::string create(SessionSpec spec);

    // Runs f on the session under its lock and persists what it logged. f
    // must return a value. Throws NotFound for unknown ids.
    template <typename F>
    auto with(const std::string& id, F&& f)
    {
        const std::shared_ptr<Entry> e = entry(id);
        std::lock_guard lock(e->mutex);
        // A throwing call leaves the session (and its log) unchanged.
        auto result = f(*e->session);
        flush(id, *e);
        return result;
    }

    std::vector<std::string> ids() const;
    const Models& models() const { return *models_; }
    std::shared_ptr<const Models> shared_models() const { return models_; }

private:
    struct Entry {
        std::mutex mutex;
        std::unique_ptr<Session> session;
        std::size_t persisted = 0;
    };
    std::shared_ptr<Entry> entry(const std::string& id) const;
    void flush(const std::string& id, Entry& e);

    std::shared_ptr<const Models> models_;
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;
};

} // namespace iplan::service
