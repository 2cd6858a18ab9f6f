#include "idtrace/service.hpp"

#include <httplib.h>
#include <signal.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include "idtrace/digest.hpp"
#include "idtrace/errors.hpp"
#include "idtrace/json_io.hpp"
#include "idtrace/tracer.hpp"
#include "idtrace/universe.hpp"

namespace idtrace::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Request-level failures that are not library errors.
class HttpError : public std::runtime_error {
public:
    HttpError(int status, std::string code, const std::string& what)
        : std::runtime_error(what), status_(status), code_(std::move(code)) {}
    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] const std::string& code() const noexcept { return code_; }
    json extra;

private:
    int status_;
    std::string code_;
};

Response error_response(int status, const std::string& code, const std::string& message, json extra = {}) {
    json err = {{"code", code}, {"message", message}};
    if (extra.is_object()) {
        err.update(extra);
    }
    return {status, {{"error", err}}};
}

int status_for(const std::string& code) {
    if (code == "resource_limit") {
        return 413;
    }
    if (code == "exhausted") {
        return 409;
    }
    if (code == "parse_error" || code == "validation_error" || code == "usage_error" || code == "invalid_set" ||
        code == "domain_error") {
        return 400;
    }
    return 500;
}

template <typename Fn>
Response guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const HttpError& e) {
        return error_response(e.status(), e.code(), e.what(), e.extra);
    } catch (const ParseError& e) {
        return error_response(400, e.code(), e.what(), {{"row", e.row()}});
    } catch (const ValidationError& e) {
        json extra = json::object();
        if (e.row()) {
            extra["row"] = *e.row();
        }
        return error_response(400, e.code(), e.what(), extra);
    } catch (const Error& e) {
        return error_response(status_for(e.code()), e.code(), e.what());
    } catch (const json::exception& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

std::string random_token(const char* prefix) {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%016llx", prefix, static_cast<unsigned long long>(rng()));
    return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out.flush()) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

AttributeId attribute_of(const Universe& u, const json& value) {
    if (value.is_number_integer()) {
        const auto a = value.get<std::int64_t>();
        if (a < 0 || static_cast<std::size_t>(a) >= u.attribute_count()) {
            throw ValidationError("attribute index " + std::to_string(a) + " out of range");
        }
        return static_cast<AttributeId>(a);
    }
    if (!value.is_string()) {
        throw ValidationError("attribute must be a name or an index");
    }
    return u.schema().require(value.get<std::string>());
}

Observation observation_of(const Universe& u, const json& attribute, const json& value) {
    const AttributeId a = attribute_of(u, attribute);
    if (!value.is_string()) {
        throw ValidationError("value must be a string");
    }
    return {a, u.schema().require_value(a, value.get<std::string>())};
}

ObservationSet known_of(const Universe& u, const json& known) {
    ObservationSet out;
    if (known.is_null()) {
        return out;
    }
    if (known.is_string()) {
        return parse_known(u, known.get<std::string>());
    }
    if (!known.is_array()) {
        throw ValidationError("known must be a list");
    }
    for (const auto& item : known) {
        if (item.is_string()) {
            for (const auto& o : parse_known(u, item.get<std::string>())) {
                out.insert(o);
            }
        } else {
            out.insert(observation_of(u, item.at("attribute"), item.at("value")));
        }
    }
    return out;
}

std::uint64_t revision_of(const json& body) {
    if (!body.contains("expected_revision") || !body.at("expected_revision").is_number_integer() ||
        body.at("expected_revision").get<std::int64_t>() < 0) {
        throw ValidationError("expected_revision (non-negative integer) is required");
    }
    return body.at("expected_revision").get<std::uint64_t>();
}

// Ends the session as ambiguous when candidates remain but no remaining
// attribute is defined on any of them. Depends only on state, so replay
// reaches the same verdict without a log entry.
void settle(Session& session) {
    if (session.status() != SessionStatus::active) {
        return;
    }
    try {
        (void)session.recommend();
    } catch (const ExhaustedError&) {
        session.conclude_ambiguous();
    }
}

json bare_event(const json& event) {
    json out = event;
    out.erase("revision");
    out.erase("at");
    return out;
}

struct DatasetEntry {
    std::string id;
    std::string name;
    std::string sha256;
    std::string created_at;
    std::shared_ptr<const Universe> universe;

    [[nodiscard]] json record() const {
        return {{"dataset_id", id},
                {"name", name},
                {"sha256", sha256},
                {"objects", universe->object_count()},
                {"attributes", universe->attribute_count()},
                {"created_at", created_at}};
    }
};

struct SessionEntry {
    mutable std::mutex mutex;
    std::string id;
    std::shared_ptr<const DatasetEntry> dataset;
    std::optional<Session> session;
    std::uint64_t revision = 0;
    std::string created_at;
    std::string updated_at;
    std::size_t since_snapshot = 0;
    bool deleted = false;
    std::vector<json> events;  // mutations in order, without revision or time
};

json bits_or_null(const std::vector<Bits>& history, std::size_t i) {
    return i < history.size() ? json(round6(history[i].value)) : json(nullptr);
}

json exact_or_null(const std::vector<Bits>& history, std::size_t i) {
    return i < history.size() ? json(hexfloat(history[i].value)) : json(nullptr);
}

}  // namespace

// ---- config ----------------------------------------------------------------

void ServiceConfig::set_listen(std::string_view listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string_view::npos) {
        throw ValidationError("listen address must be host:port");
    }
    const std::string port_text(listen.substr(colon + 1));
    char* end = nullptr;
    const long p = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || p < 0 || p > 65535) {
        throw ValidationError("invalid port '" + port_text + "'");
    }
    if (colon > 0) {
        host = std::string(listen.substr(0, colon));
    }
    port = static_cast<int>(p);
}

void ServiceConfig::apply_env() {
    if (const char* v = std::getenv("IDTRACE_LISTEN"); v && *v) {
        set_listen(v);
    }
    if (const char* v = std::getenv("IDTRACE_DATA_DIR"); v && *v) {
        data_dir = v;
    }
    if (const char* v = std::getenv("IDTRACE_DISPLAY_THRESHOLD"); v && *v) {
        char* end = nullptr;
        const unsigned long long t = std::strtoull(v, &end, 10);
        if (*end != '\0') {
            throw ValidationError("IDTRACE_DISPLAY_THRESHOLD must be a non-negative integer");
        }
        display_threshold = t;
    }
    if (const char* v = std::getenv("IDTRACE_STATIC_DIR"); v && *v) {
        static_dir = fs::path(v);
    }
}

// ---- service ---------------------------------------------------------------

struct TraceService::Impl {
    ServiceConfig config;
    fs::path datasets_dir;
    fs::path sessions_dir;

    mutable std::shared_mutex datasets_mutex;
    std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets;

    mutable std::shared_mutex sessions_mutex;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions;

    explicit Impl(ServiceConfig c) : config(std::move(c)) {
        datasets_dir = config.data_dir / "datasets";
        sessions_dir = config.data_dir / "sessions";
        fs::create_directories(datasets_dir);
        fs::create_directories(sessions_dir);
        load_datasets();
        replay_sessions();
    }

    void load_datasets() {
        for (const auto& file : fs::directory_iterator(datasets_dir)) {
            if (file.path().extension() != ".json") {
                continue;
            }
            try {
                const json rec = json::parse(read_file(file.path()));
                auto entry = std::make_shared<DatasetEntry>();
                entry->id = rec.at("dataset_id").get<std::string>();
                entry->name = rec.value("name", entry->id);
                entry->created_at = rec.value("created_at", "");
                const std::string csv = read_file(datasets_dir / (entry->id + ".csv"));
                entry->sha256 = sha256_hex(csv);
                if (entry->sha256 != rec.value("sha256", "")) {
                    std::cerr << "idtrace: dataset " << entry->id << " digest mismatch, skipped\n";
                    continue;
                }
                entry->universe = std::make_shared<const Universe>(parse_csv_text(csv));
                datasets[entry->id] = std::move(entry);
            } catch (const std::exception& e) {
                std::cerr << "idtrace: cannot load " << file.path() << ": " << e.what() << "\n";
            }
        }
    }

    [[nodiscard]] fs::path log_path(const std::string& id) const { return sessions_dir / (id + ".log"); }
    [[nodiscard]] fs::path snapshot_path(const std::string& id) const {
        return sessions_dir / (id + ".snapshot.json");
    }

    // Applies one logged mutation to the session.
    static void apply_event(const Universe& u, Session& session, const json& event) {
        const std::string op = event.at("op").get<std::string>();
        if (op == "observe") {
            session.observe(observation_of(u, event.at("attribute"), event.at("value")));
        } else if (op == "unavailable") {
            session.mark_unavailable(attribute_of(u, event.at("attribute")));
        } else {
            throw ValidationError("unknown log op '" + op + "'");
        }
        settle(session);
    }

    void replay_sessions() {
        for (const auto& file : fs::directory_iterator(sessions_dir)) {
            if (file.path().extension() != ".log") {
                continue;
            }
            const std::string id = file.path().stem().string();
            try {
                auto entry = replay(id);
                if (entry) {
                    sessions[id] = std::move(entry);
                }
            } catch (const std::exception& e) {
                std::cerr << "idtrace: cannot replay session " << id << ": " << e.what() << "\n";
            }
        }
    }

    // Rebuilds a session from its snapshot (if any) plus the log entries
    // past the snapshot's revision. A torn final line is ignored.
    std::shared_ptr<SessionEntry> replay(const std::string& id) {
        std::ifstream in(log_path(id));
        std::vector<json> events;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            try {
                events.push_back(json::parse(line));
            } catch (const json::exception&) {
                if (in.peek() != EOF) {
                    throw ValidationError("corrupt log line in session " + id);
                }
            }
        }
        if (events.empty() || events.front().value("op", "") != "create") {
            throw ValidationError("session log has no create record");
        }
        const json& create = events.front();
        const auto ds = find_dataset(create.at("dataset_id").get<std::string>());
        const Universe& u = *ds->universe;

        auto entry = std::make_shared<SessionEntry>();
        entry->id = id;
        entry->dataset = ds;
        entry->created_at = create.value("at", "");
        entry->updated_at = entry->created_at;

        std::uint64_t from = 0;
        if (fs::exists(snapshot_path(id))) {
            const json snap = json::parse(read_file(snapshot_path(id)));
            entry->session.emplace(ds->universe, known_of(u, snap.at("known")));
            settle(*entry->session);
            for (const auto& event : snap.at("events")) {
                apply_event(u, *entry->session, event);
                entry->events.push_back(event);
            }
            from = snap.at("revision").get<std::uint64_t>();
            entry->revision = from;
            entry->updated_at = snap.value("updated_at", entry->updated_at);
        } else {
            entry->session.emplace(ds->universe, known_of(u, create.at("known")));
            settle(*entry->session);
        }
        for (std::size_t i = 1; i < events.size(); ++i) {
            const auto rev = events[i].at("revision").get<std::uint64_t>();
            if (rev <= from) {
                continue;
            }
            if (rev != entry->revision + 1) {
                throw ValidationError("revision gap in session " + id);
            }
            apply_event(u, *entry->session, events[i]);
            entry->events.push_back(bare_event(events[i]));
            entry->revision = rev;
            entry->updated_at = events[i].value("at", entry->updated_at);
        }
        return entry;
    }

    void append_log(const SessionEntry& entry, const json& event) const {
        std::ofstream out(log_path(entry.id), std::ios::app | std::ios::binary);
        out << event.dump() << '\n';
        if (!out.flush()) {
            throw std::runtime_error("cannot append to session log " + entry.id);
        }
    }

    void write_snapshot(const SessionEntry& entry) const {
        const Universe& u = *entry.dataset->universe;
        const Session& s = *entry.session;
        json known = json::array();
        for (const auto& o : s.known()) {
            known.push_back(observation_json(u, o));
        }
        const json snap = {{"session_id", entry.id},
                           {"dataset_id", entry.dataset->id},
                           {"revision", entry.revision},
                           {"known", known},
                           {"events", entry.events},
                           {"status", to_string(s.status())},
                           {"candidate_count", s.candidates().size()},
                           {"updated_at", entry.updated_at}};
        write_atomic(snapshot_path(entry.id), snap.dump(2) + "\n");
    }

    [[nodiscard]] std::shared_ptr<const DatasetEntry> find_dataset(const std::string& id) const {
        std::shared_lock lock(datasets_mutex);
        const auto it = datasets.find(id);
        if (it == datasets.end()) {
            throw HttpError(404, "not_found", "unknown dataset '" + id + "'");
        }
        return it->second;
    }

    [[nodiscard]] std::shared_ptr<SessionEntry> find_session(const std::string& id) const {
        std::shared_lock lock(sessions_mutex);
        const auto it = sessions.find(id);
        if (it == sessions.end()) {
            throw HttpError(404, "not_found", "unknown session '" + id + "'");
        }
        return it->second;
    }

    // Caller holds entry.mutex.
    static void require_live(const SessionEntry& entry) {
        if (entry.deleted) {
            throw HttpError(404, "not_found", "unknown session '" + entry.id + "'");
        }
    }

    static void require_active(const SessionEntry& entry) {
        if (entry.session->status() != SessionStatus::active) {
            throw HttpError(409, "session_terminal",
                            "session is " + std::string(to_string(entry.session->status())));
        }
    }

    static void require_revision(const SessionEntry& entry, std::uint64_t expected) {
        if (expected != entry.revision) {
            HttpError e(409, "revision_conflict",
                        "expected revision " + std::to_string(expected) + ", session is at " +
                            std::to_string(entry.revision));
            e.extra = {{"revision", entry.revision}};
            throw e;
        }
    }

    // Caller holds entry.mutex.
    [[nodiscard]] json session_json(const SessionEntry& entry) const {
        const Universe& u = *entry.dataset->universe;
        const Session& s = *entry.session;
        const auto& history = s.entropy_history();
        const auto& counts = s.count_history();

        json known = json::array();
        for (const auto& o : s.known()) {
            known.push_back(observation_json(u, o));
        }
        json path = json::array();
        for (std::size_t i = 0; i < s.path().size(); ++i) {
            json step = observation_json(u, s.path()[i]);
            step["candidate_count"] = i + 1 < counts.size() ? counts[i + 1] : 0;
            step["entropy"] = bits_or_null(history, i + 1);
            step["entropy_exact"] = exact_or_null(history, i + 1);
            path.push_back(std::move(step));
        }
        json rounded = json::array();
        json exact = json::array();
        for (Bits b : history) {
            rounded.push_back(round6(b.value));
            exact.push_back(hexfloat(b.value));
        }
        json unavailable = json::array();
        for (AttributeId a : s.unavailable()) {
            unavailable.push_back(u.schema()[a].name);
        }
        json remaining = json::array();
        for (AttributeId a : s.remaining_attributes()) {
            remaining.push_back(u.schema()[a].name);
        }

        const bool has_entropy = !history.empty() && s.status() != SessionStatus::inconsistent;
        json out = {{"session_id", entry.id},
                    {"dataset_id", entry.dataset->id},
                    {"revision", entry.revision},
                    {"status", to_string(s.status())},
                    {"candidate_count", s.candidates().size()},
                    {"entropy", has_entropy ? json(round6(history.back().value)) : json(nullptr)},
                    {"entropy_exact", has_entropy ? json(hexfloat(history.back().value)) : json(nullptr)},
                    {"known", known},
                    {"path", path},
                    {"entropy_history", rounded},
                    {"entropy_history_exact", exact},
                    {"count_history", counts},
                    {"unavailable", unavailable},
                    {"remaining_attributes", remaining},
                    {"created_at", entry.created_at},
                    {"updated_at", entry.updated_at}};
        if (s.status() == SessionStatus::identified) {
            out["object_id"] = u.object_id(s.candidates().members().front());
        }
        if (s.candidates().size() <= config.display_threshold) {
            json survivors = json::array();
            for (ObjectIndex i : s.candidates().members()) {
                json values = json::object();
                for (AttributeId a = 0; a < u.attribute_count(); ++a) {
                    const ValueCode v = u.cell(i, a);
                    values[u.schema()[a].name] = v == kMissing ? json(nullptr) : json(u.schema().value_name(a, v));
                }
                survivors.push_back({{"object_id", u.object_id(i)}, {"values", values}});
            }
            out["survivors"] = survivors;
        }
        return out;
    }

    json whatif_json(const SessionEntry& entry, AttributeId a) const {
        const Universe& u = *entry.dataset->universe;
        const auto outcomes = entry.session->whatif(a);
        json list = json::array();
        std::size_t defined = 0;
        for (const auto& [v, o] : outcomes) {
            list.push_back({{"value", u.schema().value_name(a, v)},
                            {"count", o.count},
                            {"entropy", round6(o.entropy.value)},
                            {"entropy_exact", hexfloat(o.entropy.value)}});
            defined += o.count;
        }
        return {{"attribute", u.schema()[a].name},
                {"outcomes", list},
                {"missing_count", entry.session->candidates().size() - defined}};
    }

    // Runs one mutation on a copy, logs it, then commits. Caller holds the
    // entry mutex and has checked liveness, status and revision.
    Response mutate(SessionEntry& entry, json event, const std::function<void(Session&)>& change) {
        Session next = *entry.session;
        change(next);
        settle(next);
        event["revision"] = entry.revision + 1;
        event["at"] = now_iso();
        append_log(entry, event);
        entry.session = std::move(next);
        entry.events.push_back(bare_event(event));
        entry.revision += 1;
        entry.updated_at = event["at"].get<std::string>();
        if (config.snapshot_every > 0 && ++entry.since_snapshot >= config.snapshot_every) {
            write_snapshot(entry);
            entry.since_snapshot = 0;
        }
        return {200, session_json(entry)};
    }
};

TraceService::TraceService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
TraceService::~TraceService() = default;

const ServiceConfig& TraceService::config() const noexcept { return impl_->config; }

Response TraceService::upload_dataset(std::string_view csv, const std::string& name) {
    return guarded([&] {
        const std::string digest = sha256_hex(csv);
        const std::string id = "ds_" + digest.substr(0, 16);
        {
            std::shared_lock lock(impl_->datasets_mutex);
            if (const auto it = impl_->datasets.find(id); it != impl_->datasets.end()) {
                return Response{200, it->second->record()};
            }
        }
        auto entry = std::make_shared<DatasetEntry>();
        entry->universe = std::make_shared<const Universe>(parse_csv_text(csv));
        entry->id = id;
        entry->name = name.empty() ? id : name;
        entry->sha256 = digest;
        entry->created_at = now_iso();

        std::unique_lock lock(impl_->datasets_mutex);
        if (const auto it = impl_->datasets.find(id); it != impl_->datasets.end()) {
            return Response{200, it->second->record()};
        }
        write_atomic(impl_->datasets_dir / (id + ".csv"), std::string(csv));
        write_atomic(impl_->datasets_dir / (id + ".json"), entry->record().dump(2) + "\n");
        impl_->datasets[id] = entry;
        return Response{201, entry->record()};
    });
}

Response TraceService::list_datasets() const {
    return guarded([&] {
        std::shared_lock lock(impl_->datasets_mutex);
        json list = json::array();
        for (const auto& [id, d] : impl_->datasets) {
            list.push_back(d->record());
        }
        return Response{200, {{"datasets", list}}};
    });
}

Response TraceService::get_dataset(const std::string& dataset_id) const {
    return guarded([&] {
        const auto d = impl_->find_dataset(dataset_id);
        json rec = d->record();
        json schema = json::array();
        for (const auto& attr : d->universe->schema().attributes()) {
            schema.push_back({{"name", attr.name}, {"values", attr.values}});
        }
        rec["schema"] = schema;
        return Response{200, rec};
    });
}

Response TraceService::create_session(const nlohmann::json& body) {
    return guarded([&] {
        if (!body.is_object() || !body.contains("dataset_id")) {
            throw ValidationError("dataset_id is required");
        }
        const auto ds = impl_->find_dataset(body.at("dataset_id").get<std::string>());
        const Universe& u = *ds->universe;
        const ObservationSet known = known_of(u, body.value("known", json()));

        auto entry = std::make_shared<SessionEntry>();
        entry->dataset = ds;
        entry->session.emplace(ds->universe, known);
        settle(*entry->session);
        entry->created_at = now_iso();
        entry->updated_at = entry->created_at;

        json known_json = json::array();
        for (const auto& o : known) {
            known_json.push_back(observation_json(u, o));
        }
        std::unique_lock lock(impl_->sessions_mutex);
        do {
            entry->id = random_token("s_");
        } while (impl_->sessions.count(entry->id) != 0);
        impl_->append_log(*entry, {{"op", "create"},
                                   {"session_id", entry->id},
                                   {"dataset_id", ds->id},
                                   {"known", known_json},
                                   {"at", entry->created_at}});
        impl_->sessions[entry->id] = entry;
        std::lock_guard entry_lock(entry->mutex);
        return Response{201, impl_->session_json(*entry)};
    });
}

Response TraceService::get_session(const std::string& session_id) const {
    return guarded([&] {
        const auto entry = impl_->find_session(session_id);
        std::lock_guard lock(entry->mutex);
        Impl::require_live(*entry);
        return Response{200, impl_->session_json(*entry)};
    });
}

Response TraceService::list_sessions(const std::optional<std::string>& dataset_id) const {
    return guarded([&] {
        std::vector<std::shared_ptr<SessionEntry>> entries;
        {
            std::shared_lock lock(impl_->sessions_mutex);
            for (const auto& [id, e] : impl_->sessions) {
                entries.push_back(e);
            }
        }
        json list = json::array();
        for (const auto& e : entries) {
            std::lock_guard lock(e->mutex);
            if (e->deleted || (dataset_id && e->dataset->id != *dataset_id)) {
                continue;
            }
            const auto& history = e->session->entropy_history();
            const bool has_entropy = !history.empty() && e->session->status() != SessionStatus::inconsistent;
            list.push_back({{"session_id", e->id},
                            {"dataset_id", e->dataset->id},
                            {"revision", e->revision},
                            {"status", to_string(e->session->status())},
                            {"candidate_count", e->session->candidates().size()},
                            {"entropy", has_entropy ? json(round6(history.back().value)) : json(nullptr)},
                            {"created_at", e->created_at},
                            {"updated_at", e->updated_at}});
        }
        return Response{200, {{"sessions", list}}};
    });
}

Response TraceService::delete_session(const std::string& session_id) {
    return guarded([&] {
        const auto entry = impl_->find_session(session_id);
        {
            std::lock_guard lock(entry->mutex);
            Impl::require_live(*entry);
            entry->deleted = true;
            fs::remove(impl_->log_path(session_id));
            fs::remove(impl_->snapshot_path(session_id));
        }
        std::unique_lock lock(impl_->sessions_mutex);
        impl_->sessions.erase(session_id);
        return Response{200, {{"deleted", session_id}}};
    });
}

Response TraceService::recommendations(const std::string& session_id, std::optional<std::size_t> top) const {
    return guarded([&] {
        if (top && *top == 0) {
            throw ValidationError("top must be at least 1");
        }
        const auto entry = impl_->find_session(session_id);
        std::lock_guard lock(entry->mutex);
        Impl::require_live(*entry);
        Impl::require_active(*entry);
        const Universe& u = *entry->dataset->universe;
        const auto rec = entry->session->recommend();
        const std::size_t limit = top ? std::min(*top, rec.ranking.size()) : rec.ranking.size();
        json ranking = json::array();
        for (std::size_t i = 0; i < limit; ++i) {
            const auto& r = rec.ranking[i];
            json item = impl_->whatif_json(*entry, r.attribute);
            // Expected survivors if the attribute is acquired: sum of count^2
            // over the defined candidates.
            double sq = 0.0;
            double total = 0.0;
            for (const auto& o : item["outcomes"]) {
                const double c = o["count"].get<double>();
                sq += c * c;
                total += c;
            }
            item["bits"] = round6(r.bits.value);
            item["bits_exact"] = hexfloat(r.bits.value);
            item["expected_candidate_count"] = total > 0 ? round6(sq / total) : 0.0;
            item["whatif"] = std::move(item["outcomes"]);
            item.erase("outcomes");
            ranking.push_back(std::move(item));
        }
        return Response{200,
                        {{"session_id", entry->id},
                         {"revision", entry->revision},
                         {"candidate_count", entry->session->candidates().size()},
                         {"chosen", u.schema()[rec.chosen].name},
                         {"ranking", ranking}}};
    });
}

Response TraceService::post_observation(const std::string& session_id, const nlohmann::json& body) {
    return guarded([&] {
        if (!body.is_object()) {
            throw ValidationError("body must be a JSON object");
        }
        const auto entry = impl_->find_session(session_id);
        std::lock_guard lock(entry->mutex);
        Impl::require_live(*entry);
        Impl::require_revision(*entry, revision_of(body));
        Impl::require_active(*entry);
        const Universe& u = *entry->dataset->universe;
        const Observation obs = observation_of(u, body.at("attribute"), body.at("value"));
        json event = {{"op", "observe"}, {"attribute", u.schema()[obs.attribute].name},
                      {"value", u.schema().value_name(obs.attribute, obs.value)}};
        return impl_->mutate(*entry, std::move(event), [&](Session& s) { s.observe(obs); });
    });
}

Response TraceService::mark_unavailable(const std::string& session_id, const nlohmann::json& body) {
    return guarded([&] {
        if (!body.is_object()) {
            throw ValidationError("body must be a JSON object");
        }
        const auto entry = impl_->find_session(session_id);
        std::lock_guard lock(entry->mutex);
        Impl::require_live(*entry);
        Impl::require_revision(*entry, revision_of(body));
        Impl::require_active(*entry);
        const Universe& u = *entry->dataset->universe;
        const AttributeId a = attribute_of(u, body.at("attribute"));
        if (entry->session->is_settled(a)) {
            throw UsageError("attribute '" + u.schema()[a].name + "' is already settled");
        }
        json event = {{"op", "unavailable"}, {"attribute", u.schema()[a].name}};
        return impl_->mutate(*entry, std::move(event), [&](Session& s) { s.mark_unavailable(a); });
    });
}

Response TraceService::whatif(const std::string& session_id, const std::string& attribute) const {
    return guarded([&] {
        const auto entry = impl_->find_session(session_id);
        std::lock_guard lock(entry->mutex);
        Impl::require_live(*entry);
        Impl::require_active(*entry);
        const AttributeId a = entry->dataset->universe->schema().require(attribute);
        json out = impl_->whatif_json(*entry, a);
        out["session_id"] = entry->id;
        out["revision"] = entry->revision;
        out["candidate_count"] = entry->session->candidates().size();
        return Response{200, out};
    });
}

// ---- HTTP ------------------------------------------------------------------

namespace {

void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
        return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
        send(res, error_response(400, "bad_json", e.what()));
        return std::nullopt;
    }
}

}  // namespace

void TraceService::mount(httplib::Server& server) {
    const std::string api = "/api/v1";
    const std::string sid = "/sessions/([A-Za-z0-9_]+)";

    server.Get(api + "/health", [](const httplib::Request&, httplib::Response& res) {
        send(res, {200, {{"status", "ok"}}});
    });
    server.Post(api + "/datasets", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.has_param("name") ? req.get_param_value("name") : "";
        send(res, upload_dataset(req.body, name));
    });
    server.Get(api + "/datasets", [this](const httplib::Request&, httplib::Response& res) {
        send(res, list_datasets());
    });
    server.Get(api + "/datasets/([A-Za-z0-9_]+)", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, get_dataset(req.matches[1]));
    });
    server.Post(api + "/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) {
            send(res, create_session(*body));
        }
    });
    server.Get(api + "/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> filter;
        if (req.has_param("dataset_id")) {
            filter = req.get_param_value("dataset_id");
        }
        send(res, list_sessions(filter));
    });
    server.Get(api + sid, [this](const httplib::Request& req, httplib::Response& res) {
        send(res, get_session(req.matches[1]));
    });
    server.Delete(api + sid, [this](const httplib::Request& req, httplib::Response& res) {
        send(res, delete_session(req.matches[1]));
    });
    server.Get(api + sid + "/recommendations", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::size_t> top;
        if (req.has_param("top")) {
            const std::string t = req.get_param_value("top");
            char* end = nullptr;
            const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
            if (t.empty() || *end != '\0') {
                send(res, error_response(400, "validation_error", "top must be a positive integer"));
                return;
            }
            top = v;
        }
        send(res, recommendations(req.matches[1], top));
    });
    server.Post(api + sid + "/observations", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) {
            send(res, post_observation(req.matches[1], *body));
        }
    });
    server.Post(api + sid + "/unavailable", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) {
            send(res, mark_unavailable(req.matches[1], *body));
        }
    });
    server.Get(api + sid + "/whatif", [this](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("attribute")) {
            send(res, error_response(400, "validation_error", "attribute query parameter is required"));
            return;
        }
        send(res, whatif(req.matches[1], req.get_param_value("attribute")));
    });
    if (impl_->config.static_dir) {
        if (!server.set_mount_point("/", impl_->config.static_dir->string())) {
            throw ValidationError("static dir '" + impl_->config.static_dir->string() + "' does not exist");
        }
    }
}

void serve(const ServiceConfig& config, const std::function<void(int)>& on_ready, bool handle_signals) {
    TraceService service(config);
    httplib::Server server;
    service.mount(server);

    std::atomic<bool> done{false};
    std::thread watcher;
    if (handle_signals) {
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set, nullptr);
        watcher = std::thread([&server, &done, set] {
            timespec wait{0, 200'000'000};
            while (!done.load()) {
                if (sigtimedwait(&set, nullptr, &wait) > 0) {
                    server.stop();
                    return;
                }
            }
        });
    }

    int port = config.port;
    if (port == 0) {
        port = server.bind_to_any_port(config.host);
    } else if (!server.bind_to_port(config.host, port)) {
        port = -1;
    }
    if (port < 0) {
        done = true;
        if (watcher.joinable()) {
            watcher.join();
        }
        throw ValidationError("cannot bind " + config.host + ":" + std::to_string(config.port));
    }
    if (on_ready) {
        on_ready(port);
    }
    server.listen_after_bind();
    done = true;
    if (watcher.joinable()) {
        watcher.join();
    }
}

}  // namespace idtrace::service
