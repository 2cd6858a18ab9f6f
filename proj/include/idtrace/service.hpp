#pragma once

// HTTP facade for interactive tracing: a dataset registry and persistent,
// replayable sessions. Every route lives under /api/v1. The handler methods
// are callable without a network so tests can drive them directly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace httplib {
class Server;
}

namespace idtrace::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path data_dir = "idtrace-data";
    std::size_t display_threshold = 50;  // survivors listed at or below this count
    std::optional<std::filesystem::path> static_dir;
    std::size_t snapshot_every = 16;  // mutations between session snapshots

    // Overrides from IDTRACE_LISTEN (host:port), IDTRACE_DATA_DIR,
    // IDTRACE_DISPLAY_THRESHOLD and IDTRACE_STATIC_DIR when set.
    void apply_env();
    // "host:port" or ":port". ValidationError when malformed.
    void set_listen(std::string_view listen);
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

class TraceService {
public:
    // Creates data_dir if needed, loads datasets and replays every session log.
    explicit TraceService(ServiceConfig config);
    ~TraceService();
    TraceService(const TraceService&) = delete;
    TraceService& operator=(const TraceService&) = delete;

    [[nodiscard]] const ServiceConfig& config() const noexcept;

    // Same CSV bytes, same record: uploads are idempotent by digest.
    [[nodiscard]] Response upload_dataset(std::string_view csv, const std::string& name);
    [[nodiscard]] Response list_datasets() const;
    [[nodiscard]] Response get_dataset(const std::string& dataset_id) const;

    // body: {"dataset_id": ..., "known": [{"attribute": a, "value": v}] or ["a=v", ...]}
    [[nodiscard]] Response create_session(const nlohmann::json& body);
    [[nodiscard]] Response get_session(const std::string& session_id) const;
    [[nodiscard]] Response list_sessions(const std::optional<std::string>& dataset_id) const;
    [[nodiscard]] Response delete_session(const std::string& session_id);
    [[nodiscard]] Response recommendations(const std::string& session_id, std::optional<std::size_t> top) const;
    // body: {"attribute": a, "value": v, "expected_revision": r}
    [[nodiscard]] Response post_observation(const std::string& session_id, const nlohmann::json& body);
    // body: {"attribute": a, "expected_revision": r}
    [[nodiscard]] Response mark_unavailable(const std::string& session_id, const nlohmann::json& body);
    [[nodiscard]] Response whatif(const std::string& session_id, const std::string& attribute) const;

    // Registers the routes (and the static mount, if configured).
    void mount(httplib::Server& server);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Binds, calls on_ready with the bound port, and serves until SIGINT/SIGTERM
// (when handle_signals) or until the process ends.
void serve(const ServiceConfig& config, const std::function<void(int)>& on_ready = {}, bool handle_signals = true);

}  // namespace idtrace::service
