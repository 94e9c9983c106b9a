#pragma once

#include "bombus/config.hpp"
#include "bombus/model.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace bombus::interface {

/// Entry point behind the `bombus` executable. Errors are reported on `err`
/// as one JSON line, `{"error": <code>, "message": <text>}`, with a nonzero
/// return value. `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, char** argv);

inline constexpr std::size_t kDefaultMaxBodyBytes = 10u << 20;

struct HttpResponse {
    int status = 200;
    std::string body;  // JSON
};

/// Top-3 inference over one model or a softmax-sum of several. Loaded models
/// are immutable, so predict() may run concurrently.
class Service {
public:
    explicit Service(std::size_t max_body_bytes = kDefaultMaxBodyBytes);

    void set_models(std::vector<std::shared_ptr<const model::TrainedModel>> models, std::string model_id);
    // Loads artifacts; until it returns, predict() answers 503.
    void load(const std::vector<std::filesystem::path>& directories, std::string model_id);

    bool ready() const;
    HttpResponse predict(std::string_view body) const;
    HttpResponse health() const;
    std::uint64_t requests_served() const noexcept { return served_.load(); }

private:
    struct Loaded {
        std::vector<std::shared_ptr<const model::TrainedModel>> models;
        std::string model_id;
    };

    std::shared_ptr<const Loaded> snapshot() const;

    std::size_t max_body_bytes_;
    mutable std::mutex mutex_;
    std::shared_ptr<const Loaded> loaded_;
    mutable std::atomic<std::uint64_t> served_{0};
};

// Blocks serving POST /predict and GET /healthz until the process exits.
void serve(Service& service, const std::string& host, int port, std::size_t max_body_bytes);

std::string error_json(std::string_view code, std::string_view message);

}  // namespace bombus::interface
