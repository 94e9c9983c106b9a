#include "bombus/interface.hpp"

#include "bombus/ensemble.hpp"
#include "bombus/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>

namespace bombus::interface {

using nlohmann::json;

std::string error_json(std::string_view code, std::string_view message) {
    return json{{"error", code}, {"message", message}}.dump();
}

Service::Service(std::size_t max_body_bytes) : max_body_bytes_(max_body_bytes) {}

void Service::set_models(std::vector<std::shared_ptr<const model::TrainedModel>> models, std::string model_id) {
    if (models.empty()) {
        throw Error("empty_ensemble", "the service needs at least one model");
    }
    for (const auto& m : models) {
        if (!m->catalog.same_labels(models.front()->catalog)) {
            throw Error("catalog_mismatch", "served models disagree on the class catalog");
        }
    }
    auto loaded = std::make_shared<const Loaded>(Loaded{std::move(models), std::move(model_id)});
    std::lock_guard lock(mutex_);
    loaded_ = std::move(loaded);
}

void Service::load(const std::vector<std::filesystem::path>& directories, std::string model_id) {
    std::vector<std::shared_ptr<const model::TrainedModel>> models;
    for (const auto& dir : directories) {
        models.push_back(std::make_shared<const model::TrainedModel>(model::load_model(dir)));
    }
    set_models(std::move(models), std::move(model_id));
}

std::shared_ptr<const Service::Loaded> Service::snapshot() const {
    std::lock_guard lock(mutex_);
    return loaded_;
}

bool Service::ready() const {
    return snapshot() != nullptr;
}

HttpResponse Service::health() const {
    const auto loaded = snapshot();
    if (!loaded) {
        return {503, json{{"status", "loading"}}.dump()};
    }
    return {200, json{{"status", "ok"}, {"model_id", loaded->model_id}}.dump()};
}

HttpResponse Service::predict(std::string_view body) const {
    const auto start = std::chrono::steady_clock::now();
    const auto loaded = snapshot();
    if (!loaded) {
        return {503, error_json("model_not_loaded", "model is still loading")};
    }
    if (body.empty()) {
        return {400, error_json("empty_body", "request body is empty")};
    }
    if (body.size() > max_body_bytes_) {
        return {413, error_json("body_too_large", "request body exceeds " + std::to_string(max_body_bytes_) + " bytes")};
    }
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()), body.size());
    dataset::RawImage raw;
    try {
        raw = dataset::decode_image(bytes);
    } catch (const Error& e) {
        return {400, error_json(e.code(), e.what())};
    }

    std::vector<ensemble::ProbabilityMatrix> matrices;
    const std::vector<std::string> ids{"request"};
    for (const auto& m : loaded->models) {
        const auto image = dataset::standardize(raw, m->backbone->spec().input_geometry);
        matrices.push_back(ensemble::predict(*m, ids, std::span(&image, 1)));
    }
    const auto scores = ensemble::sum_softmax(matrices);
    const int k = std::min<int>(3, static_cast<int>(scores.catalog.size()));
    const auto top = ensemble::top_k(scores, k).front();

    json predictions = json::array();
    for (std::size_t i = 0; i < top.ranked_labels.size(); ++i) {
        predictions.push_back(json{{"label", top.ranked_labels[i]}, {"score", top.scores[i]}});
    }
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    served_.fetch_add(1);
    return {200, json{{"predictions", predictions}, {"model_id", loaded->model_id}, {"latency_ms", latency}}.dump()};
}

void serve(Service& service, const std::string& host, int port, std::size_t max_body_bytes) {
    httplib::Server server;
    server.set_payload_max_length(max_body_bytes);
    server.Post("/predict", [&service](const httplib::Request& request, httplib::Response& response) {
        const auto result = service.predict(request.body);
        response.status = result.status;
        response.set_content(result.body, "application/json; charset=utf-8");
    });
    server.Get("/healthz", [&service](const httplib::Request&, httplib::Response& response) {
        const auto result = service.health();
        response.status = result.status;
        response.set_content(result.body, "application/json; charset=utf-8");
    });
    // Bodies over the cap are cut off by the server before the handler runs.
    server.set_error_handler([](const httplib::Request&, httplib::Response& response) {
        if (response.status == 413) {
            response.set_content(error_json("body_too_large", "request body exceeds the configured cap"),
                                 "application/json; charset=utf-8");
        }
    });
    if (!server.listen(host, port)) {
        throw Error("listen_failed", "cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace bombus::interface
