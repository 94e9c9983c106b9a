#pragma once

#include "bombus/error.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>

namespace bombus {

/// Strict reader over one JSON object: every key must be consumed, so a
/// misspelt key is an error rather than a silently ignored setting.
class JsonReader {
public:
    JsonReader(const nlohmann::json& object, std::string path) : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) {
            throw Error("invalid_config", where() + "expected an object");
        }
    }

    bool has(const std::string& key) const { return object_.contains(key) && !object_.at(key).is_null(); }

    const nlohmann::json& raw(const std::string& key) {
        seen_.insert(key);
        const auto it = object_.find(key);
        if (it == object_.end()) {
            throw Error("invalid_config", where() + "missing key '" + key + "'");
        }
        return *it;
    }

    template <typename T>
    T get(const std::string& key) {
        const auto& value = raw(key);
        try {
            return value.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw Error("invalid_config", where() + "key '" + key + "' has the wrong type");
        }
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!has(key)) {
            return fallback;
        }
        return get<T>(key);
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) {
            return std::nullopt;
        }
        return get<T>(key);
    }

    std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    // Throws on the first key that was never read.
    void finish() const {
        for (const auto& item : object_.items()) {
            if (!seen_.contains(item.key())) {
                throw Error("unknown_key", "unknown key '" + child_path(item.key()) + "'");
            }
        }
    }

private:
    std::string where() const { return path_.empty() ? std::string() : path_ + ": "; }

    const nlohmann::json& object_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace bombus
