#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <string>

#include <json.hpp>

#include "icdh/detection.hpp"
#include "icdh/kmeans.hpp"
#include "icdh/mlp.hpp"
#include "icdh/wallviz.hpp"

namespace icdh {

struct AppConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string store_dir = "icdh_store";
    std::string palette_path;  // empty: built-in palette
    std::string model_path;    // installed into an empty store at startup
    std::string dataset_path;  // imported into an empty store at startup
    std::string detector_url;  // used when a request carries no detections
    int detector_timeout_ms = 5000;
    double min_confidence = kDefaultMinConfidence;
    KMeansConfig kmeans;
    SegmentationConfig segmentation;
    TrainConfig train;
    std::uint64_t retrain_seed = 0;
    double train_fraction = 0.8;
};

namespace detail {

template <class T>
void read_opt(const nlohmann::json& doc, const char* key, T& target)
{
    if (!doc.contains(key)) return;
    try {
        target = doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config field '") + key + "': " + e.what());
    }
}

} // namespace detail

inline AppConfig config_from_json(const nlohmann::json& doc, AppConfig c = {})
{
    if (!doc.is_object()) throw ParseError("config document must be an object");
    using detail::read_opt;
    read_opt(doc, "host", c.host);
    read_opt(doc, "port", c.port);
    read_opt(doc, "store_dir", c.store_dir);
    read_opt(doc, "palette_path", c.palette_path);
    read_opt(doc, "model_path", c.model_path);
    read_opt(doc, "dataset_path", c.dataset_path);
    read_opt(doc, "detector_url", c.detector_url);
    read_opt(doc, "detector_timeout_ms", c.detector_timeout_ms);
    read_opt(doc, "min_confidence", c.min_confidence);
    read_opt(doc, "kmeans_k", c.kmeans.k);
    read_opt(doc, "kmeans_restarts", c.kmeans.restarts);
    read_opt(doc, "kmeans_max_samples", c.kmeans.max_samples);
    read_opt(doc, "kmeans_seed", c.kmeans.seed);
    read_opt(doc, "edge_threshold", c.segmentation.edge_threshold);
    read_opt(doc, "seed_rows", c.segmentation.seed_rows);
    read_opt(doc, "box_margin", c.segmentation.box_margin);
    read_opt(doc, "epochs", c.train.epochs);
    read_opt(doc, "learning_rate", c.train.learning_rate);
    read_opt(doc, "dropout_rate", c.train.dropout_rate);
    read_opt(doc, "batch_size", c.train.batch_size);
    read_opt(doc, "retrain_seed", c.retrain_seed);
    read_opt(doc, "train_fraction", c.train_fraction);
    return c;
}

/// Applies ICDH_* environment variables on top of `c`. `getenv` is injectable
/// for tests.
inline AppConfig apply_env_overrides(AppConfig c, const std::function<const char*(const char*)>& getenv = ::getenv)
{
    auto str = [&](const char* name, std::string& target) {
        if (const char* v = getenv(name)) target = v;
    };
    auto num = [&](const char* name, auto& target) {
        const char* v = getenv(name);
        if (!v) return;
        using T = std::decay_t<decltype(target)>;
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<T>) {
                target = std::stod(v, &used);
            } else if constexpr (std::is_unsigned_v<T>) {
                target = static_cast<T>(std::stoull(v, &used));
            } else {
                target = static_cast<T>(std::stoll(v, &used));
            }
            if (v[used] != '\0') throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ParseError(std::string("environment variable ") + name + ": not a number: '" + v + "'");
        }
    };
    str("ICDH_HOST", c.host);
    num("ICDH_PORT", c.port);
    str("ICDH_STORE_DIR", c.store_dir);
    str("ICDH_PALETTE_PATH", c.palette_path);
    str("ICDH_MODEL_PATH", c.model_path);
    str("ICDH_DATASET_PATH", c.dataset_path);
    str("ICDH_DETECTOR_URL", c.detector_url);
    num("ICDH_DETECTOR_TIMEOUT_MS", c.detector_timeout_ms);
    num("ICDH_MIN_CONFIDENCE", c.min_confidence);
    num("ICDH_KMEANS_SEED", c.kmeans.seed);
    num("ICDH_EDGE_THRESHOLD", c.segmentation.edge_threshold);
    num("ICDH_SEED_ROWS", c.segmentation.seed_rows);
    num("ICDH_BOX_MARGIN", c.segmentation.box_margin);
    num("ICDH_EPOCHS", c.train.epochs);
    num("ICDH_LEARNING_RATE", c.train.learning_rate);
    num("ICDH_RETRAIN_SEED", c.retrain_seed);
    return c;
}

inline void validate(const AppConfig& c)
{
    if (c.port < 0 || c.port > 65535) throw ValidationError("config: port out of range");
    if (!(c.min_confidence >= 0.0 && c.min_confidence <= 1.0)) {
        throw ValidationError("config: min_confidence must be in [0,1]");
    }
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
        throw ValidationError("config: train_fraction must be in (0,1)");
    }
    if (c.detector_timeout_ms <= 0) throw ValidationError("config: detector_timeout_ms must be positive");
    c.kmeans.validate();
    c.train.validate();
}

/// Defaults, then the optional file, then the environment.
inline AppConfig load_config(const std::string& path = {})
{
    AppConfig c;
    if (!path.empty()) c = config_from_json(read_json_file(path), c);
    c = apply_env_overrides(std::move(c));
    validate(c);
    return c;
}

} // namespace icdh
