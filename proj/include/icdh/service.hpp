#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icdh/config.hpp"
#include "icdh/crypto.hpp"
#include "icdh/detection.hpp"
#include "icdh/detection_http.hpp"
#include "icdh/features.hpp"
#include "icdh/kmeans.hpp"
#include "icdh/mlp.hpp"
#include "icdh/model_io.hpp"
#include "icdh/store.hpp"
#include "icdh/training.hpp"
#include "icdh/wallviz.hpp"

namespace icdh {

/// Holds the serving model. Readers take a snapshot; a swap replaces the
/// pointer, so a reader sees either the old or the new model in full.
class ModelHolder {
public:
    std::shared_ptr<const MlpModel> get() const
    {
        std::lock_guard lock(mutex_);
        return model_;
    }
    void set(std::shared_ptr<const MlpModel> m)
    {
        std::lock_guard lock(mutex_);
        model_ = std::move(m);
    }

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const MlpModel> model_;
};

struct ConsultationRequest {
    Bytes image;
    RoomAttributes attrs;
    UserPreferences prefs;
    // Exactly one of these is set once the request reaches `consult`.
    std::optional<nlohmann::json> detections;
    std::optional<std::string> detector_url;
};

struct FurnitureColor {
    Detection detection;
    Rgb8 dominant;
};

struct RenderedImage {
    int family_id = 0;
    Bytes png;
};

struct ConsultationResult {
    std::string consultation_id;
    std::uint64_t model_version = 0;
    Recommendation recommendation;
    std::vector<FurnitureColor> furniture;
    std::vector<RenderedImage> renders; // 3, or empty when degraded
    std::optional<std::string> warning;
    FeatureVector features;
    int image_width = 0;
    int image_height = 0;
    std::string image_sha256;

    bool degraded() const noexcept { return renders.empty(); }
};

enum class RenderEmbedding { none, base64, url };

inline nlohmann::json rgb_to_json(Rgb8 c)
{
    return {{"r", c.r}, {"g", c.g}, {"b", c.b}, {"decimal", rgb_to_decimal(c)}};
}

/// Result document. Keys are emitted in sorted order and contain no clock
/// values, so equal results serialize to equal bytes.
inline nlohmann::json result_document(const ConsultationResult& r, const Palette& palette,
                                      RenderEmbedding embed = RenderEmbedding::none)
{
    auto recs = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) {
        const auto& c = r.recommendation.choices[i];
        recs.push_back({{"rank", i + 1},
                        {"family_id", c.family_id},
                        {"family", palette[c.family_id].name},
                        {"probability", c.probability},
                        {"color", rgb_to_json(palette[c.family_id].representative)}});
    }
    auto furniture = nlohmann::json::array();
    for (const auto& f : r.furniture) {
        furniture.push_back({{"class", std::string(to_string(f.detection.cls))},
                             {"confidence", f.detection.confidence},
                             {"box",
                              {{"x", f.detection.box.x},
                               {"y", f.detection.box.y},
                               {"w", f.detection.box.w},
                               {"h", f.detection.box.h}}},
                             {"dominant_color", rgb_to_json(f.dominant)}});
    }
    auto renders = nlohmann::json::array();
    for (std::size_t i = 0; i < r.renders.size(); ++i) {
        nlohmann::json e = {{"rank", i + 1},
                            {"family_id", r.renders[i].family_id},
                            {"png_sha256", sha256_hex(r.renders[i].png)}};
        if (embed == RenderEmbedding::base64) e["png_base64"] = base64_encode(r.renders[i].png);
        if (embed == RenderEmbedding::url) {
            e["url"] = "/consultations/" + r.consultation_id + "/renders/" + std::to_string(i + 1) + ".png";
        }
        renders.push_back(std::move(e));
    }
    return {{"consultation_id", r.consultation_id},
            {"model_version", r.model_version},
            {"image", {{"width", r.image_width}, {"height", r.image_height}, {"sha256", r.image_sha256}}},
            {"recommendations", std::move(recs)},
            {"furniture", std::move(furniture)},
            {"renders", std::move(renders)},
            {"degraded", r.degraded()},
            {"warning", r.warning ? nlohmann::json(*r.warning) : nlohmann::json(nullptr)}};
}

/// content hash of (feature vector, model version, image digest)
inline std::string consultation_id(const FeatureVector& fv, std::uint64_t model_version, const std::string& image_sha)
{
    Bytes payload;
    for (double v : fv.values) detail::put_le(payload, v);
    detail::put_le(payload, model_version);
    Sha256 h;
    h.update("icdh-consultation-v1");
    h.update(payload.data(), payload.size());
    h.update(image_sha);
    return h.hex();
}

/// Wall segmentation and one recolored PNG per family. Throws
/// SegmentationFailed when no wall can be found.
inline std::vector<RenderedImage> render_families(const Image& img, const std::vector<BoundingBox>& boxes,
                                                  const std::vector<int>& families, const Palette& palette,
                                                  const SegmentationConfig& seg)
{
    const auto mask = segment_wall(img, boxes, seg);
    std::vector<RenderedImage> out;
    for (int id : families) out.push_back({id, encode_png(recolor(img, mask, palette[id]))});
    return out;
}

struct FeedbackAck {
    std::string consultation_id;
    bool accepted = false;
    std::size_t dataset_rows = 0;
};

class Service {
public:
    explicit Service(AppConfig cfg, std::optional<Palette> palette = std::nullopt)
        : cfg_(std::move(cfg)),
          palette_(palette ? std::move(*palette)
                           : (cfg_.palette_path.empty() ? default_palette() : load_palette(cfg_.palette_path))),
          store_(cfg_.store_dir)
    {
        validate(cfg_);
        if (!cfg_.dataset_path.empty() && store_.dataset_rows() == 0) {
            store_.import_dataset_if_empty(read_dataset(cfg_.dataset_path));
        }
        if (auto m = store_.load_current_model()) {
            model_.set(std::make_shared<const MlpModel>(std::move(*m)));
        } else if (!cfg_.model_path.empty()) {
            install_model(load_model(cfg_.model_path));
        }
    }

    const AppConfig& config() const noexcept { return cfg_; }
    const Palette& palette() const noexcept { return palette_; }
    Store& store() noexcept { return store_; }
    bool has_model() const { return model_.get() != nullptr; }
    std::uint64_t model_version() const
    {
        auto m = model_.get();
        return m ? m->model_version : 0;
    }

    /// Called by `retrain` after the new model is saved and before it is
    /// swapped in.
    std::function<void(std::uint64_t new_version)> before_swap;

    /// Saves `m` as the next model version and serves it.
    std::uint64_t install_model(MlpModel m, const nlohmann::json& metadata = nlohmann::json::object())
    {
        std::lock_guard lock(retrain_mutex_);
        return install_locked(std::move(m), metadata);
    }

    ConsultationResult consult(const ConsultationRequest& req)
    {
        const auto model = model_.get();
        if (!model) throw Error("no model installed");
        if (req.detections.has_value() == req.detector_url.has_value()) {
            throw ValidationError("consultation needs exactly one detection source");
        }
        req.prefs.validate();
        const Image img = decode_image(req.image);

        DetectionSet all;
        if (req.detections) {
            all = parse_detections(*req.detections, img.width, img.height);
        } else {
            HttpProviderOptions opts;
            opts.timeout = std::chrono::milliseconds(cfg_.detector_timeout_ms);
            all = fetch_detections_http(*req.detector_url, req.image, img.width, img.height, opts);
        }
        const auto kept = filter_furniture(all, cfg_.min_confidence);

        ConsultationResult r;
        r.image_width = img.width;
        r.image_height = img.height;
        r.image_sha256 = sha256_hex(req.image);
        std::vector<FurnitureFeature> features;
        std::vector<BoundingBox> boxes;
        for (std::size_t i = 0; i < kept.detections.size(); ++i) {
            const auto& d = kept.detections[i];
            KMeansConfig km = cfg_.kmeans;
            km.seed = derive_seed(cfg_.kmeans.seed, i);
            const Rgb8 c = dominant_color(img, d.box, km);
            r.furniture.push_back({d, c});
            features.push_back({d.cls, c});
            boxes.push_back(d.box);
        }
        r.features = encode(req.attrs, req.prefs, features);
        r.recommendation = predict_top3(*model, r.features);
        r.model_version = model->model_version;
        r.consultation_id = consultation_id(r.features, r.model_version, r.image_sha256);

        std::vector<int> families;
        for (const auto& c : r.recommendation.choices) families.push_back(c.family_id);
        try {
            r.renders = render_families(img, boxes, families, palette_, cfg_.segmentation);
        } catch (const SegmentationFailed& e) {
            r.warning = std::string("renders unavailable: ") + e.what();
        }

        StoredConsultation stored{r.consultation_id, r.features,
                                  {families[0], families[1], families[2]},
                                  result_document(r, palette_, RenderEmbedding::url)};
        std::vector<Bytes> pngs;
        for (const auto& ri : r.renders) pngs.push_back(ri.png);
        store_.put_consultation(stored, pngs);
        return r;
    }

    std::optional<nlohmann::json> stored_result(const std::string& id) const
    {
        auto c = store_.find_consultation(id);
        if (!c) return std::nullopt;
        return c->result;
    }

    /// `accepted` = family id, or nullopt for a rejection.
    FeedbackAck record_feedback(const std::string& id, std::optional<int> accepted)
    {
        const auto c = store_.find_consultation(id);
        if (!c) throw NotFound("unknown consultation: " + id);
        if (accepted &&
            std::find(c->recommended.begin(), c->recommended.end(), *accepted) == c->recommended.end()) {
            throw ValidationError("family " + std::to_string(*accepted) +
                                  " is not among the recommendations of consultation " + id);
        }
        store_.append_feedback({id, accepted, utc_timestamp()});
        FeedbackAck ack{id, accepted.has_value(), 0};
        ack.dataset_rows = accepted ? store_.append_training_row({c->features, *accepted}) : store_.dataset_rows();
        return ack;
    }

    /// Trains a fresh model on a snapshot of the dataset and swaps it in.
    std::uint64_t retrain(std::uint64_t seed)
    {
        std::lock_guard lock(retrain_mutex_);
        const Dataset d = store_.dataset_snapshot();
        if (d.empty()) throw DomainError("retrain: dataset is empty");
        Dataset train_set, val_set;
        if (d.size() >= 2) {
            std::tie(train_set, val_set) = split_shuffle(d, cfg_.train_fraction, seed);
        }
        if (train_set.empty() || val_set.empty()) train_set = val_set = d;
        TrainConfig tc = cfg_.train;
        tc.seed = seed;
        const auto run = train_with_fallback(seed, train_set, val_set, tc);
        auto meta = training_run_to_json(run, seed, train_set.size(), val_set.size());
        meta["dataset_rows"] = d.size();
        return install_locked(run.result.model, meta);
    }

    nlohmann::json model_info() const
    {
        return {{"model_version", model_version()},
                {"train_config", train_config_to_json(cfg_.train)},
                {"palette", palette_to_json(palette_)}};
    }

private:
    std::uint64_t install_locked(MlpModel m, const nlohmann::json& metadata)
    {
        if (m.dims() != default_layer_dims()) throw ValidationError("model has unexpected layer dimensions");
        m.model_version = store_.current_version() + 1;
        store_.save_model_version(m, metadata);
        auto next = std::make_shared<const MlpModel>(std::move(m));
        if (before_swap) before_swap(next->model_version);
        model_.set(next);
        return next->model_version;
    }

    AppConfig cfg_;
    Palette palette_;
    Store store_;
    ModelHolder model_;
    std::mutex retrain_mutex_;
};

} // namespace icdh
