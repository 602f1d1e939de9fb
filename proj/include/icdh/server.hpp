#pragma once

#include <regex>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "icdh/crypto.hpp"
#include "icdh/service.hpp"

namespace icdh {

/// HTTP status for each error kind.
inline int http_status_for(const std::exception& e)
{
    if (dynamic_cast<const NotFound*>(&e)) return 404;
    if (dynamic_cast<const ProviderUnavailable*>(&e)) return 502;
    if (dynamic_cast<const ValidationError*>(&e)) return 422;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
        dynamic_cast<const DomainError*>(&e) || dynamic_cast<const RangeError*>(&e)) {
        return 400;
    }
    return 500;
}

inline std::string error_kind(const std::exception& e)
{
    if (dynamic_cast<const NotFound*>(&e)) return "not_found";
    if (dynamic_cast<const ProviderUnavailable*>(&e)) return "provider_unavailable";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation_error";
    if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
    if (dynamic_cast<const FormatError*>(&e)) return "format_error";
    if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
    if (dynamic_cast<const RangeError*>(&e)) return "range_error";
    if (dynamic_cast<const IoError*>(&e)) return "io_error";
    return "internal_error";
}

namespace detail {

inline void reply_json(httplib::Response& res, const nlohmann::json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void reply_error(httplib::Response& res, const std::exception& e)
{
    reply_json(res, {{"error", error_kind(e)}, {"message", e.what()}}, http_status_for(e));
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn)
{
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const std::exception& e) {
            reply_error(res, e);
        }
    };
}

inline nlohmann::json body_json(const httplib::Request& req)
{
    return parse_json_text(req.body, "request body");
}

} // namespace detail

/// Builds a request from either a JSON body
///   { "image_base64": ..., "attributes": {...}, "detections": {...} | "detector_url": ... }
/// or multipart form fields image (file), attributes, detections, detector_url.
/// Without a detection source the configured detector endpoint is used.
inline ConsultationRequest parse_consult_request(const httplib::Request& req, const AppConfig& cfg)
{
    ConsultationRequest out;
    nlohmann::json attrs;
    if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw ParseError("multipart consult request needs an 'image' part");
        const auto& img = req.get_file_value("image").content;
        out.image.assign(img.begin(), img.end());
        if (!req.has_file("attributes")) throw ParseError("multipart consult request needs an 'attributes' part");
        attrs = parse_json_text(req.get_file_value("attributes").content, "attributes part");
        if (req.has_file("detections")) {
            out.detections = parse_json_text(req.get_file_value("detections").content, "detections part");
        }
        if (req.has_file("detector_url")) out.detector_url = req.get_file_value("detector_url").content;
    } else {
        const auto doc = detail::body_json(req);
        if (!doc.is_object()) throw ParseError("consult request body must be an object");
        if (!doc.contains("image_base64") || !doc["image_base64"].is_string()) {
            throw ParseError("consult request needs a string 'image_base64'");
        }
        out.image = base64_decode(doc["image_base64"].get<std::string>());
        if (!doc.contains("attributes")) throw ParseError("consult request needs 'attributes'");
        attrs = doc["attributes"];
        if (doc.contains("detections")) out.detections = doc["detections"];
        if (doc.contains("detector_url")) {
            if (!doc["detector_url"].is_string()) throw ParseError("'detector_url' must be a string");
            out.detector_url = doc["detector_url"].get<std::string>();
        }
    }
    parse_attributes(attrs, out.attrs, out.prefs);
    if (!out.detections && !out.detector_url) {
        if (cfg.detector_url.empty()) {
            throw ValidationError("no detections given and no detector endpoint configured");
        }
        out.detector_url = cfg.detector_url;
    }
    return out;
}

/// Registers every route of the service on `server`.
inline void install_routes(httplib::Server& server, Service& svc)
{
    using detail::guarded;
    using detail::reply_json;

    server.Get("/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        reply_json(res, {{"status", svc.has_model() ? "ok" : "no_model"}, {"model_version", svc.model_version()}});
    }));

    server.Get("/model", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        reply_json(res, svc.model_info());
    }));

    server.Post("/consult", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        if (!svc.has_model()) {
            reply_json(res, {{"error", "no_model"}, {"message", "no model installed"}}, 503);
            return;
        }
        const auto request = parse_consult_request(req, svc.config());
        const auto result = svc.consult(request);
        reply_json(res, result_document(result, svc.palette(), RenderEmbedding::base64));
    }));

    server.Get(R"(/consultations/([0-9a-f]{64}))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const auto doc = svc.stored_result(req.matches[1]);
        if (!doc) throw NotFound("unknown consultation: " + std::string(req.matches[1]));
        reply_json(res, *doc);
    }));

    server.Get(R"(/consultations/([0-9a-f]{64})/renders/([1-3])\.png)",
               guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                   const std::string id = req.matches[1];
                   if (!svc.stored_result(id)) throw NotFound("unknown consultation: " + id);
                   const auto path = svc.store().render_path(id, std::stoul(req.matches[2]));
                   if (!std::filesystem::exists(path)) throw NotFound("no render " + std::string(req.matches[2]));
                   const auto bytes = read_file_bytes(path);
                   res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
               }));

    server.Post("/feedback", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const auto doc = detail::body_json(req);
        if (!doc.is_object() || !doc.contains("consultation_id") || !doc["consultation_id"].is_string()) {
            throw ParseError("feedback needs a string 'consultation_id'");
        }
        std::optional<int> accepted;
        const bool has_accept = doc.contains("accepted_family_id");
        const bool rejected = doc.value("rejected", false);
        if (has_accept == rejected) {
            throw ParseError("feedback needs exactly one of 'accepted_family_id' or 'rejected': true");
        }
        if (has_accept) {
            if (!doc["accepted_family_id"].is_number_integer()) throw ParseError("'accepted_family_id' must be an integer");
            accepted = doc["accepted_family_id"].get<int>();
        }
        const auto ack = svc.record_feedback(doc["consultation_id"].get<std::string>(), accepted);
        reply_json(res, {{"consultation_id", ack.consultation_id},
                         {"outcome", ack.accepted ? "accepted" : "rejected"},
                         {"dataset_rows", ack.dataset_rows}});
    }));

    server.Post("/retrain", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t seed = svc.config().retrain_seed;
        if (!req.body.empty()) {
            const auto doc = detail::body_json(req);
            if (doc.contains("seed")) {
                if (!doc["seed"].is_number_unsigned()) throw ParseError("'seed' must be a nonnegative integer");
                seed = doc["seed"].get<std::uint64_t>();
            }
        }
        reply_json(res, {{"model_version", svc.retrain(seed)}});
    }));
}

} // namespace icdh
