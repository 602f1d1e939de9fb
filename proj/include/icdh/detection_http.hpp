#pragma once

#include <chrono>
#include <regex>
#include <string>

#include <httplib.h>

#include "icdh/detection.hpp"
#include "icdh/image.hpp"

namespace icdh {

struct HttpProviderOptions {
    std::chrono::milliseconds timeout{5000};
};

namespace detail {

struct ParsedUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

inline ParsedUrl split_url(const std::string& url)
{
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw ValidationError("malformed detector endpoint URL: " + url);
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

} // namespace detail

/// POSTs the raw image to a detector service and validates its reply with
/// the same rules as the file provider.
inline DetectionSet fetch_detections_http(const std::string& endpoint, const Bytes& image_bytes,
                                          int image_width, int image_height,
                                          const HttpProviderOptions& opts = {})
{
    const auto url = detail::split_url(endpoint);
    const char* content_type = is_png(image_bytes) ? "image/png" : "image/jpeg";

    httplib::Client cli(url.origin);
    cli.set_connection_timeout(opts.timeout);
    cli.set_read_timeout(opts.timeout);
    cli.set_write_timeout(opts.timeout);
    auto res = cli.Post(url.path, reinterpret_cast<const char*>(image_bytes.data()), image_bytes.size(),
                        content_type);
    if (!res) {
        throw ProviderUnavailable("detector at " + endpoint + " unreachable: " +
                                  httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw ProviderUnavailable("detector at " + endpoint + " returned HTTP " +
                                  std::to_string(res->status));
    }
    return parse_detections(parse_json_text(res->body, endpoint), image_width, image_height);
}

inline DetectionSet fetch_detections_http(const std::string& endpoint, const Bytes& image_bytes,
                                          const HttpProviderOptions& opts = {})
{
    const Image img = decode_image(image_bytes);
    return fetch_detections_http(endpoint, image_bytes, img.width, img.height, opts);
}

} // namespace icdh
