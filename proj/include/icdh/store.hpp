#pragma once

#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icdh/dataset.hpp"
#include "icdh/error.hpp"
#include "icdh/image.hpp"
#include "icdh/model_io.hpp"

namespace icdh {

struct StoredConsultation {
    std::string id;
    FeatureVector features;
    std::array<int, 3> recommended{};
    nlohmann::json result; // result document, renders referenced by URL
};

struct FeedbackRecord {
    std::string consultation_id;
    std::optional<int> accepted_family; // nullopt: rejected
    std::string timestamp;              // UTC, ISO 8601
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now())
{
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json feedback_to_json(const FeedbackRecord& f)
{
    nlohmann::json j = {{"consultation_id", f.consultation_id}, {"timestamp", f.timestamp}};
    if (f.accepted_family) {
        j["outcome"] = "accepted";
        j["family_id"] = *f.accepted_family;
    } else {
        j["outcome"] = "rejected";
    }
    return j;
}

/// On-disk state of the service, rooted at one directory:
///
///   dataset.csv          training rows (append-only)
///   consultations.jsonl  one consultation per line
///   feedback.jsonl       one feedback record per line
///   renders/<id>_<rank>.png
///   models/model_v<N>.bin, models/model_v<N>.json, models/CURRENT
///
/// Consultation and feedback appends share one lock; dataset appends take a
/// separate single-writer lock so a retrain can snapshot the dataset while
/// consultations continue.
class Store {
public:
    explicit Store(std::filesystem::path root) : root_(std::move(root))
    {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(root_ / "renders", ec);
        fs::create_directories(root_ / "models", ec);
        if (ec) throw IoError("cannot create store at " + root_.string() + ": " + ec.message());
        load_journals();
    }

    const std::filesystem::path& root() const noexcept { return root_; }
    std::string dataset_path() const { return (root_ / "dataset.csv").string(); }

    // Consultations and feedback.

    std::optional<StoredConsultation> find_consultation(const std::string& id) const
    {
        std::lock_guard lock(meta_mutex_);
        auto it = consultations_.find(id);
        if (it == consultations_.end()) return std::nullopt;
        return it->second;
    }

    /// Persists a consultation and its renders; a known id is left untouched.
    void put_consultation(const StoredConsultation& c, const std::vector<Bytes>& renders)
    {
        std::lock_guard lock(meta_mutex_);
        if (consultations_.count(c.id)) return;
        for (std::size_t i = 0; i < renders.size(); ++i) write_file_bytes(render_path(c.id, i + 1), renders[i]);
        nlohmann::json line = {{"id", c.id},
                               {"features", std::vector<double>(c.features.values.begin(), c.features.values.end())},
                               {"recommended", c.recommended},
                               {"result", c.result}};
        append_line("consultations.jsonl", line.dump());
        consultations_.emplace(c.id, c);
    }

    std::size_t consultation_count() const
    {
        std::lock_guard lock(meta_mutex_);
        return consultations_.size();
    }

    std::string render_path(const std::string& id, std::size_t rank) const
    {
        return (root_ / "renders" / (id + "_" + std::to_string(rank) + ".png")).string();
    }

    void append_feedback(const FeedbackRecord& f)
    {
        std::lock_guard lock(meta_mutex_);
        if (!consultations_.count(f.consultation_id)) {
            throw NotFound("unknown consultation: " + f.consultation_id);
        }
        append_line("feedback.jsonl", feedback_to_json(f).dump());
        feedback_.push_back(f);
    }

    std::vector<FeedbackRecord> feedback() const
    {
        std::lock_guard lock(meta_mutex_);
        return feedback_;
    }

    // Dataset.

    /// Appends one row and returns the new row count.
    std::size_t append_training_row(const TrainingRecord& r)
    {
        std::lock_guard lock(dataset_mutex_);
        append_records(dataset_path(), {r});
        return ++dataset_rows_;
    }

    Dataset dataset_snapshot() const
    {
        std::lock_guard lock(dataset_mutex_);
        if (!std::filesystem::exists(dataset_path())) return {};
        return read_dataset(dataset_path());
    }

    std::size_t dataset_rows() const
    {
        std::lock_guard lock(dataset_mutex_);
        return dataset_rows_;
    }

    /// Writes `d` as the dataset if the store has none yet; returns whether it did.
    bool import_dataset_if_empty(const Dataset& d)
    {
        std::lock_guard lock(dataset_mutex_);
        if (dataset_rows_ > 0) return false;
        write_dataset(d, dataset_path());
        dataset_rows_ = d.size();
        return true;
    }

    // Models.

    std::uint64_t current_version() const
    {
        std::lock_guard lock(model_mutex_);
        return current_version_unlocked();
    }

    std::string model_path(std::uint64_t version) const
    {
        return (root_ / "models" / ("model_v" + std::to_string(version) + ".bin")).string();
    }

    /// Writes the model file and its metadata, then points CURRENT at it.
    void save_model_version(const MlpModel& m, const nlohmann::json& metadata)
    {
        std::lock_guard lock(model_mutex_);
        if (m.model_version <= current_version_unlocked()) {
            throw DomainError("model_version must increase: " + std::to_string(m.model_version));
        }
        save_model(m, model_path(m.model_version));
        std::ofstream(root_ / "models" / ("model_v" + std::to_string(m.model_version) + ".json"))
            << metadata.dump(2) << '\n';
        const auto tmp = root_ / "models" / "CURRENT.tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << m.model_version << '\n';
            if (!out) throw IoError("cannot write " + tmp.string());
        }
        std::filesystem::rename(tmp, root_ / "models" / "CURRENT");
    }

    std::optional<MlpModel> load_current_model() const
    {
        std::lock_guard lock(model_mutex_);
        const auto v = current_version_unlocked();
        if (v == 0) return std::nullopt;
        return load_model(model_path(v));
    }

private:
    std::uint64_t current_version_unlocked() const
    {
        std::ifstream in(root_ / "models" / "CURRENT");
        std::uint64_t v = 0;
        if (in && !(in >> v)) throw FormatError("corrupt models/CURRENT in " + root_.string());
        return v;
    }

    void append_line(const char* file, const std::string& line)
    {
        std::ofstream out(root_ / file, std::ios::app);
        out << line << '\n';
        out.flush();
        if (!out) throw IoError("cannot append to " + (root_ / file).string());
    }

    template <class Fn>
    void for_each_line(const char* file, Fn fn)
    {
        std::ifstream in(root_ / file);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            fn(parse_json_text(line, (root_ / file).string() + ": line " + std::to_string(n)));
        }
    }

    void load_journals()
    {
        try {
            for_each_line("consultations.jsonl", [&](const nlohmann::json& j) {
                StoredConsultation c;
                c.id = j.at("id").get<std::string>();
                const auto values = j.at("features").get<std::vector<double>>();
                if (values.size() != FeatureVector::size()) throw FormatError("stored feature vector has wrong length");
                std::copy(values.begin(), values.end(), c.features.values.begin());
                c.recommended = j.at("recommended").get<std::array<int, 3>>();
                c.result = j.at("result");
                consultations_.emplace(c.id, std::move(c));
            });
            for_each_line("feedback.jsonl", [&](const nlohmann::json& j) {
                FeedbackRecord f;
                f.consultation_id = j.at("consultation_id").get<std::string>();
                f.timestamp = j.at("timestamp").get<std::string>();
                if (j.at("outcome") == "accepted") f.accepted_family = j.at("family_id").get<int>();
                feedback_.push_back(std::move(f));
            });
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("corrupt store journal in " + root_.string() + ": " + e.what());
        }
        if (std::filesystem::exists(dataset_path())) dataset_rows_ = read_dataset(dataset_path()).size();
    }

    std::filesystem::path root_;
    mutable std::mutex meta_mutex_;
    mutable std::mutex dataset_mutex_;
    mutable std::mutex model_mutex_;
    std::map<std::string, StoredConsultation> consultations_;
    std::vector<FeedbackRecord> feedback_;
    std::size_t dataset_rows_ = 0;
};

} // namespace icdh
