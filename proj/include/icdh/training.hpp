#pragma once

#include <cmath>
#include <string>

#include <json.hpp>

#include "icdh/mlp.hpp"

namespace icdh {

inline constexpr double kFallbackLearningRate = 0.001;

/// A run is diverged when any epoch loss or final parameter is non-finite, or
/// when the last epoch's training loss exceeds the first epoch's.
inline bool diverged(const TrainResult& r)
{
    if (!r.model.params.all_finite()) return true;
    for (const auto& e : r.history) {
        if (!std::isfinite(e.train_loss)) return true;
    }
    return !r.history.empty() && r.history.back().train_loss > r.history.front().train_loss;
}

struct TrainingRun {
    TrainResult result;
    TrainConfig config; // configuration of the run that produced `result`
    bool fell_back = false;
};

/// Trains from `init_model(init_seed)` with `cfg`; if that run diverges,
/// retrains from the same initialization at `fallback_lr`.
inline TrainingRun train_with_fallback(std::uint64_t init_seed, const Dataset& train_set, const Dataset& val_set,
                                       const TrainConfig& cfg, double fallback_lr = kFallbackLearningRate,
                                       const std::function<void(const EpochStats&)>& on_epoch = {})
{
    TrainingRun run{train(init_model(init_seed), train_set, val_set, cfg, on_epoch), cfg, false};
    if (diverged(run.result) && fallback_lr != cfg.learning_rate) {
        run.config.learning_rate = fallback_lr;
        run.result = train(init_model(init_seed), train_set, val_set, run.config, on_epoch);
        run.fell_back = true;
    }
    return run;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c)
{
    return {{"epochs", c.epochs},     {"learning_rate", c.learning_rate}, {"dropout_rate", c.dropout_rate},
            {"batch_size", c.batch_size}, {"beta1", c.beta1},             {"beta2", c.beta2},
            {"epsilon", c.epsilon},   {"seed", c.seed}};
}

inline nlohmann::json history_to_json(const std::vector<EpochStats>& history)
{
    auto out = nlohmann::json::array();
    for (const auto& e : history) {
        out.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
    }
    return out;
}

/// Run metadata stored next to a model file.
inline nlohmann::json training_run_to_json(const TrainingRun& run, std::uint64_t init_seed, std::size_t train_rows,
                                           std::size_t val_rows)
{
    return {{"train_config", train_config_to_json(run.config)},
            {"learning_rate", run.config.learning_rate},
            {"fallback_learning_rate_used", run.fell_back},
            {"init_seed", init_seed},
            {"train_rows", train_rows},
            {"val_rows", val_rows},
            {"final_val_accuracy", run.result.history.empty() ? 0.0 : run.result.history.back().val_accuracy},
            {"history", history_to_json(run.result.history)}};
}

} // namespace icdh
