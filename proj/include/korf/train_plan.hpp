#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace korf {

// Training-precision and hyperparameter plans emitted as inert configuration
// data; no training happens here.

enum class Precision { bf16, fp8 };
enum class LayerClass { attention, linear, lm_head };

inline const char* precision_name(Precision p) { return p == Precision::bf16 ? "bf16" : "fp8"; }

inline std::optional<Precision> precision_from_name(std::string_view s) {
    if (s == "bf16") return Precision::bf16;
    if (s == "fp8") return Precision::fp8;
    return std::nullopt;
}

struct PrecisionPlan {
    Precision attention = Precision::bf16;
    Precision linear = Precision::bf16;
    Precision lm_head = Precision::bf16;
    bool stable = true;
};

// Stability is an empirical lookup: FP8 attention matmuls destabilize
// training, everything else tolerates FP8.
inline PrecisionPlan fp8_precision_plan(Precision attention, Precision linear, Precision lm_head) {
    PrecisionPlan plan;
    plan.attention = attention;
    plan.linear = linear;
    plan.lm_head = lm_head;
    plan.stable = attention == Precision::bf16;
    return plan;
}

inline PrecisionPlan recommended_precision_plan() {
    // fastest stable combination
    return fp8_precision_plan(Precision::bf16, Precision::fp8, Precision::fp8);
}

inline nlohmann::json precision_plan_to_json(const PrecisionPlan& p) {
    return {{"attention", precision_name(p.attention)},
            {"linear", precision_name(p.linear)},
            {"lm_head", precision_name(p.lm_head)},
            {"stable", p.stable}};
}

enum class TrainStage { pretrain, sft, dpo };

inline std::optional<TrainStage> train_stage_from_name(std::string_view s) {
    if (s == "pretrain") return TrainStage::pretrain;
    if (s == "sft") return TrainStage::sft;
    if (s == "dpo") return TrainStage::dpo;
    return std::nullopt;
}

inline nlohmann::json emit_training_config(TrainStage stage) {
    nlohmann::json j;
    j["optimizer"] = {{"name", "AdamW"}, {"beta1", 0.9}, {"beta2", 0.95}, {"epsilon", 1e-5}};
    j["sequence_length"] = 8192;
    j["lr_scheduler"] = {
        {"name", "cosine_decay"}, {"warmup_fraction", 0.01}, {"decay_ratio", 0.1}};
    switch (stage) {
        case TrainStage::pretrain:
            j["stage"] = "pretrain";
            j["epochs"] = 1;
            j["tokens_per_epoch"] = 102'000'000'000LL;
            j["batch_size"] = 1104;
            j["peak_learning_rate"] = 1.2e-4;
            break;
        case TrainStage::sft:
            j["stage"] = "sft";
            j["epochs"] = 3;
            j["tokens_per_epoch"] = 99'400'000LL;
            j["batch_size"] = 32;
            j["peak_learning_rate"] = 5.0e-6;
            break;
        case TrainStage::dpo:
            j["stage"] = "dpo";
            j["epochs"] = 1;
            j["tokens_per_epoch"] = 48'500'000LL;
            j["batch_size"] = 32;
            j["peak_learning_rate"] = 5.0e-6;
            j["dpo"] = {{"gamma", 0.5}, {"beta", 0.1}};
            break;
    }
    return j;
}

}  // namespace korf
