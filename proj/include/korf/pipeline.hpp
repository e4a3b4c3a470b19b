#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "korf/corpus_io.hpp"
#include "korf/dedup.hpp"
#include "korf/document.hpp"
#include "korf/ngram_lm.hpp"
#include "korf/rule_filter.hpp"

namespace korf {

// Stage-by-stage pipeline. Stages communicate through files: each reads its
// predecessor's JSONL output and writes its own next to a manifest sidecar.

struct StageConfig {
    std::string name;
    std::string type;  // filter | dedup | lm-train | lm-score | lm-select
    nlohmann::json params;
};

struct PipelineConfig {
    std::string input;
    uint64_t seed = 0;
    std::vector<StageConfig> stages;
};

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    cfg.input = j.value("input", "");
    cfg.seed = j.value("seed", uint64_t{0});
    if (j.contains("stages"))
        for (const auto& s : j["stages"]) {
            StageConfig sc;
            sc.name = s.value("name", "");
            sc.type = s.value("type", "");
            sc.params = s;
            cfg.stages.push_back(std::move(sc));
        }
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("pipeline: cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return pipeline_config_from_json(j);
}

inline FilterConfig filter_config_from_json(const nlohmann::json& j) {
    FilterConfig cfg;
    cfg.min_words = j.value("min_words", cfg.min_words);
    cfg.max_words = j.value("max_words", cfg.max_words);
    cfg.min_avg_word_len = j.value("min_avg_word_len", cfg.min_avg_word_len);
    cfg.max_avg_word_len = j.value("max_avg_word_len", cfg.max_avg_word_len);
    cfg.min_korean_ratio = j.value("min_korean_ratio", cfg.min_korean_ratio);
    cfg.max_top_ngram_ratio = j.value("max_top_5gram_ratio", cfg.max_top_ngram_ratio);
    cfg.ngram_n = j.value("ngram_n", cfg.ngram_n);
    cfg.sentence_end_marks = j.value("sentence_end_marks", cfg.sentence_end_marks);
    return cfg;
}

inline DedupConfig dedup_config_from_json(const nlohmann::json& j, uint64_t seed) {
    DedupConfig cfg;
    cfg.shingle_size = j.value("shingle_size", cfg.shingle_size);
    cfg.num_hashes = j.value("num_hashes", cfg.num_hashes);
    cfg.bands = j.value("bands", cfg.bands);
    cfg.rows_per_band = j.value("rows_per_band", cfg.rows_per_band);
    cfg.jaccard_threshold = j.value("jaccard_threshold", cfg.jaccard_threshold);
    if (j.value("keep_policy", "longest") == std::string("first"))
        cfg.keep_policy = DedupConfig::KeepPolicy::first;
    cfg.seed = j.value("seed", seed);
    return cfg;
}

// All problems at once, never just the first.
inline std::vector<std::string> validate_pipeline(const PipelineConfig& cfg) {
    std::vector<std::string> errors;
    static const std::set<std::string> known = {"filter", "dedup", "lm-train", "lm-score",
                                               "lm-select"};
    if (cfg.input.empty())
        errors.push_back("pipeline input path is missing");
    else if (!std::filesystem::exists(cfg.input))
        errors.push_back("pipeline input path does not exist: " + cfg.input);
    if (cfg.stages.empty()) errors.push_back("pipeline has no stages");

    std::set<std::string> names;
    bool saw_score = false;
    for (const auto& s : cfg.stages) {
        if (s.name.empty()) errors.push_back("stage with empty name");
        if (!names.insert(s.name).second) errors.push_back("duplicate stage name: " + s.name);
        if (!known.count(s.type)) errors.push_back("stage " + s.name + ": unknown type " + s.type);
        if (!s.params.contains("out") && s.type != "lm-train")
            errors.push_back("stage " + s.name + ": missing output path");
        if (s.type == "lm-score") {
            saw_score = true;
            if (!s.params.contains("model"))
                errors.push_back("stage " + s.name + ": lm-score needs a model path");
        }
        if (s.type == "lm-select" && !saw_score)
            errors.push_back("stage " + s.name +
                             ": lm-select requires an lm-score stage upstream");
        if (s.type == "lm-train" && !s.params.contains("model"))
            errors.push_back("stage " + s.name + ": lm-train needs a model output path");
    }
    return errors;
}

struct PipelineRunResult {
    std::vector<StageManifest> manifests;
};

namespace pipeline_detail {

inline std::string scores_path_for(const std::string& out) { return out + ".scores.jsonl"; }

inline void write_scores(const std::vector<ScoredDocument>& scored, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("pipeline: cannot write scores: " + path);
    for (const auto& s : scored) {
        nlohmann::json j;
        j["id"] = s.id;
        j["token_count"] = s.token_count;
        j["log10_prob"] = s.log10_prob;
        j["perplexity"] = s.perplexity;
        j["skipped"] = s.skipped;
        out << j.dump() << '\n';
    }
}

inline std::vector<ScoredDocument> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("pipeline: cannot read scores: " + path);
    std::vector<ScoredDocument> scored;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        ScoredDocument s;
        s.id = j.at("id").get<std::string>();
        s.token_count = j.value("token_count", uint64_t{0});
        s.log10_prob = j.value("log10_prob", 0.0);
        s.perplexity = j.value("perplexity", 0.0);
        s.skipped = j.value("skipped", false);
        scored.push_back(std::move(s));
    }
    return scored;
}

}  // namespace pipeline_detail

// Executes stages in order. A stage failure halts the pipeline; outputs of
// earlier stages stay on disk.
inline PipelineRunResult run_pipeline(const PipelineConfig& cfg) {
    auto errors = validate_pipeline(cfg);
    if (!errors.empty()) {
        std::string msg = "pipeline config invalid:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::runtime_error(msg);
    }

    PipelineRunResult result;
    std::string current = cfg.input;
    std::string last_scores;

    for (const auto& stage : cfg.stages) {
        std::vector<LineError> line_errors;
        std::vector<Document> docs = read_corpus_all(current, &line_errors);
        save_line_errors(line_errors, current);

        if (stage.type == "filter") {
            const std::string out = stage.params.at("out").get<std::string>();
            FilterConfig fcfg = filter_config_from_json(stage.params.value("config", nlohmann::json::object()));
            CorpusWriter w(out, stage.name);
            for (const auto& d : docs) {
                w.count_input(d);
                FilterVerdict v = apply_filters(d, fcfg);
                if (v.keep)
                    w.write(d);
                else
                    w.record_drop(filter_rule_name(*v.failed_rule));
            }
            StageManifest m = w.close();
            save_manifest(m, out);
            result.manifests.push_back(std::move(m));
            current = out;
        } else if (stage.type == "dedup") {
            const std::string out = stage.params.at("out").get<std::string>();
            DedupConfig dcfg = dedup_config_from_json(stage.params.value("config", nlohmann::json::object()), cfg.seed);
            auto [kept, report] = dedup_corpus(docs, dcfg);
            CorpusWriter w(out, stage.name);
            for (const auto& d : docs) w.count_input(d);
            for (const auto& d : kept) w.write(d);
            if (report.removed > 0) w.manifest().drop_histogram["duplicate"] = report.removed;
            StageManifest m = w.close();
            save_manifest(m, out);
            if (stage.params.contains("report")) {
                nlohmann::json rj;
                rj["removed"] = report.removed;
                rj["removal_fraction"] = report.removal_fraction;
                auto& cl = rj["clusters"] = nlohmann::json::array();
                for (const auto& c : report.clusters)
                    cl.push_back({{"representative", c.representative}, {"members", c.members}});
                std::ofstream rout(stage.params["report"].get<std::string>(), std::ios::trunc);
                rout << rj.dump(2) << '\n';
            }
            result.manifests.push_back(std::move(m));
            current = out;
        } else if (stage.type == "lm-train") {
            const size_t order = stage.params.value("order", 5);
            const std::string model_path = stage.params.at("model").get<std::string>();
            std::vector<Document> train_docs = docs;
            if (stage.params.contains("train_input"))
                train_docs = read_corpus_all(stage.params["train_input"].get<std::string>());
            NGramModel model = NGramModel::train(train_docs, order);
            model.save(model_path);
            StageManifest m;
            m.stage_name = stage.name;
            m.docs_in = docs.size();
            m.docs_out = docs.size();
            m.notes["model"] = model_path;
            save_manifest(m, model_path);
            result.manifests.push_back(std::move(m));
            // docs pass through untouched; `current` unchanged
        } else if (stage.type == "lm-score") {
            const std::string out = stage.params.at("out").get<std::string>();
            NGramModel model = NGramModel::load(stage.params.at("model").get<std::string>());
            std::vector<ScoredDocument> scored;
            CorpusWriter w(out, stage.name);
            for (const auto& d : docs) {
                w.count_input(d);
                scored.push_back(model.score(d));
                w.write(d);
            }
            StageManifest m = w.close();
            m.notes["perplexity_unit"] = "per whitespace token incl. </s>";
            last_scores = pipeline_detail::scores_path_for(out);
            pipeline_detail::write_scores(scored, last_scores);
            save_manifest(m, out);
            result.manifests.push_back(std::move(m));
            current = out;
        } else if (stage.type == "lm-select") {
            const std::string out = stage.params.at("out").get<std::string>();
            const uint64_t budget = stage.params.value("budget", uint64_t{0});
            auto scored = pipeline_detail::read_scores(last_scores);
            auto kept_ids = select_by_budget(scored, budget);
            std::set<std::string> keep(kept_ids.begin(), kept_ids.end());
            CorpusWriter w(out, stage.name);
            for (const auto& d : docs) {
                w.count_input(d);
                if (keep.count(d.id))
                    w.write(d);
                else
                    w.record_drop("over_budget");
            }
            StageManifest m = w.close();
            save_manifest(m, out);
            std::ofstream ids_out(out + ".ids", std::ios::trunc);
            for (const auto& id : kept_ids) ids_out << id << '\n';
            result.manifests.push_back(std::move(m));
            current = out;
        } else {
            throw std::runtime_error("pipeline: unknown stage type: " + stage.type);
        }
    }
    return result;
}

}  // namespace korf
