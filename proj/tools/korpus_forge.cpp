// korpus-forge: corpus curation and tokenizer extension pipeline CLI.

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "korf/base_bpe.hpp"
#include "korf/corpus_io.hpp"
#include "korf/crawl_scheduler.hpp"
#include "korf/dedup.hpp"
#include "korf/embedding.hpp"
#include "korf/ngram_lm.hpp"
#include "korf/pipeline.hpp"
#include "korf/posttrain.hpp"
#include "korf/rule_filter.hpp"
#include "korf/tokenizer_ext.hpp"
#include "korf/train_plan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitInternalError = 2;

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

korf::BpeVocab load_base(const std::string& path) {
    return path.empty() ? korf::BpeVocab::byte_fallback() : korf::BpeVocab::load(path);
}

korf::BaseVocab as_base_vocab(const korf::BpeVocab& bpe) {
    korf::BaseVocab base;
    base.tokens = bpe.tokens();
    base.segment = [bpe](std::string_view text) { return bpe.segment(text); };
    return base;
}

struct GlobalOpts {
    std::string config;
    uint64_t seed = 0;
    unsigned jobs = 1;
};

void cmd_filter(const std::string& config_path, const std::string& in_path,
                const std::string& out_path) {
    korf::FilterConfig cfg;
    if (!config_path.empty())
        cfg = korf::filter_config_from_json(load_json_file(config_path));
    std::vector<korf::LineError> errors;
    korf::CorpusWriter writer(out_path, "filter");
    korf::read_corpus(
        in_path,
        [&](korf::Document&& d) {
            writer.count_input(d);
            korf::FilterVerdict v = korf::apply_filters(d, cfg);
            if (v.keep)
                writer.write(d);
            else
                writer.record_drop(korf::filter_rule_name(*v.failed_rule));
        },
        [&](const korf::LineError& e) { errors.push_back(e); });
    korf::save_line_errors(errors, in_path);
    korf::StageManifest m = writer.close();
    korf::save_manifest(m, out_path);
    std::cout << korf::manifest_to_json(m).dump(2) << "\n";
}

void cmd_dedup(const std::string& config_path, const std::string& in_path,
               const std::string& out_path, const std::string& report_path, uint64_t seed) {
    korf::DedupConfig cfg = korf::dedup_config_from_json(
        config_path.empty() ? nlohmann::json::object() : load_json_file(config_path), seed);
    std::vector<korf::LineError> errors;
    auto docs = korf::read_corpus_all(in_path, &errors);
    korf::save_line_errors(errors, in_path);
    auto [kept, report] = korf::dedup_corpus(docs, cfg);
    korf::CorpusWriter writer(out_path, "dedup");
    for (const auto& d : docs) writer.count_input(d);
    for (const auto& d : kept) writer.write(d);
    if (report.removed > 0) writer.manifest().drop_histogram["duplicate"] = report.removed;
    korf::StageManifest m = writer.close();
    korf::save_manifest(m, out_path);
    if (!report_path.empty()) {
        nlohmann::json rj;
        rj["removed"] = report.removed;
        rj["removal_fraction"] = report.removal_fraction;
        auto& cl = rj["clusters"] = nlohmann::json::array();
        for (const auto& c : report.clusters)
            cl.push_back({{"representative", c.representative}, {"members", c.members}});
        std::ofstream out(report_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write report: " + report_path);
        out << rj.dump(2) << "\n";
    }
    std::cout << korf::manifest_to_json(m).dump(2) << "\n";
}

void cmd_lm_train(size_t order, const std::string& in_path, const std::string& model_path) {
    auto docs = korf::read_corpus_all(in_path);
    korf::NGramModel model = korf::NGramModel::train(docs, order);
    model.save(model_path);
    std::cout << "trained order-" << order << " model on " << docs.size() << " docs, vocab "
              << model.vocab_size() << "\n";
}

void cmd_lm_score(const std::string& model_path, const std::string& in_path,
                  const std::string& out_path) {
    korf::NGramModel model = korf::NGramModel::load(model_path);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write scores: " + out_path);
    korf::read_corpus(
        in_path,
        [&](korf::Document&& d) {
            korf::ScoredDocument s = model.score(d);
            nlohmann::json j;
            j["id"] = s.id;
            j["token_count"] = s.token_count;
            j["log10_prob"] = s.log10_prob;
            j["perplexity"] = s.perplexity;
            j["skipped"] = s.skipped;
            out << j.dump() << '\n';
        },
        [](const korf::LineError&) {});
}

void cmd_lm_select(uint64_t budget, const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open scored file: " + in_path);
    std::vector<korf::ScoredDocument> scored;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        korf::ScoredDocument s;
        s.id = j.at("id").get<std::string>();
        s.token_count = j.value("token_count", uint64_t{0});
        s.perplexity = j.value("perplexity", 0.0);
        s.skipped = j.value("skipped", false);
        scored.push_back(std::move(s));
    }
    auto kept = korf::select_by_budget(scored, budget);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write id list: " + out_path);
    for (const auto& id : kept) out << id << '\n';
}

void cmd_posttrain_format(const std::string& task_name, const std::string& in_path,
                          const std::string& out_path) {
    auto task = korf::task_from_name(task_name);
    if (!task) throw std::runtime_error("unknown task: " + task_name);
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open input: " + in_path);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write output: " + out_path);
    std::string line;
    size_t line_no = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw std::runtime_error("malformed JSON at line " + std::to_string(line_no));
        korf::PreferenceRecord r;
        switch (*task) {
            case korf::Task::ending_completion:
                r = korf::format_ending_completion(j.at("context").get<std::string>(),
                                                  j.at("choices").get<std::vector<std::string>>(),
                                                  j.at("answer_index").get<size_t>());
                break;
            case korf::Task::fill_in_blank: {
                auto options = j.at("options").get<std::vector<std::string>>();
                size_t ans = j.at("answer_index").get<size_t>();
                if (options.size() != 2 || ans > 1)
                    throw std::runtime_error("fill_in_blank needs 2 options, line " +
                                             std::to_string(line_no));
                r = korf::format_fill_in_blank(j.at("sentence").get<std::string>(), options[ans],
                                               options[1 - ans]);
                break;
            }
            case korf::Task::mmlu_style:
                r = korf::format_mmlu_style(j.at("question").get<std::string>(),
                                            j.at("choices").get<std::vector<std::string>>(),
                                            j.at("answer_index").get<size_t>());
                break;
            case korf::Task::math:
                r = korf::format_math(j.at("question").get<std::string>(),
                                      j.at("solution").get<std::string>());
                break;
            case korf::Task::coding: {
                auto res = korf::format_coding(j.at("description").get<std::string>(),
                                               j.at("code").get<std::string>());
                if (std::holds_alternative<korf::SkippedSample>(res)) {
                    ++skipped;
                    continue;
                }
                r = std::get<korf::PreferenceRecord>(res);
                break;
            }
            case korf::Task::instruction:
                r.task = korf::Task::instruction;
                r.prompt = j.at("prompt").get<std::string>();
                r.chosen = j.at("response").get<std::string>();
                r.check();
                break;
        }
        r.source = j.value("source", "");
        out << korf::record_to_json(r).dump() << '\n';
    }
    if (skipped > 0) std::cerr << "skipped " << skipped << " samples\n";
}

void cmd_posttrain_mix(uint64_t quota, uint64_t seed,
                       const std::vector<std::string>& in_specs, const std::string& out_path) {
    std::vector<std::pair<std::string, std::vector<korf::PreferenceRecord>>> per_source;
    for (const auto& spec : in_specs) {
        size_t eq = spec.find('=');
        std::string label = eq == std::string::npos ? spec : spec.substr(0, eq);
        std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open source: " + path);
        std::vector<korf::PreferenceRecord> records;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            records.push_back(korf::record_from_json(nlohmann::json::parse(line)));
        }
        per_source.emplace_back(label, std::move(records));
    }
    korf::MixPlan plan;
    plan.per_source_quota = quota;
    plan.seed = seed;
    auto mixed = korf::balance_mix(per_source, plan);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write output: " + out_path);
    for (const auto& r : mixed) out << korf::record_to_json(r).dump() << '\n';
}

void cmd_crawl_sim(const std::string& site_path, const std::string& policy_path,
                   const std::string& out_path, const std::string& log_path) {
    auto script = korf::load_site_script(site_path);
    korf::CrawlPolicy policy =
        policy_path.empty() ? korf::CrawlPolicy{} : korf::load_crawl_policy(policy_path);
    korf::CrawlResult result = korf::run_simulated_crawl(script, policy);
    {
        korf::CorpusWriter writer(out_path, "crawl-sim");
        for (const auto& d : result.collected) {
            writer.count_input(d);
            writer.write(d);
        }
        korf::save_manifest(writer.close(), out_path);
    }
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write log: " + log_path);
    for (const auto& e : result.log) {
        nlohmann::json j;
        j["sim_time"] = e.sim_time;
        j["url"] = e.url;
        j["status"] = e.status;
        j["action"] = e.action;
        if (e.wait_seconds > 0) j["wait_seconds"] = e.wait_seconds;
        log << j.dump() << '\n';
    }
    std::cout << (result.aborted ? "aborted" : "completed") << ": " << result.collected.size()
              << " docs, simulated time " << result.total_sim_time << "s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"korpus-forge: corpus curation and tokenizer extension toolkit"};
    app.require_subcommand(1);
    GlobalOpts global;
    app.add_option("--config", global.config, "default config file for subcommands");
    app.add_option("--seed", global.seed, "global random seed");
    app.add_option("--jobs", global.jobs, "worker hint for parallel stages");

    // filter
    std::string f_config, f_in, f_out;
    auto* filter = app.add_subcommand("filter", "rule-based document filtering");
    filter->add_option("--config", f_config, "filter config JSON");
    filter->add_option("--in", f_in)->required();
    filter->add_option("--out", f_out)->required();

    // dedup
    std::string d_config, d_in, d_out, d_report;
    auto* dedup = app.add_subcommand("dedup", "near-duplicate removal");
    dedup->add_option("--config", d_config);
    dedup->add_option("--in", d_in)->required();
    dedup->add_option("--out", d_out)->required();
    dedup->add_option("--report", d_report, "cluster report JSON");

    // lm-train / lm-score / lm-select
    size_t lt_order = 5;
    std::string lt_in, lt_model;
    auto* lm_train = app.add_subcommand("lm-train", "train a Kneser-Ney n-gram model");
    lm_train->add_option("--order", lt_order);
    lm_train->add_option("--in", lt_in)->required();
    lm_train->add_option("--model", lt_model)->required();

    std::string ls_model, ls_in, ls_out;
    auto* lm_score = app.add_subcommand("lm-score", "perplexity-score documents");
    lm_score->add_option("--model", ls_model)->required();
    lm_score->add_option("--in", ls_in)->required();
    lm_score->add_option("--out", ls_out)->required();

    uint64_t sel_budget = 0;
    std::string sel_in, sel_out;
    auto* lm_select = app.add_subcommand("lm-select", "budgeted selection by perplexity");
    lm_select->add_option("--budget", sel_budget)->required();
    lm_select->add_option("--in", sel_in)->required();
    lm_select->add_option("--out", sel_out)->required();

    // tokenizer
    std::string tb_in, tb_out;
    size_t tb_target = 72000;
    auto* tok_build = app.add_subcommand("tok-build", "build the new-language unigram vocab");
    tok_build->add_option("--target", tb_target);
    tok_build->add_option("--in", tb_in)->required();
    tok_build->add_option("--out", tb_out)->required();

    std::string tbase_out, tbase_train;
    size_t tbase_merges = 0;
    auto* tok_base = app.add_subcommand("tok-base", "write a byte-level base BPE vocabulary");
    tok_base->add_option("--out", tbase_out)->required();
    tok_base->add_option("--train", tbase_train, "optional corpus to learn merges from");
    tok_base->add_option("--merges", tbase_merges, "number of merges to learn");

    std::string tm_base, tm_new, tm_ref, tm_out;
    auto* tok_merge = app.add_subcommand("tok-merge", "merge base and new vocabularies");
    tok_merge->add_option("--base", tm_base)->required();
    tok_merge->add_option("--new", tm_new)->required();
    tok_merge->add_option("--ref", tm_ref, "reference corpus for probability calibration")
        ->required();
    tok_merge->add_option("--out", tm_out)->required();

    std::string te_base, te_vocab, te_text, te_in;
    auto* tok_encode = app.add_subcommand("tok-encode", "encode text to token ids");
    tok_encode->add_option("--base", te_base)->required();
    tok_encode->add_option("--vocab", te_vocab)->required();
    tok_encode->add_option("--text", te_text);
    tok_encode->add_option("--in", te_in, "file to encode instead of --text");

    std::string td_base, td_vocab, td_ids;
    auto* tok_decode = app.add_subcommand("tok-decode", "decode token ids to text");
    tok_decode->add_option("--base", td_base)->required();
    tok_decode->add_option("--vocab", td_vocab)->required();
    tok_decode->add_option("--ids", td_ids, "comma-separated ids")->required();

    std::string ei_base_emb, ei_base, ei_vocab, ei_out;
    auto* embed_init = app.add_subcommand("embed-init", "initialize extended embedding matrix");
    embed_init->add_option("--base-emb", ei_base_emb)->required();
    embed_init->add_option("--base", ei_base)->required();
    embed_init->add_option("--vocab", ei_vocab)->required();
    embed_init->add_option("--out", ei_out)->required();

    // posttrain
    std::string pf_task, pf_in, pf_out;
    auto* pt_format = app.add_subcommand("posttrain-format", "format benchmark data into records");
    pt_format->add_option("--task", pf_task)->required();
    pt_format->add_option("--in", pf_in)->required();
    pt_format->add_option("--out", pf_out)->required();

    uint64_t pm_quota = 0;
    std::vector<std::string> pm_in;
    std::string pm_out;
    auto* pt_mix = app.add_subcommand("posttrain-mix", "balance sources into one dataset");
    pt_mix->add_option("--quota", pm_quota)->required();
    pt_mix->add_option("--in", pm_in, "label=path source files")->required();
    pt_mix->add_option("--out", pm_out)->required();

    // crawl-sim
    std::string cs_site, cs_policy, cs_out, cs_log;
    auto* crawl_sim = app.add_subcommand("crawl-sim", "run the politeness policy on a scripted site");
    crawl_sim->add_option("--site", cs_site)->required();
    crawl_sim->add_option("--policy", cs_policy);
    crawl_sim->add_option("--out", cs_out)->required();
    crawl_sim->add_option("--log", cs_log)->required();

    // plan
    auto* plan = app.add_subcommand("plan", "training precision and config plans");
    plan->require_subcommand(1);
    std::string pp_attention = "bf16", pp_linear = "fp8", pp_lm_head = "fp8";
    auto* plan_fp8 = plan->add_subcommand("fp8", "stability of a precision assignment");
    plan_fp8->add_option("--attention", pp_attention);
    plan_fp8->add_option("--linear", pp_linear);
    plan_fp8->add_option("--lm-head", pp_lm_head);
    std::string pc_stage, pc_out;
    auto* plan_config = plan->add_subcommand("config", "emit stage hyperparameters");
    plan_config->add_option("--stage", pc_stage)->required();
    plan_config->add_option("--out", pc_out);

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "validate or run a staged pipeline");
    pipeline->require_subcommand(1);
    std::string plv_config, plr_config;
    auto* pl_validate = pipeline->add_subcommand("validate");
    pl_validate->add_option("--config", plv_config);
    auto* pl_run = pipeline->add_subcommand("run");
    pl_run->add_option("--config", plr_config);

    CLI11_PARSE(app, argc, argv);

    if (f_config.empty()) f_config = global.config;
    if (d_config.empty()) d_config = global.config;
    if (plv_config.empty()) plv_config = global.config;
    if (plr_config.empty()) plr_config = global.config;

    try {
        if (*filter) {
            cmd_filter(f_config, f_in, f_out);
        } else if (*dedup) {
            cmd_dedup(d_config, d_in, d_out, d_report, global.seed);
        } else if (*lm_train) {
            cmd_lm_train(lt_order, lt_in, lt_model);
        } else if (*lm_score) {
            cmd_lm_score(ls_model, ls_in, ls_out);
        } else if (*lm_select) {
            cmd_lm_select(sel_budget, sel_in, sel_out);
        } else if (*tok_build) {
            auto docs = korf::read_corpus_all(tb_in);
            auto vocab = korf::build_new_vocab(docs, tb_target);
            korf::save_new_vocab(vocab, tb_out);
        } else if (*tok_base) {
            korf::BpeVocab bpe = korf::BpeVocab::byte_fallback();
            if (!tbase_train.empty() && tbase_merges > 0) {
                // learn the most frequent adjacent pair, repeatedly
                auto docs = korf::read_corpus_all(tbase_train);
                for (size_t m = 0; m < tbase_merges; ++m) {
                    std::map<std::pair<uint32_t, uint32_t>, uint64_t> pairs;
                    for (const auto& d : docs) {
                        auto seq = bpe.segment(d.text);
                        for (size_t i = 0; i + 1 < seq.size(); ++i)
                            pairs[{seq[i], seq[i + 1]}]++;
                    }
                    if (pairs.empty()) break;
                    auto best = std::max_element(pairs.begin(), pairs.end(),
                                                 [](const auto& a, const auto& b) {
                                                     return a.second < b.second ||
                                                            (a.second == b.second &&
                                                             b.first < a.first);
                                                 });
                    if (best->second < 2) break;
                    bpe.add_merge(bpe.token(best->first.first), bpe.token(best->first.second));
                }
            }
            bpe.save(tbase_out);
        } else if (*tok_merge) {
            korf::BpeVocab bpe = load_base(tm_base);
            auto new_vocab = korf::load_new_vocab(tm_new);
            auto ref = korf::read_corpus_all(tm_ref);
            korf::ExtendedVocab ext = korf::merge_vocab(as_base_vocab(bpe), new_vocab, ref);
            korf::save_extended_vocab(ext, tm_out);
        } else if (*tok_encode) {
            korf::BpeVocab bpe = load_base(te_base);
            korf::ExtendedVocab ext = korf::load_extended_vocab(as_base_vocab(bpe), te_vocab);
            std::string text = te_text;
            if (!te_in.empty()) {
                std::ifstream in(te_in, std::ios::binary);
                if (!in) throw std::runtime_error("cannot open input: " + te_in);
                std::stringstream ss;
                ss << in.rdbuf();
                text = ss.str();
            }
            auto ids = korf::encode(ext, text);
            for (size_t i = 0; i < ids.size(); ++i) std::cout << (i ? "," : "") << ids[i];
            std::cout << "\n";
        } else if (*tok_decode) {
            korf::BpeVocab bpe = load_base(td_base);
            korf::ExtendedVocab ext = korf::load_extended_vocab(as_base_vocab(bpe), td_vocab);
            std::vector<uint32_t> ids;
            std::stringstream ss(td_ids);
            std::string part;
            while (std::getline(ss, part, ','))
                if (!part.empty()) ids.push_back(static_cast<uint32_t>(std::stoul(part)));
            std::cout << korf::decode(ext, ids) << "\n";
        } else if (*embed_init) {
            korf::BpeVocab bpe = load_base(ei_base);
            korf::ExtendedVocab ext = korf::load_extended_vocab(as_base_vocab(bpe), ei_vocab);
            korf::EmbeddingMatrix base_emb = korf::EmbeddingMatrix::load(ei_base_emb);
            korf::init_embeddings(base_emb, ext).save(ei_out);
        } else if (*pt_format) {
            cmd_posttrain_format(pf_task, pf_in, pf_out);
        } else if (*pt_mix) {
            cmd_posttrain_mix(pm_quota, global.seed, pm_in, pm_out);
        } else if (*crawl_sim) {
            cmd_crawl_sim(cs_site, cs_policy, cs_out, cs_log);
        } else if (*plan) {
            if (*plan_fp8) {
                auto a = korf::precision_from_name(pp_attention);
                auto l = korf::precision_from_name(pp_linear);
                auto h = korf::precision_from_name(pp_lm_head);
                if (!a || !l || !h) throw std::runtime_error("precision must be bf16 or fp8");
                auto p = korf::fp8_precision_plan(*a, *l, *h);
                std::cout << korf::precision_plan_to_json(p).dump(2) << "\n";
            } else if (*plan_config) {
                auto stage = korf::train_stage_from_name(pc_stage);
                if (!stage) throw std::runtime_error("stage must be pretrain, sft or dpo");
                nlohmann::json cfg = korf::emit_training_config(*stage);
                if (pc_out.empty()) {
                    std::cout << cfg.dump(2) << "\n";
                } else {
                    std::ofstream out(pc_out, std::ios::trunc);
                    if (!out) throw std::runtime_error("cannot write config: " + pc_out);
                    out << cfg.dump(2) << "\n";
                }
            }
        } else if (*pipeline) {
            if (*pl_validate) {
                auto cfg = korf::load_pipeline_config(plv_config);
                auto errors = korf::validate_pipeline(cfg);
                if (errors.empty()) {
                    std::cout << "ok\n";
                } else {
                    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
                    return kExitInputError;
                }
            } else if (*pl_run) {
                auto cfg = korf::load_pipeline_config(plr_config);
                cfg.seed = cfg.seed ^ global.seed;
                auto result = korf::run_pipeline(cfg);
                for (const auto& m : result.manifests)
                    std::cout << m.stage_name << ": " << m.docs_in << " -> " << m.docs_out << "\n";
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternalError;
    }
    return kExitOk;
}
