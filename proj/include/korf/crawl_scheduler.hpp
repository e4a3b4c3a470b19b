#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace korf {

// Politeness policy engine: per-worker request pacing, board exclusion and
// the EMA accessibility early-stop, exercised against a scripted fetcher.

enum class HttpOutcome { ok, redirect, e403, e404, e429, e5xx, no_response };

inline std::optional<HttpOutcome> outcome_from_status(int status) {
    if (status == 0) return HttpOutcome::no_response;
    if (status >= 200 && status < 300) return HttpOutcome::ok;
    if (status >= 300 && status < 400) return HttpOutcome::redirect;
    if (status == 403) return HttpOutcome::e403;
    if (status == 404) return HttpOutcome::e404;
    if (status == 429) return HttpOutcome::e429;
    if (status >= 500) return HttpOutcome::e5xx;
    return std::nullopt;
}

struct PacingState {
    double current_interval = 1.0;  // seconds
    uint32_t consecutive_failures = 0;
    double default_interval = 1.0;
    double penalty_interval = 15.0;
    uint32_t max_failures = 5;
};

enum class CrawlActionKind { proceed, next_url, wait, abort };

struct CrawlAction {
    CrawlActionKind kind = CrawlActionKind::proceed;
    double wait_seconds = 0.0;
};

// Pure transition function. The penalty doubles per consecutive failure
// (15, 30, 60, ...); hitting max_failures moves on to the next URL.
inline std::pair<CrawlAction, PacingState> next_action(PacingState state, HttpOutcome response) {
    switch (response) {
        case HttpOutcome::ok:
        case HttpOutcome::redirect:
            state.current_interval = state.default_interval;
            state.consecutive_failures = 0;
            return {{CrawlActionKind::proceed, 0.0}, state};
        case HttpOutcome::e403:
        case HttpOutcome::e404:
            state.current_interval = state.default_interval;
            state.consecutive_failures = 0;
            return {{CrawlActionKind::next_url, 0.0}, state};
        case HttpOutcome::e429:
        case HttpOutcome::no_response:
            return {{CrawlActionKind::abort, 0.0}, state};
        case HttpOutcome::e5xx: {
            state.consecutive_failures++;
            if (state.consecutive_failures >= state.max_failures) {
                state.current_interval = state.default_interval;
                state.consecutive_failures = 0;
                return {{CrawlActionKind::next_url, 0.0}, state};
            }
            state.current_interval =
                state.penalty_interval * static_cast<double>(1u << (state.consecutive_failures - 1));
            return {{CrawlActionKind::wait, state.current_interval}, state};
        }
    }
    return {{CrawlActionKind::abort, 0.0}, state};
}

struct BoardEmaState {
    double ema = 1.0;
    uint32_t window = 10;  // n in r = 2/(n+1)
    double stop_threshold = 0.15;

    double smoothing() const { return 2.0 / (static_cast<double>(window) + 1.0); }
};

// EMA_{t+1} = (1-r) EMA_t + r x_t; stop when it drops below the threshold.
inline std::pair<BoardEmaState, bool /*continue*/> update_ema(BoardEmaState state,
                                                             bool accessible) {
    const double r = state.smoothing();
    state.ema = (1.0 - r) * state.ema + r * (accessible ? 1.0 : 0.0);
    return {state, state.ema >= state.stop_threshold};
}

// ---- board exclusion ---------------------------------------------------

inline std::vector<std::string> default_board_exclusion_keywords() {
    return {"가입인사", "가입 인사", "출석", "출석 체크", "출첵", "출석체크", "등업", "신청"};
}

namespace crawl_detail {

// Lowercases Latin and collapses all whitespace away so keyword variants
// with internal spaces still match.
inline std::string normalize_board_name(std::string_view name) {
    std::string out;
    size_t pos = 0;
    while (pos < name.size()) {
        char32_t cp = decode_utf8(name, pos);
        if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x3000) continue;
        if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
        append_utf8(out, cp);
    }
    return out;
}

}  // namespace crawl_detail

struct BoardExclusion {
    bool excluded = false;
    std::string matched_rule;
};

inline BoardExclusion board_excluded(std::string_view board_name,
                                     const std::vector<std::string>& keyword_rules) {
    std::string norm = crawl_detail::normalize_board_name(board_name);
    for (const auto& rule : keyword_rules) {
        std::string rule_norm = crawl_detail::normalize_board_name(rule);
        if (!rule_norm.empty() && norm.find(rule_norm) != std::string::npos)
            return {true, rule};
    }
    return {false, ""};
}

// Blog media gate: stop when strictly more than `empty_fraction_threshold`
// of the sampled posts contain no text.
inline bool blog_media_gate_continue(const std::vector<bool>& has_text_flags,
                                     size_t sample_cap = 500,
                                     double empty_fraction_threshold = 0.8) {
    if (has_text_flags.empty()) throw std::invalid_argument("blog gate: empty sample");
    const size_t n = std::min(has_text_flags.size(), sample_cap);
    size_t empty = 0;
    for (size_t i = 0; i < n; ++i)
        if (!has_text_flags[i]) ++empty;
    const double fraction = static_cast<double>(empty) / static_cast<double>(n);
    return !(fraction > empty_fraction_threshold);
}

// ---- simulated crawl ---------------------------------------------------

// One scripted fetch result. `board` groups articles for the EMA rule;
// `accessible` false marks a restricted article.
struct ScriptedResponse {
    std::string url;
    int status = 200;
    std::string body;
    bool accessible = true;
    std::string board;
};

struct CrawlPolicy {
    PacingState pacing;
    BoardEmaState board_ema;
    std::vector<std::string> board_exclusion_keywords = default_board_exclusion_keywords();
    uint32_t max_workers_per_service = 20;
    double no_response_timeout = 30.0;
};

struct CrawlLogEntry {
    double sim_time = 0.0;
    std::string url;
    int status = 0;
    std::string action;  // proceed | next_url | wait | abort | board_stop | board_excluded
    double wait_seconds = 0.0;
};

struct CrawlResult {
    std::vector<CrawlLogEntry> log;
    std::vector<Document> collected;
    double total_sim_time = 0.0;
    bool aborted = false;
};

// Deterministic single-worker simulation over a scripted site. Simulated
// time advances by the prescribed interval between consecutive requests.
inline CrawlResult run_simulated_crawl(const std::vector<ScriptedResponse>& script,
                                       const CrawlPolicy& policy) {
    CrawlResult result;
    PacingState pacing = policy.pacing;
    std::map<std::string, BoardEmaState> board_states;
    std::set<std::string> stopped_boards;
    double clock = 0.0;
    bool first_request = true;
    size_t doc_seq = 0;

    for (const auto& entry : script) {
        if (!entry.board.empty()) {
            auto excl = board_excluded(entry.board, policy.board_exclusion_keywords);
            if (excl.excluded) {
                result.log.push_back({clock, entry.url, 0, "board_excluded", 0.0});
                continue;
            }
            if (stopped_boards.count(entry.board)) continue;
        }

        if (!first_request) clock += pacing.current_interval;
        first_request = false;

        auto outcome = outcome_from_status(entry.status);
        if (!outcome) outcome = HttpOutcome::e5xx;
        if (*outcome == HttpOutcome::no_response) clock += policy.no_response_timeout;

        auto [action, next_state] = next_action(pacing, *outcome);
        pacing = next_state;

        const char* action_name = action.kind == CrawlActionKind::proceed    ? "proceed"
                                  : action.kind == CrawlActionKind::next_url ? "next_url"
                                  : action.kind == CrawlActionKind::wait     ? "wait"
                                                                             : "abort";
        result.log.push_back({clock, entry.url, entry.status, action_name, action.wait_seconds});

        if (!entry.board.empty()) {
            auto& st = board_states.try_emplace(entry.board, policy.board_ema).first->second;
            auto [new_state, go_on] = update_ema(st, entry.accessible);
            st = new_state;
            if (!go_on) {
                stopped_boards.insert(entry.board);
                result.log.push_back({clock, entry.url, 0, "board_stop", 0.0});
            }
        }

        if (action.kind == CrawlActionKind::abort) {
            result.aborted = true;
            break;
        }
        if (action.kind == CrawlActionKind::proceed && entry.accessible && !entry.body.empty()) {
            Document d;
            d.id = "crawl-" + std::to_string(doc_seq++);
            d.source = Source::other;
            d.text = entry.body;
            d.meta["url"] = entry.url;
            result.collected.push_back(std::move(d));
        }
    }
    result.total_sim_time = clock;
    return result;
}

// ---- script / policy files ---------------------------------------------

inline std::vector<ScriptedResponse> load_site_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("crawl-sim: cannot open site script: " + path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw std::runtime_error("crawl-sim: site script must be a JSON array");
    std::vector<ScriptedResponse> script;
    for (const auto& e : j) {
        ScriptedResponse r;
        r.url = e.value("url", "");
        r.status = e.value("status", 200);
        r.body = e.value("body", "");
        r.accessible = e.value("accessible", true);
        r.board = e.value("board", "");
        script.push_back(std::move(r));
    }
    return script;
}

inline CrawlPolicy load_crawl_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("crawl-sim: cannot open policy file: " + path);
    nlohmann::json j;
    in >> j;
    CrawlPolicy p;
    p.pacing.default_interval = j.value("default_interval", 1.0);
    p.pacing.current_interval = p.pacing.default_interval;
    p.pacing.penalty_interval = j.value("penalty_interval", 15.0);
    p.pacing.max_failures = j.value("max_failures", 5u);
    p.board_ema.window = j.value("ema_window", 10u);
    p.board_ema.stop_threshold = j.value("ema_stop_threshold", 0.15);
    if (j.contains("board_exclusion_keywords"))
        p.board_exclusion_keywords = j["board_exclusion_keywords"].get<std::vector<std::string>>();
    p.max_workers_per_service = j.value("max_workers_per_service", 20u);
    p.no_response_timeout = j.value("no_response_timeout", 30.0);
    return p;
}

}  // namespace korf
