#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace korf {

enum class Source { blog, cafe, news, curated, other };

inline const char* source_name(Source s) {
    switch (s) {
        case Source::blog: return "blog";
        case Source::cafe: return "cafe";
        case Source::news: return "news";
        case Source::curated: return "curated";
        case Source::other: return "other";
    }
    return "other";
}

inline Source source_from_name(const std::string& name) {
    if (name == "blog") return Source::blog;
    if (name == "cafe") return Source::cafe;
    if (name == "news") return Source::news;
    if (name == "curated") return Source::curated;
    return Source::other;
}

// One corpus record. Immutable by convention once it enters a pipeline stage.
struct Document {
    std::string id;
    Source source = Source::other;
    std::string text;
    std::map<std::string, std::string> meta;
};

// Per-stage accounting persisted next to each stage output.
struct StageManifest {
    std::string stage_name;
    uint64_t docs_in = 0;
    uint64_t docs_out = 0;
    uint64_t bytes_in = 0;
    uint64_t bytes_out = 0;
    std::map<std::string, uint64_t> drop_histogram;
    double wall_time_s = 0.0;
    std::map<std::string, std::string> notes;

    uint64_t dropped() const {
        uint64_t n = 0;
        for (const auto& [rule, count] : drop_histogram) n += count;
        return n;
    }
};

}  // namespace korf
