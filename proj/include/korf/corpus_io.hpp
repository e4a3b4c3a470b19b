#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace korf {

struct LineError {
    size_t line_number = 0;  // 1-based
    std::string message;
    std::string raw_line;
};

using DocumentSink = std::function<void(Document&&)>;
using LineErrorSink = std::function<void(const LineError&)>;

namespace detail {

inline std::optional<Document> parse_doc_line(const std::string& line, std::string* err) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        *err = "not a JSON object";
        return std::nullopt;
    }
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
        *err = "missing or empty id";
        return std::nullopt;
    }
    if (!j.contains("text") || !j["text"].is_string()) {
        *err = "missing text";
        return std::nullopt;
    }
    Document d;
    d.id = j["id"].get<std::string>();
    d.text = j["text"].get<std::string>();
    if (!valid_utf8(d.text)) {
        *err = "text is not valid UTF-8";
        return std::nullopt;
    }
    d.source = j.contains("source") && j["source"].is_string()
                   ? source_from_name(j["source"].get<std::string>())
                   : Source::other;
    if (j.contains("meta") && j["meta"].is_object()) {
        for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it) {
            if (it.value().is_string()) d.meta[it.key()] = it.value().get<std::string>();
        }
    }
    return d;
}

}  // namespace detail

// Streams a JSONL corpus file. Malformed lines go to `on_error` with their
// line number; well-formed documents to `on_doc` in file order.
inline void read_corpus(const std::string& path, const DocumentSink& on_doc,
                        const LineErrorSink& on_error) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string err;
        auto doc = detail::parse_doc_line(line, &err);
        if (doc) {
            on_doc(std::move(*doc));
        } else {
            on_error(LineError{line_no, err, line});
        }
    }
}

inline std::vector<Document> read_corpus_all(const std::string& path,
                                             std::vector<LineError>* errors = nullptr) {
    std::vector<Document> docs;
    read_corpus(
        path, [&](Document&& d) { docs.push_back(std::move(d)); },
        [&](const LineError& e) {
            if (errors) errors->push_back(e);
        });
    return docs;
}

inline nlohmann::json doc_to_json(const Document& d) {
    nlohmann::json j;
    j["id"] = d.id;
    j["source"] = source_name(d.source);
    j["text"] = d.text;
    if (!d.meta.empty()) j["meta"] = d.meta;
    return j;
}

// Writes documents as JSONL, tracking manifest totals. Removes the partial
// file on write failure.
class CorpusWriter {
   public:
    explicit CorpusWriter(const std::string& path, std::string stage_name = "write")
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        manifest_.stage_name = std::move(stage_name);
        start_ = std::chrono::steady_clock::now();
    }

    ~CorpusWriter() {
        if (!closed_) {
            out_.close();
            std::remove(path_.c_str());  // abandoned writer: clean up partial file
        }
    }

    void write(const Document& d) {
        out_ << doc_to_json(d).dump() << '\n';
        if (!out_) {
            out_.close();
            std::remove(path_.c_str());
            closed_ = true;
            throw std::runtime_error("write failed: " + path_);
        }
        manifest_.docs_out++;
        manifest_.bytes_out += d.text.size();
    }

    void count_input(const Document& d) {
        manifest_.docs_in++;
        manifest_.bytes_in += d.text.size();
    }

    void record_drop(const std::string& rule) { manifest_.drop_histogram[rule]++; }

    StageManifest& manifest() { return manifest_; }

    StageManifest close() {
        out_.close();
        closed_ = true;
        if (out_.fail()) {
            std::remove(path_.c_str());
            throw std::runtime_error("close failed: " + path_);
        }
        manifest_.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return manifest_;
    }

   private:
    std::string path_;
    std::ofstream out_;
    StageManifest manifest_;
    std::chrono::steady_clock::time_point start_;
    bool closed_ = false;
};

inline StageManifest write_corpus(const std::vector<Document>& docs, const std::string& path,
                                  const std::string& stage_name = "write") {
    CorpusWriter w(path, stage_name);
    for (const auto& d : docs) {
        w.count_input(d);
        w.write(d);
    }
    return w.close();
}

inline nlohmann::json manifest_to_json(const StageManifest& m) {
    nlohmann::json j;
    j["stage_name"] = m.stage_name;
    j["docs_in"] = m.docs_in;
    j["docs_out"] = m.docs_out;
    j["bytes_in"] = m.bytes_in;
    j["bytes_out"] = m.bytes_out;
    j["drop_histogram"] = m.drop_histogram;
    j["wall_time_s"] = m.wall_time_s;
    if (!m.notes.empty()) j["notes"] = m.notes;
    return j;
}

inline StageManifest manifest_from_json(const nlohmann::json& j) {
    StageManifest m;
    m.stage_name = j.value("stage_name", "");
    m.docs_in = j.value("docs_in", uint64_t{0});
    m.docs_out = j.value("docs_out", uint64_t{0});
    m.bytes_in = j.value("bytes_in", uint64_t{0});
    m.bytes_out = j.value("bytes_out", uint64_t{0});
    if (j.contains("drop_histogram"))
        m.drop_histogram = j["drop_histogram"].get<std::map<std::string, uint64_t>>();
    m.wall_time_s = j.value("wall_time_s", 0.0);
    if (j.contains("notes")) m.notes = j["notes"].get<std::map<std::string, std::string>>();
    return m;
}

// Manifest sidecar lives next to the stage output as <output>.manifest.json.
inline std::string manifest_path_for(const std::string& output_path) {
    return output_path + ".manifest.json";
}

inline void save_manifest(const StageManifest& m, const std::string& output_path) {
    std::ofstream out(manifest_path_for(output_path), std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest for: " + output_path);
    out << manifest_to_json(m).dump(2) << '\n';
}

inline void save_line_errors(const std::vector<LineError>& errors, const std::string& in_path) {
    if (errors.empty()) return;
    std::ofstream out(in_path + ".errors", std::ios::trunc);
    for (const auto& e : errors) {
        nlohmann::json j;
        j["line"] = e.line_number;
        j["error"] = e.message;
        j["raw"] = e.raw_line;
        // quarantined lines may hold invalid UTF-8; substitute rather than throw
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
}

}  // namespace korf
