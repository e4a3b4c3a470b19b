#include "korf/corpus_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "util.hpp"

namespace {

namespace fs = std::filesystem;

TEST(CorpusIo, WriteReadRoundTrip) {
    auto dir = testutil::temp_dir("io_roundtrip");
    std::vector<korf::Document> docs = {
        testutil::doc("a", "첫 번째 문서입니다.", korf::Source::blog),
        testutil::doc("b", "두 번째 문서.\n여러 줄.", korf::Source::news),
    };
    docs[1].meta["url"] = "https://example.test/2";
    std::string path = dir + "/corpus.jsonl";
    korf::StageManifest m = korf::write_corpus(docs, path);
    EXPECT_EQ(m.docs_in, 2u);
    EXPECT_EQ(m.docs_out, 2u);

    auto back = korf::read_corpus_all(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].id, "a");
    EXPECT_EQ(back[0].text, docs[0].text);
    EXPECT_EQ(back[0].source, korf::Source::blog);
    EXPECT_EQ(back[1].meta.at("url"), "https://example.test/2");
}

TEST(CorpusIo, MalformedLinesQuarantined) {
    auto dir = testutil::temp_dir("io_malformed");
    std::string path = dir + "/bad.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"ok1","text":"fine"})" << "\n";
        out << "not json at all\n";
        out << R"({"text":"missing id"})" << "\n";
        out << R"({"id":"","text":"empty id"})" << "\n";
        out << R"({"id":"ok2","text":"also fine"})" << "\n";
        out << R"({"id":"badenc","text":")" << "\xff\xfe" << R"("})" << "\n";
    }
    std::vector<korf::LineError> errors;
    auto docs = korf::read_corpus_all(path, &errors);
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].id, "ok1");
    EXPECT_EQ(docs[1].id, "ok2");
    ASSERT_EQ(errors.size(), 4u);
    EXPECT_EQ(errors[0].line_number, 2u);
    EXPECT_EQ(errors[1].line_number, 3u);
    EXPECT_EQ(errors[2].line_number, 4u);
    EXPECT_EQ(errors[3].line_number, 6u);

    korf::save_line_errors(errors, path);
    EXPECT_TRUE(fs::exists(path + ".errors"));
}

TEST(CorpusIo, EmptyLinesSkippedSilently) {
    auto dir = testutil::temp_dir("io_empty");
    std::string path = dir + "/gaps.jsonl";
    {
        std::ofstream out(path);
        out << R"({"id":"a","text":"x"})" << "\n\n\n" << R"({"id":"b","text":"y"})" << "\n";
    }
    std::vector<korf::LineError> errors;
    auto docs = korf::read_corpus_all(path, &errors);
    EXPECT_EQ(docs.size(), 2u);
    EXPECT_TRUE(errors.empty());
}

TEST(CorpusIo, ManifestJsonRoundTrip) {
    korf::StageManifest m;
    m.stage_name = "filter";
    m.docs_in = 100;
    m.docs_out = 80;
    m.bytes_in = 5000;
    m.bytes_out = 4200;
    m.drop_histogram["word_count"] = 12;
    m.drop_histogram["korean_ratio"] = 8;
    m.wall_time_s = 1.5;
    m.notes["k"] = "v";
    auto back = korf::manifest_from_json(korf::manifest_to_json(m));
    EXPECT_EQ(back.stage_name, m.stage_name);
    EXPECT_EQ(back.docs_in, m.docs_in);
    EXPECT_EQ(back.docs_out, m.docs_out);
    EXPECT_EQ(back.drop_histogram, m.drop_histogram);
    EXPECT_EQ(back.notes, m.notes);
    EXPECT_EQ(back.dropped(), 20u);
}

TEST(CorpusIo, AbandonedWriterRemovesPartialFile) {
    auto dir = testutil::temp_dir("io_abandon");
    std::string path = dir + "/partial.jsonl";
    {
        korf::CorpusWriter w(path);
        w.write(testutil::doc("a", "text"));
        // no close(): simulated failure path
    }
    EXPECT_FALSE(fs::exists(path));
}

TEST(CorpusIo, ClosedWriterKeepsFileAndCounts) {
    auto dir = testutil::temp_dir("io_close");
    std::string path = dir + "/kept.jsonl";
    korf::CorpusWriter w(path, "stage-x");
    auto d = testutil::doc("a", "텍스트");
    w.count_input(d);
    w.write(d);
    w.record_drop("word_count");
    auto m = w.close();
    EXPECT_TRUE(fs::exists(path));
    EXPECT_EQ(m.stage_name, "stage-x");
    EXPECT_EQ(m.docs_in, 1u);
    EXPECT_EQ(m.docs_out, 1u);
    EXPECT_EQ(m.bytes_in, d.text.size());
    EXPECT_EQ(m.drop_histogram.at("word_count"), 1u);
    EXPECT_GE(m.wall_time_s, 0.0);
}

TEST(CorpusIo, ManifestSidecarPath) {
    EXPECT_EQ(korf::manifest_path_for("/tmp/out.jsonl"), "/tmp/out.jsonl.manifest.json");
}

TEST(CorpusIo, MissingFileThrows) {
    EXPECT_THROW(korf::read_corpus_all("/nonexistent/nope.jsonl"), std::runtime_error);
}

}  // namespace
