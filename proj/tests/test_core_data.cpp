#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "failure_lens/core_data.hpp"
#include "failure_lens/errors.hpp"
#include "test_support.hpp"

using namespace flens;
using testsup::TempDir;

namespace {

void write_raw(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string emb1_bytes(std::uint32_t version, std::uint64_t rows, std::uint32_t dim,
                       const std::vector<float>& values) {
    std::string out = "FDEM";
    const auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    const auto put64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put32(version);
    put64(rows);
    put32(dim);
    for (const float f : values) {
        std::uint32_t raw;
        std::memcpy(&raw, &f, 4);
        put32(raw);
    }
    return out;
}

}  // namespace

TEST_CASE("emb1 header layout and 1x1 size") {
    TempDir tmp("emb1");
    EmbeddingTable t;
    t.data.resize(1, 1);
    t.data(0, 0) = 0.0f;
    const auto file = tmp.path() / "one.emb1";
    write_embeddings(t, file);
    // 4 magic + 4 version + 8 rows + 4 dim + 4 data
    CHECK(std::filesystem::file_size(file) == 24);
    const std::string bytes = testsup::slurp(file);
    CHECK(bytes.substr(0, 4) == "FDEM");
    CHECK(bytes[4] == 1);  // version 1, little-endian
    CHECK(bytes[8] == 1);  // n_rows
    CHECK(bytes[16] == 1); // dim
}

TEST_CASE("emb1 reads exact stored values") {
    TempDir tmp("emb1");
    const auto file = tmp.path() / "t.emb1";
    write_raw(file, emb1_bytes(1, 2, 3, {1.5f, -2.0f, 0.25f, 4.0f, 5.0f, -6.5f}));
    const EmbeddingTable t = read_embeddings(file);
    CHECK(t.rows() == 2);
    CHECK(t.dim() == 3);
    CHECK(t.data(0, 0) == 1.5f);
    CHECK(t.data(0, 2) == 0.25f);
    CHECK(t.data(1, 2) == -6.5f);
}

TEST_CASE("emb1 write/read round trips byte for byte") {
    TempDir tmp("emb1");
    std::mt19937_64 rng(11);
    const EmbeddingTable t = testsup::random_table(rng, 7, 5);
    const auto f1 = tmp.path() / "a.emb1";
    const auto f2 = tmp.path() / "b.emb1";
    write_embeddings(t, f1);
    const EmbeddingTable back = read_embeddings(f1);
    CHECK(back.data == t.data);
    write_embeddings(back, f2);
    CHECK(testsup::slurp(f1) == testsup::slurp(f2));
}

TEST_CASE("emb1 identity matrix round trip") {
    TempDir tmp("emb1");
    EmbeddingTable t;
    t.data = Matrix32::Identity(2, 2);
    const auto file = tmp.path() / "i.emb1";
    write_embeddings(t, file);
    CHECK(read_embeddings(file).data == t.data);
}

TEST_CASE("emb1 error paths produce distinct codes") {
    TempDir tmp("emb1");
    const auto file = tmp.path() / "t.emb1";
    const std::string good = emb1_bytes(1, 2, 2, {1, 2, 3, 4});

    write_raw(file, "XXXX" + good.substr(4));
    CHECK_THROWS_WITH_AS(read_embeddings(file), doctest::Contains("bad magic"), Error);

    write_raw(file, emb1_bytes(2, 2, 2, {1, 2, 3, 4}));
    try {
        read_embeddings(file);
        FAIL("expected version mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::version_mismatch);
    }

    write_raw(file, good.substr(0, good.size() - 3));  // truncated mid-data
    try {
        read_embeddings(file);
        FAIL("expected size mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::size_mismatch);
    }

    write_raw(file, good + "zz");  // trailing garbage
    try {
        read_embeddings(file);
        FAIL("expected size mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::size_mismatch);
    }

    const float nan = std::numeric_limits<float>::quiet_NaN();
    write_raw(file, emb1_bytes(1, 1, 2, {1.0f, nan}));
    try {
        read_embeddings(file);
        FAIL("expected non-finite");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_finite);
    }
}

TEST_CASE("write_embeddings rejects NaN before touching the file") {
    TempDir tmp("emb1");
    EmbeddingTable t;
    t.data.resize(1, 2);
    t.data(0, 0) = 1.0f;
    t.data(0, 1) = std::numeric_limits<float>::quiet_NaN();
    const auto file = tmp.path() / "bad.emb1";
    CHECK_THROWS_AS(write_embeddings(t, file), Error);
    CHECK(!std::filesystem::exists(file));
}

TEST_CASE("metadata reads three records") {
    TempDir tmp("meta");
    const auto file = tmp.path() / "m.jsonl";
    write_raw(file,
              R"({"id":"a","class":0,"pred":0,"confidence":0.9})"
              "\n"
              R"({"id":"b","class":1,"pred":0,"confidence":0.4,"group":"minority"})"
              "\n"
              R"({"id":"c","class":1,"pred":1,"confidence":0.8,"group":null})"
              "\n");
    const auto meta = read_metadata(file, 3);
    REQUIRE(meta.size() == 3);
    CHECK(meta[0].id == "a");
    CHECK(meta[1].group == "minority");
    CHECK(!meta[2].group.has_value());
    CHECK(meta[1].confidence == 0.4);
}

TEST_CASE("metadata rejects duplicates, bad counts and bad confidence") {
    TempDir tmp("meta");
    const auto file = tmp.path() / "m.jsonl";

    write_raw(file,
              R"({"id":"a","class":0,"pred":0,"confidence":0.9})"
              "\n"
              R"({"id":"a","class":1,"pred":1,"confidence":0.8})"
              "\n");
    try {
        read_metadata(file, 2);
        FAIL("expected duplicate id");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_id);
    }

    write_raw(file,
              R"({"id":"a","class":0,"pred":0,"confidence":0.9})"
              "\n"
              R"({"id":"b","class":1,"pred":1,"confidence":0.8})"
              "\n"
              R"({"id":"c","class":1,"pred":1,"confidence":0.8})"
              "\n");
    try {
        read_metadata(file, 2);
        FAIL("expected row-count mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::row_count_mismatch);
    }

    write_raw(file, R"({"id":"a","class":0,"pred":0,"confidence":1.5})"
                    "\n");
    try {
        read_metadata(file, 1);
        FAIL("expected confidence range error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::confidence_out_of_range);
    }
}

TEST_CASE("metadata write/read round trip") {
    TempDir tmp("meta");
    const auto file = tmp.path() / "m.jsonl";
    std::vector<ExampleMeta> meta = {
        {"x1", 0, 0, 0.75, std::nullopt},
        {"x2", 0, 1, 0.125, std::string("minority")},
    };
    write_metadata(meta, file);
    const auto back = read_metadata(file, 2);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == meta[0].id);
    CHECK(back[0].confidence == meta[0].confidence);
    CHECK(back[1].group == meta[1].group);
    CHECK(back[1].pred == 1);
}

TEST_CASE("correctness label") {
    CHECK(correctness_label({"a", 1, 1, 0.5, {}}) == 1);
    CHECK(correctness_label({"b", 0, 1, 0.5, {}}) == -1);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> any(-50, 50);
    for (int i = 0; i < 200; ++i) {
        const int label = correctness_label({"x", any(rng), any(rng), 0.5, {}});
        CHECK((label == 1 || label == -1));
    }
}

TEST_CASE("direction json round trip") {
    TempDir tmp("dir");
    ClassDirection dir;
    dir.class_id = 3;
    dir.w = Eigen::Vector3d(0.25, -1.5, 2.0);
    dir.w_hat = dir.w / dir.w.norm();
    dir.b = -0.125;
    dir.cv_score = 0.875;
    dir.C = 0.1;
    dir.n_correct = 40;
    dir.n_incorrect = 9;
    dir.profile = ProfileKind::norm_only;
    const auto file = tmp.path() / "class_3.json";
    write_direction(dir, file);
    const ClassDirection back = read_direction(file);
    CHECK(back.class_id == 3);
    CHECK(back.w == dir.w);
    CHECK(back.w_hat == dir.w_hat);
    CHECK(back.b == dir.b);
    CHECK(back.cv_score == dir.cv_score);
    CHECK(back.C == dir.C);
    CHECK(back.n_correct == 40);
    CHECK(back.profile == ProfileKind::norm_only);
}

TEST_CASE("direction validation") {
    ClassDirection dir;
    dir.w = Eigen::VectorXd::Zero(3);
    dir.w_hat = dir.w;
    CHECK_THROWS_AS(dir.validate(), Error);
    dir.w = Eigen::Vector3d(1, 0, 0);
    dir.w_hat = dir.w;
    dir.cv_score = 1.5;
    CHECK_THROWS_AS(dir.validate(), Error);
    dir.cv_score = 0.5;
    CHECK_NOTHROW(dir.validate());
}

TEST_CASE("caption set enforces exactly one reference per class") {
    CaptionSet set;
    set.embeddings.data = Matrix32::Identity(3, 3);
    set.records = {
        {"a photo of a cat", 0, CaptionKind::reference},
        {"a photo of a white cat", 0, CaptionKind::candidate},
        {"a photo of a black cat", 0, CaptionKind::candidate},
    };
    CHECK_NOTHROW(set.validate());
    CHECK(set.reference_row(0) == 0);
    CHECK(set.candidate_rows(0) == std::vector<Eigen::Index>{1, 2});

    set.records[1].kind = CaptionKind::reference;
    CHECK_THROWS_AS(set.validate(), Error);

    set.records[0].kind = CaptionKind::candidate;
    set.records[1].kind = CaptionKind::candidate;
    CHECK_THROWS_AS(set.validate(), Error);
}

TEST_CASE("caption jsonl round trip") {
    TempDir tmp("cap");
    const std::vector<CaptionRecord> records = {
        {"a photo of a dog", 1, CaptionKind::reference},
        {"a photo of a black dog", 1, CaptionKind::candidate},
    };
    write_captions(records, tmp.path() / "c.jsonl");
    EmbeddingTable emb;
    emb.data = Matrix32::Identity(2, 4);
    write_embeddings(emb, tmp.path() / "c.emb1");
    const CaptionSet set = read_caption_set(tmp.path() / "c.jsonl", tmp.path() / "c.emb1");
    REQUIRE(set.records.size() == 2);
    CHECK(set.records[0].kind == CaptionKind::reference);
    CHECK(set.records[1].text == "a photo of a black dog");
    CHECK(set.embeddings.data == emb.data);
}
