#include "failure_lens/core_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "failure_lens/errors.hpp"
#include "failure_lens/util.hpp"

namespace flens {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(Errc::io_failure, "read failed for " + path.string());
    return bytes;
}

}  // namespace

void EmbeddingTable::validate() const {
    if (data.rows() < 1 || data.cols() < 1)
        fail(Errc::invalid_argument, "embedding table must be at least 1x1");
    if (!data.allFinite()) fail(Errc::non_finite, "embedding table contains non-finite entries");
}

const char* profile_kind_name(ProfileKind kind) {
    return kind == ProfileKind::whiten_norm ? "whiten_norm" : "norm_only";
}

ProfileKind profile_kind_from_name(const std::string& name) {
    if (name == "whiten_norm") return ProfileKind::whiten_norm;
    if (name == "norm_only") return ProfileKind::norm_only;
    fail(Errc::invalid_argument, "unknown preprocessing profile '" + name + "'");
}

void ClassDirection::validate() const {
    if (w.size() == 0 || w.norm() <= 0.0)
        fail(Errc::invalid_argument, "direction weight vector must have positive norm");
    if (w_hat.size() != w.size())
        fail(Errc::dim_mismatch, "w_hat length does not match w");
    if (!(cv_score >= 0.0 && cv_score <= 1.0))
        fail(Errc::invalid_argument, "cv_score outside [0,1]");
    if (!w.allFinite() || !std::isfinite(b))
        fail(Errc::non_finite, "direction contains non-finite values");
}

void CaptionSet::validate() const {
    if (static_cast<Eigen::Index>(records.size()) != embeddings.rows())
        fail(Errc::alignment, "caption records and caption embeddings disagree on row count");
    embeddings.validate();
    std::map<int, int> reference_counts;
    for (const auto& rec : records)
        if (rec.kind == CaptionKind::reference) ++reference_counts[rec.class_id];
    std::set<int> all_classes;
    for (const auto& rec : records) all_classes.insert(rec.class_id);
    for (int cls : all_classes) {
        const auto it = reference_counts.find(cls);
        const int n = it == reference_counts.end() ? 0 : it->second;
        if (n != 1)
            fail(Errc::missing_reference,
                 "class " + std::to_string(cls) + " has " + std::to_string(n) +
                     " reference captions (want exactly 1)");
    }
}

Eigen::Index CaptionSet::reference_row(int class_id) const {
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].class_id == class_id && records[i].kind == CaptionKind::reference)
            return static_cast<Eigen::Index>(i);
    fail(Errc::missing_reference, "no reference caption for class " + std::to_string(class_id));
}

std::vector<Eigen::Index> CaptionSet::candidate_rows(int class_id) const {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].class_id == class_id && records[i].kind == CaptionKind::candidate)
            rows.push_back(static_cast<Eigen::Index>(i));
    return rows;
}

std::vector<int> CaptionSet::classes() const {
    std::set<int> seen;
    for (const auto& rec : records) seen.insert(rec.class_id);
    return {seen.begin(), seen.end()};
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < 20) fail(Errc::size_mismatch, "file shorter than EMB1 header: " + path.string());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic, 4) != 0) fail(Errc::bad_magic, "not an EMB1 file: " + path.string());
    const std::uint32_t version = get_u32_le(p + 4);
    if (version != kVersion)
        fail(Errc::version_mismatch,
             "EMB1 version " + std::to_string(version) + " unsupported (want 1)");
    const std::uint64_t n_rows = get_u64_le(p + 8);
    const std::uint32_t dim = get_u32_le(p + 16);
    if (n_rows < 1 || dim < 1)
        fail(Errc::invalid_argument, "EMB1 header declares empty table: " + path.string());
    const std::uint64_t want = 20 + n_rows * static_cast<std::uint64_t>(dim) * 4;
    if (bytes.size() != want)
        fail(Errc::size_mismatch, path.string() + ": have " + std::to_string(bytes.size()) +
                                      " bytes, header implies " + std::to_string(want));

    EmbeddingTable table;
    table.data.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(dim));
    const unsigned char* cursor = p + 20;
    for (Eigen::Index i = 0; i < table.data.rows(); ++i) {
        for (Eigen::Index j = 0; j < table.data.cols(); ++j) {
            const std::uint32_t raw = get_u32_le(cursor);
            cursor += 4;
            table.data(i, j) = std::bit_cast<float>(raw);
        }
    }
    if (!table.data.allFinite())
        fail(Errc::non_finite, "EMB1 payload contains non-finite values: " + path.string());
    return table;
}

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    table.validate();
    std::string out;
    out.reserve(20 + static_cast<std::size_t>(table.rows() * table.dim()) * 4);
    out.append(kMagic, 4);
    put_u32_le(out, kVersion);
    put_u64_le(out, static_cast<std::uint64_t>(table.rows()));
    put_u32_le(out, static_cast<std::uint32_t>(table.dim()));
    for (Eigen::Index i = 0; i < table.rows(); ++i)
        for (Eigen::Index j = 0; j < table.dim(); ++j)
            put_u32_le(out, std::bit_cast<std::uint32_t>(table.data(i, j)));

    std::ofstream stream(path, std::ios::binary | std::ios::trunc);
    if (!stream) fail(Errc::io_failure, "cannot open for write: " + path.string());
    stream.write(out.data(), static_cast<std::streamsize>(out.size()));
    stream.flush();
    if (!stream) fail(Errc::io_failure, "write failed: " + path.string());
}

std::vector<ExampleMeta> read_metadata(const std::filesystem::path& path,
                                       std::int64_t expected_rows) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    std::vector<ExampleMeta> out;
    std::set<std::string> ids;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++line_no;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::invalid_argument,
                 path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        ExampleMeta meta;
        try {
            meta.id = doc.at("id").get<std::string>();
            meta.class_id = doc.at("class").get<int>();
            meta.pred = doc.at("pred").get<int>();
            meta.confidence = doc.at("confidence").get<double>();
            if (doc.contains("group") && !doc["group"].is_null())
                meta.group = doc["group"].get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::invalid_argument,
                 path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!std::isfinite(meta.confidence) || meta.confidence < 0.0 || meta.confidence > 1.0)
            fail(Errc::confidence_out_of_range,
                 "id '" + meta.id + "' has confidence " + format_number(meta.confidence));
        if (!ids.insert(meta.id).second) fail(Errc::duplicate_id, "id '" + meta.id + "'");
        out.push_back(std::move(meta));
    }
    if (static_cast<std::int64_t>(out.size()) != expected_rows)
        fail(Errc::row_count_mismatch, path.string() + " has " + std::to_string(out.size()) +
                                           " records, expected " + std::to_string(expected_rows));
    return out;
}

void write_metadata(std::span<const ExampleMeta> meta, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for write: " + path.string());
    for (const auto& m : meta) {
        nlohmann::json doc;
        doc["id"] = m.id;
        doc["class"] = m.class_id;
        doc["pred"] = m.pred;
        doc["confidence"] = m.confidence;
        if (m.group) doc["group"] = *m.group;
        out << doc.dump() << "\n";
    }
    out.flush();
    if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

std::vector<CaptionRecord> read_captions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    std::vector<CaptionRecord> out;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++line_no;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::invalid_argument,
                 path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        CaptionRecord rec;
        rec.text = doc.at("text").get<std::string>();
        rec.class_id = doc.at("class").get<int>();
        const std::string kind = doc.at("kind").get<std::string>();
        if (kind == "reference") {
            rec.kind = CaptionKind::reference;
        } else if (kind == "candidate") {
            rec.kind = CaptionKind::candidate;
        } else {
            fail(Errc::invalid_argument,
                 path.string() + " line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_captions(std::span<const CaptionRecord> records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for write: " + path.string());
    for (const auto& rec : records) {
        nlohmann::json doc;
        doc["text"] = rec.text;
        doc["class"] = rec.class_id;
        doc["kind"] = rec.kind == CaptionKind::reference ? "reference" : "candidate";
        out << doc.dump() << "\n";
    }
    out.flush();
    if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

CaptionSet read_caption_set(const std::filesystem::path& captions_jsonl,
                            const std::filesystem::path& embeddings_emb1) {
    CaptionSet set;
    set.records = read_captions(captions_jsonl);
    set.embeddings = read_embeddings(embeddings_emb1);
    set.validate();
    return set;
}

ClassDirection read_direction(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, path.string() + ": " + e.what());
    }
    ClassDirection dir;
    dir.class_id = doc.at("class").get<int>();
    const auto w = doc.at("w").get<std::vector<double>>();
    dir.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    const auto w_hat = doc.at("w_hat").get<std::vector<double>>();
    dir.w_hat =
        Eigen::Map<const Eigen::VectorXd>(w_hat.data(), static_cast<Eigen::Index>(w_hat.size()));
    dir.b = doc.at("b").get<double>();
    dir.cv_score = doc.at("cv_score").get<double>();
    dir.C = doc.at("C").get<double>();
    dir.n_correct = doc.at("n_correct").get<std::int64_t>();
    dir.n_incorrect = doc.at("n_incorrect").get<std::int64_t>();
    dir.profile = profile_kind_from_name(doc.at("preprocessing_profile").get<std::string>());
    dir.validate();
    return dir;
}

void write_direction(const ClassDirection& direction, const std::filesystem::path& path) {
    direction.validate();
    nlohmann::json doc;
    doc["class"] = direction.class_id;
    doc["w"] = std::vector<double>(direction.w.data(), direction.w.data() + direction.w.size());
    doc["w_hat"] =
        std::vector<double>(direction.w_hat.data(), direction.w_hat.data() + direction.w_hat.size());
    doc["b"] = direction.b;
    doc["cv_score"] = direction.cv_score;
    doc["C"] = direction.C;
    doc["n_correct"] = direction.n_correct;
    doc["n_incorrect"] = direction.n_incorrect;
    doc["preprocessing_profile"] = profile_kind_name(direction.profile);
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open for write: " + path.string());
    out << doc.dump(2) << "\n";
    out.flush();
    if (!out) fail(Errc::io_failure, "write failed: " + path.string());
}

}  // namespace flens
