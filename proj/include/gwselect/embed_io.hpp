#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "gwselect/error.hpp"
#include "gwselect/rng.hpp"

namespace gwselect {

enum class Modality : std::uint8_t { vision = 0, text = 1 };

inline const char* to_string(Modality m) { return m == Modality::vision ? "vision" : "text"; }

using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One modality's sampled representations. Row i embeds ids[i].
struct EmbeddingSet {
    std::vector<std::string> ids;
    Modality modality = Modality::vision;
    FloatRows data;
    std::string source;

    std::size_t size() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }

    // Bitwise comparison of the payload.
    friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
        if (a.ids != b.ids || a.modality != b.modality || a.source != b.source) return false;
        if (a.data.rows() != b.data.rows() || a.data.cols() != b.data.cols()) return false;
        return std::memcmp(a.data.data(), b.data.data(), sizeof(float) * a.data.size()) == 0;
    }
};

struct PairedSample {
    EmbeddingSet vision;
    EmbeddingSet text;
    std::uint64_t seed = 0;
    std::vector<std::size_t> indices;  // rows taken from the full sets, ascending
};

// Throws validation errors naming the offending row.
inline void validate(const EmbeddingSet& set) {
    const auto n = set.size();
    if (n < 2) throw Error(ErrorKind::validation, "need at least 2 samples, got " + std::to_string(n));
    if (set.dim() < 1) throw Error(ErrorKind::validation, "embedding dimension must be >= 1");
    if (set.ids.size() != n) {
        throw Error(ErrorKind::validation, "ids length " + std::to_string(set.ids.size()) +
                                               " does not match row count " + std::to_string(n));
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen.insert(set.ids[i]).second) {
            throw Error(ErrorKind::validation, "row " + std::to_string(i) + ": duplicate id '" + set.ids[i] + "'");
        }
        double sq = 0.0;
        for (Eigen::Index j = 0; j < set.data.cols(); ++j) {
            const float v = set.data(static_cast<Eigen::Index>(i), j);
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::validation, "row " + std::to_string(i) + ": non-finite entry at column " +
                                                       std::to_string(j));
            }
            sq += static_cast<double>(v) * v;
        }
        if (sq == 0.0) throw Error(ErrorKind::validation, "row " + std::to_string(i) + ": zero-norm vector");
    }
}

namespace detail {

constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kEmbVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

inline void put_f64(std::string& out, double f) {
    std::uint64_t bits;
    std::memcpy(&bits, &f, 8);
    put_u64(out, bits);
}

inline void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

// Little-endian cursor over an in-memory file.
class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

    void need(std::size_t count, const char* what) const {
        if (bytes_.size() - pos_ < count) {
            throw Error(ErrorKind::format, path_ + ": truncated while reading " + what);
        }
    }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += 8;
        return v;
    }

    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }

    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double f;
        std::memcpy(&f, &bits, 8);
        return f;
    }

    std::string str(const char* what) {
        const std::uint32_t len = u32(what);
        need(len, what);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void dump(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

inline bool is_csv(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline EmbeddingSet parse_emb1(const std::string& bytes, const std::string& path) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbMagic, 4) != 0) {
        throw Error(ErrorKind::format, path + ": bad magic (expected EMB1)");
    }
    const std::string body = bytes.substr(4);
    ByteReader r(body, path);
    const auto version = r.u32("version");
    if (version != kEmbVersion) throw Error(ErrorKind::format, path + ": unsupported version " + std::to_string(version));
    const auto n = r.u32("n");
    const auto d = r.u32("d");
    const auto modality = r.u8("modality");
    if (modality > 1) throw Error(ErrorKind::format, path + ": unknown modality byte " + std::to_string(modality));

    EmbeddingSet set;
    set.modality = static_cast<Modality>(modality);
    set.source = r.str("source metadata");
    set.ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) set.ids.push_back(r.str("ids block"));

    const std::uint64_t payload = std::uint64_t(n) * d * 4;
    if (r.remaining() < payload) {
        throw Error(ErrorKind::format, path + ": truncated payload, header declares " + std::to_string(n) + "x" +
                                           std::to_string(d) + " but only " + std::to_string(r.remaining() / 4) +
                                           " values present");
    }
    if (r.remaining() > payload) throw Error(ErrorKind::format, path + ": trailing bytes after payload");
    set.data.resize(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j) set.data(i, j) = r.f32("payload");
    return set;
}

inline EmbeddingSet parse_csv(const std::string& text, const std::string& path, Modality modality) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::format, path + ": empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "id") throw Error(ErrorKind::format, path + ": CSV header must be id,v0,...");
    const std::size_t d = header.size() - 1;

    EmbeddingSet set;
    set.modality = modality;
    set.source = std::filesystem::path(path).filename().string();
    std::vector<float> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != d + 1) {
            throw Error(ErrorKind::format, path + ": row " + std::to_string(row) + " has " +
                                               std::to_string(fields.size() - 1) + " values, expected " +
                                               std::to_string(d));
        }
        set.ids.push_back(fields[0]);
        for (std::size_t j = 1; j <= d; ++j) {
            try {
                std::size_t used = 0;
                values.push_back(std::stof(fields[j], &used));
                if (used != fields[j].size()) throw std::invalid_argument("trailing");
            } catch (const std::out_of_range&) {
                throw Error(ErrorKind::validation, "row " + std::to_string(row) + ": non-finite entry at column " +
                                                       std::to_string(j - 1));
            } catch (const std::exception&) {
                throw Error(ErrorKind::format, path + ": row " + std::to_string(row) + " column " +
                                                   std::to_string(j - 1) + " is not a number");
            }
        }
        ++row;
    }
    set.data.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
    std::copy(values.begin(), values.end(), set.data.data());
    return set;
}

}  // namespace detail

// EMB1 is detected by magic; a ".csv" extension selects the text fallback,
// whose rows carry no modality tag, so `csv_modality` fills it in.
inline EmbeddingSet read_embeddings(const std::filesystem::path& path, Modality csv_modality = Modality::vision) {
    const std::string bytes = detail::slurp(path);
    EmbeddingSet set = (bytes.size() >= 4 && std::memcmp(bytes.data(), detail::kEmbMagic, 4) == 0) ||
                               !detail::is_csv(path)
                           ? detail::parse_emb1(bytes, path.string())
                           : detail::parse_csv(bytes, path.string(), csv_modality);
    validate(set);
    return set;
}

inline std::string encode_emb1(const EmbeddingSet& set) {
    std::string out(detail::kEmbMagic, 4);
    detail::put_u32(out, detail::kEmbVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(set.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(set.dim()));
    out.push_back(static_cast<char>(set.modality));
    detail::put_str(out, set.source);
    for (const auto& id : set.ids) detail::put_str(out, id);
    out.reserve(out.size() + 4 * set.data.size());
    for (Eigen::Index i = 0; i < set.data.rows(); ++i)
        for (Eigen::Index j = 0; j < set.data.cols(); ++j) detail::put_f32(out, set.data(i, j));
    return out;
}

// Writes EMB1, or CSV when the path ends in ".csv". Invalid sets are rejected
// before the file is touched.
inline void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
    validate(set);
    if (detail::is_csv(path)) {
        std::string out = "id";
        for (std::size_t j = 0; j < set.dim(); ++j) out += ",v" + std::to_string(j);
        out += '\n';
        char buf[32];
        for (std::size_t i = 0; i < set.size(); ++i) {
            out += set.ids[i];
            for (std::size_t j = 0; j < set.dim(); ++j) {
                std::snprintf(buf, sizeof buf, ",%.9g",
                              static_cast<double>(set.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
                out += buf;
            }
            out += '\n';
        }
        detail::dump(path, out);
        return;
    }
    detail::dump(path, encode_emb1(set));
}

inline EmbeddingSet select_rows(const EmbeddingSet& set, const std::vector<std::size_t>& rows) {
    EmbeddingSet out;
    out.modality = set.modality;
    out.source = set.source;
    out.data.resize(static_cast<Eigen::Index>(rows.size()), set.data.cols());
    out.ids.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.ids.push_back(set.ids[rows[r]]);
        out.data.row(static_cast<Eigen::Index>(r)) = set.data.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

inline void check_paired(const EmbeddingSet& vision, const EmbeddingSet& text) {
    if (vision.size() != text.size()) {
        throw Error(ErrorKind::pairing, "vision has " + std::to_string(vision.size()) + " rows, text has " +
                                            std::to_string(text.size()));
    }
    for (std::size_t i = 0; i < vision.size(); ++i) {
        if (vision.ids[i] != text.ids[i]) {
            throw Error(ErrorKind::pairing, "row " + std::to_string(i) + ": vision id '" + vision.ids[i] +
                                                "' != text id '" + text.ids[i] + "'");
        }
    }
}

// Indices chosen by a partial Fisher-Yates shuffle driven by SplitMix64(seed),
// returned in ascending order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) {
        throw Error(ErrorKind::size, "requested " + std::to_string(count) + " pairs from " + std::to_string(n));
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline PairedSample sample_pairs(const EmbeddingSet& vision, const EmbeddingSet& text, std::size_t count,
                                 std::uint64_t seed) {
    check_paired(vision, text);
    if (count == 0) throw Error(ErrorKind::size, "pair count must be positive");
    PairedSample out;
    out.seed = seed;
    out.indices = sample_indices(vision.size(), count, seed);
    out.vision = select_rows(vision, out.indices);
    out.text = select_rows(text, out.indices);
    return out;
}

inline Eigen::MatrixXd to_double(const EmbeddingSet& set) { return set.data.cast<double>(); }

}  // namespace gwselect
