#ifndef VIEWSYNTH_IO_HPP
#define VIEWSYNTH_IO_HPP

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "viewsynth/retrieval.hpp"
#include "viewsynth/surrogate.hpp"
#include "viewsynth/vocab.hpp"

namespace viewsynth {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ArgumentError("no such file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open for reading: " + path.string());
    return in;
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t take_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) {
        throw FormatError(std::string("truncated file while reading ") + what);
    }
    return v;
}

inline void put_magic(std::ostream& out, const char magic[5]) { out.write(magic, 4); }

inline void check_magic(std::istream& in, const char magic[5], const char* what) {
    char buf[4];
    if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
        throw FormatError(std::string("bad magic; not a ") + what + " file");
    }
    std::uint32_t version = take_u32(in, "version");
    if (version != 1) throw FormatError(std::string(what) + ": unsupported version");
}

inline void put_floats(std::ostream& out, std::span<const float> values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
}

inline void take_floats(std::istream& in, std::vector<float>& values, const char* what) {
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float)))) {
        throw FormatError(std::string(what) + ": payload shorter than header promises");
    }
}

inline void expect_eof(std::istream& in, const char* what) {
    char extra;
    if (in.read(&extra, 1)) {
        throw FormatError(std::string(what) + ": payload longer than header promises");
    }
}

inline void finish_write(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw ArgumentError("write failed: " + path.string());
}

/// Shortest round-trip decimal text for a double; integral values get a
/// trailing ".0" so the token always reads back as floating point.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, end);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
        s += ".0";
    }
    return s;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, const char* what) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        throw FormatError(std::string(what) + ": bad number '" + s + "'");
    }
    return v;
}

inline int parse_int(const std::string& s, const char* what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw FormatError(std::string(what) + ": bad integer '" + s + "'");
    }
    return v;
}

}  // namespace detail

// ---- MVFT: multi-view feature tensor ----

struct MvftData {
    int shapes = 0;
    int views = 0;
    int patches = 0;
    int dim = 0;
    std::vector<float> values;  // row-major (shape, view, patch, dim)
};

inline void write_mvft(const std::filesystem::path& path, int shapes, int views, int patches,
                       int dim, std::span<const float> values) {
    if (values.size() != static_cast<std::size_t>(shapes) * views * patches * dim) {
        throw ArgumentError("write_mvft: payload size does not match dims");
    }
    auto out = detail::open_out(path);
    detail::put_magic(out, "MVFT");
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(shapes));
    detail::put_u32(out, static_cast<std::uint32_t>(views));
    detail::put_u32(out, static_cast<std::uint32_t>(patches));
    detail::put_u32(out, static_cast<std::uint32_t>(dim));
    detail::put_floats(out, values);
    detail::finish_write(out, path);
}

inline MvftData read_mvft(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    detail::check_magic(in, "MVFT", "MVFT");
    MvftData data;
    data.shapes = static_cast<int>(detail::take_u32(in, "MVFT shape count"));
    data.views = static_cast<int>(detail::take_u32(in, "MVFT view count"));
    data.patches = static_cast<int>(detail::take_u32(in, "MVFT patch count"));
    data.dim = static_cast<int>(detail::take_u32(in, "MVFT feature dim"));
    if (data.shapes <= 0 || data.views <= 0 || data.patches <= 0 || data.dim <= 0) {
        throw FormatError("MVFT: zero dimension in header");
    }
    data.values.resize(static_cast<std::size_t>(data.shapes) * data.views * data.patches *
                       data.dim);
    detail::take_floats(in, data.values, "MVFT");
    detail::expect_eof(in, "MVFT");
    for (float v : data.values) {
        if (!std::isfinite(v)) throw FormatError("MVFT: non-finite feature value");
    }
    return data;
}

// ---- VOCB: codebook ----

inline void write_vocb(const std::filesystem::path& path, const Codebook& cb) {
    auto out = detail::open_out(path);
    detail::put_magic(out, "VOCB");
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(cb.words));
    detail::put_u32(out, static_cast<std::uint32_t>(cb.dim));
    detail::put_floats(out, cb.centers);
    detail::finish_write(out, path);
}

inline Codebook read_vocb(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    detail::check_magic(in, "VOCB", "VOCB");
    Codebook cb;
    cb.words = static_cast<int>(detail::take_u32(in, "VOCB word count"));
    cb.dim = static_cast<int>(detail::take_u32(in, "VOCB feature dim"));
    if (cb.words <= 0 || cb.dim <= 0) throw FormatError("VOCB: zero dimension in header");
    cb.centers.resize(static_cast<std::size_t>(cb.words) * cb.dim);
    detail::take_floats(in, cb.centers, "VOCB");
    detail::expect_eof(in, "VOCB");
    for (float v : cb.centers) {
        if (!std::isfinite(v)) throw FormatError("VOCB: non-finite center value");
    }
    return cb;
}

// ---- SSTB: suitability table (stored at float precision) ----

inline void write_sstb(const std::filesystem::path& path, const SuitabilityTable& table) {
    auto out = detail::open_out(path);
    detail::put_magic(out, "SSTB");
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(table.views));
    detail::put_u32(out, static_cast<std::uint32_t>(table.views));
    detail::put_u32(out, static_cast<std::uint32_t>(table.patches));
    detail::put_u32(out, static_cast<std::uint32_t>(table.patches));
    std::vector<float> values(table.gamma.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<float>(table.gamma[i]);
    }
    detail::put_floats(out, values);
    detail::finish_write(out, path);
}

inline SuitabilityTable read_sstb(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    detail::check_magic(in, "SSTB", "SSTB");
    SuitabilityTable table;
    table.views = static_cast<int>(detail::take_u32(in, "SSTB observed view count"));
    int views2 = static_cast<int>(detail::take_u32(in, "SSTB novel view count"));
    table.patches = static_cast<int>(detail::take_u32(in, "SSTB observed patch count"));
    int patches2 = static_cast<int>(detail::take_u32(in, "SSTB novel patch count"));
    if (table.views <= 0 || table.patches <= 0) throw FormatError("SSTB: zero dimension");
    if (views2 != table.views || patches2 != table.patches) {
        throw FormatError("SSTB: view/patch dims must be square");
    }
    std::vector<float> values(static_cast<std::size_t>(table.views) * table.views *
                              table.patches * table.patches);
    detail::take_floats(in, values, "SSTB");
    detail::expect_eof(in, "SSTB");
    table.gamma.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        float v = values[i];
        if (std::isnan(v) || v > 0.0f) throw FormatError("SSTB: entry must be <= 0 or -inf");
        table.gamma[i] = static_cast<double>(v);
    }
    return table;
}

// ---- labels CSV ----

inline void write_labels_csv(const std::filesystem::path& path,
                             const std::vector<std::string>& ids,
                             const std::vector<std::vector<std::string>>& labels) {
    if (ids.size() != labels.size()) throw ArgumentError("labels csv: id/label count mismatch");
    auto out = detail::open_out(path);
    out << "id,label\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << ",";
        for (std::size_t j = 0; j < labels[i].size(); ++j) {
            if (j) out << ";";
            out << labels[i][j];
        }
        out << "\n";
    }
    detail::finish_write(out, path);
}

inline std::map<std::string, std::vector<std::string>> read_labels_csv(
    const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != "id,label") {
        throw FormatError("labels csv: expected header 'id,label'");
    }
    std::map<std::string, std::vector<std::string>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = detail::split(line, ',');
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            throw FormatError("labels csv: bad row '" + line + "'");
        }
        out[fields[0]] = detail::split(fields[1], ';');
    }
    return out;
}

// ---- rankings TSV ----

struct RankingRow {
    std::string query;
    int rank = 0;
    std::string candidate;
    double distance = 0.0;
};

inline void write_rankings_tsv(const std::filesystem::path& path,
                               const std::vector<RankingRow>& rows) {
    auto out = detail::open_out(path);
    out << "query\trank\tcandidate\tdistance\n";
    for (const auto& r : rows) {
        out << r.query << "\t" << r.rank << "\t" << r.candidate << "\t"
            << detail::format_double(r.distance) << "\n";
    }
    detail::finish_write(out, path);
}

inline std::vector<RankingRow> read_rankings_tsv(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != "query\trank\tcandidate\tdistance") {
        throw FormatError("rankings tsv: bad header");
    }
    std::vector<RankingRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = detail::split(line, '\t');
        if (fields.size() != 4) throw FormatError("rankings tsv: bad row '" + line + "'");
        RankingRow r;
        r.query = fields[0];
        r.rank = detail::parse_int(fields[1], "rankings tsv rank");
        r.candidate = fields[2];
        r.distance = detail::parse_double(fields[3], "rankings tsv distance");
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---- PR curve CSV ----

inline void write_pr_csv(const std::filesystem::path& path, const PRCurve& curve) {
    auto out = detail::open_out(path);
    out << "recall,precision\n";
    for (const auto& [r, p] : curve.points) {
        out << detail::format_double(r) << "," << detail::format_double(p) << "\n";
    }
    detail::finish_write(out, path);
}

// ---- transfer matrix CSV ----

inline void write_transfer_csv(const std::filesystem::path& path, const TransferMatrix& m) {
    auto out = detail::open_out(path);
    for (int i = 0; i < m.views; ++i) {
        for (int j = 0; j < m.views; ++j) {
            if (j) out << ",";
            out << detail::format_double(m.at(i, j));
        }
        out << "\n";
    }
    detail::finish_write(out, path);
}

// ---- collection directory ----

/// On-disk collection layout: manifest.json plus the files it names
/// (features.mvft, labels.csv, and optionally vocab.vocb / suitability.sstb).
struct CollectionBundle {
    std::string name;
    ShapeCollection collection;
    std::vector<std::vector<std::string>> labels;  // aligned with collection ids
    std::optional<Codebook> codebook;
    std::optional<SuitabilityTable> table;
    std::uint64_t vocab_seed = 0;
};

namespace detail {

inline nlohmann::json load_manifest(const std::filesystem::path& dir) {
    auto in = open_in(dir / "manifest.json");
    nlohmann::json m;
    try {
        in >> m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    return m;
}

inline void store_manifest(const std::filesystem::path& dir, const nlohmann::json& m) {
    auto out = open_out(dir / "manifest.json");
    out << m.dump(2) << "\n";
    finish_write(out, dir / "manifest.json");
}

}  // namespace detail

inline void save_collection_dir(const std::filesystem::path& dir, const std::string& name,
                                const ShapeCollection& collection,
                                const std::vector<std::vector<std::string>>& labels) {
    if (static_cast<int>(labels.size()) != collection.size()) {
        throw ArgumentError("save_collection_dir: label count does not match shapes");
    }
    std::filesystem::create_directories(dir);
    write_mvft(dir / "features.mvft", collection.size(), collection.views(),
               collection.patches(), collection.dim(), collection.flat());
    write_labels_csv(dir / "labels.csv", collection.ids(), labels);
    nlohmann::json m;
    m["name"] = name;
    m["shape_ids"] = collection.ids();
    m["azimuths_deg"] = collection.view_set().azimuths_deg;
    m["grid"] = {{"image_side", collection.grid().image_side},
                 {"patch_side", collection.grid().patch_side},
                 {"stride", collection.grid().stride}};
    m["dim"] = collection.dim();
    m["words"] = 0;
    m["files"] = {{"features", "features.mvft"}, {"labels", "labels.csv"}};
    m["defaults"] = {{"k", 200}, {"k_p", 9}, {"seed", 0}};
    detail::store_manifest(dir, m);
}

inline void attach_vocab(const std::filesystem::path& dir, const Codebook& cb) {
    nlohmann::json m = detail::load_manifest(dir);
    write_vocb(dir / "vocab.vocb", cb);
    m["words"] = cb.words;
    m["files"]["vocab"] = "vocab.vocb";
    m["defaults"]["seed"] = cb.seed;
    detail::store_manifest(dir, m);
}

inline void attach_suitability(const std::filesystem::path& dir, const SuitabilityTable& table) {
    nlohmann::json m = detail::load_manifest(dir);
    write_sstb(dir / "suitability.sstb", table);
    m["files"]["suitability"] = "suitability.sstb";
    detail::store_manifest(dir, m);
}

inline CollectionBundle load_collection_dir(const std::filesystem::path& dir) {
    nlohmann::json m = detail::load_manifest(dir);
    CollectionBundle bundle;
    try {
        bundle.name = m.at("name").get<std::string>();
        std::vector<std::string> ids = m.at("shape_ids").get<std::vector<std::string>>();
        std::vector<double> azimuths = m.at("azimuths_deg").get<std::vector<double>>();
        PatchGridConfig grid;
        grid.image_side = m.at("grid").at("image_side").get<int>();
        grid.patch_side = m.at("grid").at("patch_side").get<int>();
        grid.stride = m.at("grid").at("stride").get<int>();
        int dim = m.at("dim").get<int>();
        int words = m.at("words").get<int>();

        MvftData data = read_mvft(dir / m.at("files").at("features").get<std::string>());
        if (data.shapes != static_cast<int>(ids.size()) ||
            data.views != static_cast<int>(azimuths.size()) ||
            data.patches != grid.patch_count() || data.dim != dim) {
            throw FormatError("features.mvft header does not match manifest");
        }
        ViewSet views{azimuths};
        bundle.collection = ShapeCollection(std::move(ids), std::move(views), grid, dim,
                                            std::move(data.values));

        auto label_map = read_labels_csv(dir / m.at("files").at("labels").get<std::string>());
        bundle.labels.reserve(bundle.collection.size());
        for (const auto& id : bundle.collection.ids()) {
            auto it = label_map.find(id);
            if (it == label_map.end()) {
                throw FormatError("labels.csv: missing label for shape " + id);
            }
            bundle.labels.push_back(it->second);
        }

        if (m.at("files").contains("vocab")) {
            Codebook cb = read_vocb(dir / m.at("files").at("vocab").get<std::string>());
            if (cb.dim != dim) throw FormatError("vocab.vocb dim does not match manifest");
            if (cb.words != words) throw FormatError("vocab.vocb word count does not match manifest");
            if (m.at("defaults").contains("seed")) {
                bundle.vocab_seed = m.at("defaults").at("seed").get<std::uint64_t>();
                cb.seed = bundle.vocab_seed;
            }
            bundle.codebook = std::move(cb);
        }
        if (m.at("files").contains("suitability")) {
            SuitabilityTable table =
                read_sstb(dir / m.at("files").at("suitability").get<std::string>());
            if (table.views != bundle.collection.views() ||
                table.patches != bundle.collection.patches()) {
                throw FormatError("suitability.sstb dims do not match the collection");
            }
            bundle.table = std::move(table);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    return bundle;
}

}  // namespace viewsynth

#endif
