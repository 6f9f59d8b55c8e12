#pragma once
// CSV/JSON ingestion and serialization for surveys, registries and estimates.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsum/data_model.hpp"

namespace nsum {

inline constexpr int kSchemaVersion = 1;

namespace csv {

// RFC 4180-ish: quoted fields, doubled quotes, CRLF tolerated.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get();
            rec.push_back(std::move(field));
            field.clear();
            if (!(rec.size() == 1 && rec[0].empty())) out.push_back(std::move(rec));
            rec.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) fail(ErrorCode::Parse, "unterminated quoted field");
    if (any) {
        rec.push_back(std::move(field));
        if (!(rec.size() == 1 && rec[0].empty())) out.push_back(std::move(rec));
    }
    return out;
}

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

// shortest text that parses back to the same double
inline std::string fmt(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

}  // namespace csv

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot write " + path);
    f << text;
    f.flush();
    if (!f) fail(ErrorCode::Io, "write failed for " + path);
}

// FNV-1a 64, hex
inline std::string digest(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

inline std::string digest_files(const std::vector<std::string>& paths) {
    std::string all;
    for (const auto& p : paths) {
        all += read_file(p);
        all += '\0';
    }
    return "fnv1a64:" + digest(all);
}

namespace detail {

inline Count parse_count(const std::string& s, const std::string& row, const std::string& col) {
    if (s.empty()) throw Error(ErrorCode::MissingValue, row, "column " + col);
    Count v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e || v < 0)
        throw Error(ErrorCode::NonIntegerCount, row, "column " + col + " value '" + s + "'");
    return v;
}

inline double parse_real(const std::string& s, const std::string& row, const std::string& col) {
    if (s.empty()) throw Error(ErrorCode::MissingValue, row, "column " + col);
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw Error(ErrorCode::Parse, row, "column " + col + " value '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& row, const std::string& col) {
    if (s == "1" || s == "true" || s == "TRUE") return true;
    if (s == "0" || s == "false" || s == "FALSE") return false;
    if (s.empty()) throw Error(ErrorCode::MissingValue, row, "column " + col);
    throw Error(ErrorCode::Parse, row, "column " + col + " is not boolean");
}

// "{a:5,b:0}" -> {{"a",5},{"b",0}}
inline std::vector<std::pair<std::string, Count>> parse_map(const std::string& s, const std::string& row) {
    std::string t = s;
    auto trim = [](std::string x) {
        const auto b = x.find_first_not_of(" \t");
        const auto e = x.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : x.substr(b, e - b + 1);
    };
    t = trim(t);
    if (t.size() < 2 || t.front() != '{' || t.back() != '}') throw Error(ErrorCode::Parse, row, "probe map '" + s + "'");
    t = t.substr(1, t.size() - 2);
    std::vector<std::pair<std::string, Count>> out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto c = item.find(':');
        if (c == std::string::npos) throw Error(ErrorCode::Parse, row, "probe map entry '" + item + "'");
        std::string k = trim(item.substr(0, c));
        if (k.size() >= 2 && (k.front() == '"' || k.front() == '\'')) k = k.substr(1, k.size() - 2);
        out.emplace_back(k, parse_count(trim(item.substr(c + 1)), row, "y_probe." + k));
    }
    return out;
}

inline bool starts_with(const std::string& s, const char* p) { return s.rfind(p, 0) == 0; }

}  // namespace detail

// Frame CSV: id,weight,stratum,psu,y_hidden,y_<gid>...,member_<gid>...
// A single `y_probe` column holding "{gid:count,...}" is also accepted.
inline FrameSurvey parse_frame_survey(std::istream& in, const KnownPopulationRegistry& reg,
                                      std::optional<Count> top_code = std::nullopt) {
    using namespace detail;
    auto recs = csv::parse(in);
    if (recs.empty()) fail(ErrorCode::EmptySample, "frame survey file is empty");
    const auto& hdr = recs[0];
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < hdr.size(); ++c) {
        if (!col.emplace(hdr[c], c).second) throw Error(ErrorCode::Parse, "header", "duplicate column " + hdr[c]);
    }
    for (const char* need : {"id", "weight", "stratum", "psu", "y_hidden"})
        if (!col.count(need)) throw Error(ErrorCode::MissingColumn, "header", need);

    FrameSurvey s;
    std::vector<std::size_t> ycol;
    std::map<std::string, std::size_t> member_col;
    const bool map_form = col.count("y_probe") > 0;
    for (std::size_t c = 0; c < hdr.size(); ++c) {
        const auto& h = hdr[c];
        if (h == "id" || h == "weight" || h == "stratum" || h == "psu" || h == "y_hidden" || h == "y_probe") continue;
        if (starts_with(h, "y_") && !map_form) {
            const std::string g = h.substr(2);
            if (!reg.index_of(g)) throw Error(ErrorCode::UnknownGroup, "header", g);
            s.group_ids.push_back(g);
            ycol.push_back(c);
        } else if (starts_with(h, "member_")) {
            const std::string g = h.substr(7);
            if (!reg.index_of(g)) throw Error(ErrorCode::UnknownGroup, "header", g);
            member_col[g] = c;
        } else {
            throw Error(ErrorCode::Parse, "header", "unexpected column " + h);
        }
    }
    if (map_form) {
        for (const auto& g : reg.groups) s.group_ids.push_back(g.id);
    } else {
        for (const auto& g : reg.groups)
            if (!s.column_of(g.id)) throw Error(ErrorCode::MissingColumn, "header", "y_" + g.id);
    }
    s.has_membership.assign(s.group_ids.size(), false);
    std::vector<std::optional<std::size_t>> mcol(s.group_ids.size());
    for (const auto& [g, c] : member_col) {
        auto j = s.column_of(g);
        if (!j) throw Error(ErrorCode::UnknownGroup, "header", "member_" + g + " without y_" + g);
        s.has_membership[*j] = true;
        mcol[*j] = c;
    }

    auto cap = [&](Count y) { return top_code ? std::min(y, *top_code) : y; };
    for (std::size_t r = 1; r < recs.size(); ++r) {
        const auto& rec = recs[r];
        const std::string where = rec.size() > col["id"] && !rec[col["id"]].empty() ? rec[col["id"]]
                                                                                    : "line " + std::to_string(r + 1);
        if (rec.size() != hdr.size())
            throw Error(ErrorCode::MissingValue, where,
                        "expected " + std::to_string(hdr.size()) + " fields, got " + std::to_string(rec.size()));
        FrameRow row;
        row.id = rec[col["id"]];
        if (row.id.empty()) throw Error(ErrorCode::MissingValue, where, "id");
        row.weight = parse_real(rec[col["weight"]], where, "weight");
        if (!std::isfinite(row.weight) || row.weight <= 0)
            throw Error(ErrorCode::NonpositiveWeight, where, "weight " + rec[col["weight"]]);
        row.stratum = rec[col["stratum"]];
        row.psu = rec[col["psu"]];
        row.y_hidden = cap(parse_count(rec[col["y_hidden"]], where, "y_hidden"));
        row.y_probe.assign(s.group_ids.size(), 0);
        if (map_form) {
            std::vector<bool> seen(s.group_ids.size(), false);
            for (const auto& [g, y] : parse_map(rec[col["y_probe"]], where)) {
                auto j = s.column_of(g);
                if (!j) throw Error(ErrorCode::UnknownGroup, where, g);
                row.y_probe[*j] = cap(y);
                seen[*j] = true;
            }
            for (std::size_t j = 0; j < seen.size(); ++j)
                if (!seen[j]) throw Error(ErrorCode::MissingValue, where, "y_probe." + s.group_ids[j]);
        } else {
            for (std::size_t j = 0; j < ycol.size(); ++j)
                row.y_probe[j] = cap(parse_count(rec[ycol[j]], where, hdr[ycol[j]]));
        }
        row.member.assign(s.group_ids.size(), 0);
        for (std::size_t j = 0; j < mcol.size(); ++j)
            if (mcol[j]) row.member[j] = parse_bool(rec[*mcol[j]], where, hdr[*mcol[j]]) ? 1 : 0;
        s.rows.push_back(std::move(row));
    }
    s.design = s.derive_design();
    s.validate();
    return s;
}

inline FrameSurvey load_frame_survey(const std::string& path, const KnownPopulationRegistry& reg,
                                     std::optional<Count> top_code = std::nullopt) {
    std::istringstream in(read_file(path));
    return parse_frame_survey(in, reg, top_code);
}

inline std::string format_frame_survey(const FrameSurvey& s) {
    std::string out = "id,weight,stratum,psu,y_hidden";
    for (const auto& g : s.group_ids) out += ",y_" + csv::quote(g);
    for (std::size_t j = 0; j < s.group_ids.size(); ++j)
        if (s.has_membership[j]) out += ",member_" + csv::quote(s.group_ids[j]);
    out += '\n';
    for (const auto& r : s.rows) {
        out += csv::quote(r.id) + ',' + csv::fmt(r.weight) + ',' + csv::quote(r.stratum) + ',' + csv::quote(r.psu) +
               ',' + std::to_string(r.y_hidden);
        for (Count y : r.y_probe) out += ',' + std::to_string(y);
        for (std::size_t j = 0; j < s.group_ids.size(); ++j)
            if (s.has_membership[j]) out += r.member[j] ? ",1" : ",0";
        out += '\n';
    }
    return out;
}

inline void save_frame_survey(const FrameSurvey& s, const std::string& path) { write_file(path, format_frame_survey(s)); }

// Hidden CSV: id,rel_weight,group_flag,y_<gid>...,v_<gid>...; other columns pass through.
inline HiddenSurvey parse_hidden_survey(std::istream& in, const KnownPopulationRegistry& reg,
                                        std::optional<Count> top_code = std::nullopt) {
    using namespace detail;
    auto recs = csv::parse(in);
    if (recs.empty()) fail(ErrorCode::EmptySample, "hidden survey file is empty");
    const auto& hdr = recs[0];
    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < hdr.size(); ++c)
        if (!col.emplace(hdr[c], c).second) throw Error(ErrorCode::Parse, "header", "duplicate column " + hdr[c]);
    for (const char* need : {"id", "rel_weight"})
        if (!col.count(need)) throw Error(ErrorCode::MissingColumn, "header", need);

    HiddenSurvey h;
    std::vector<std::size_t> ycol, vcol, pcol;
    for (std::size_t c = 0; c < hdr.size(); ++c) {
        const auto& name = hdr[c];
        if (name == "id" || name == "rel_weight" || name == "group_flag") continue;
        if (starts_with(name, "y_")) {
            const std::string g = name.substr(2);
            if (!reg.index_of(g)) throw Error(ErrorCode::UnknownGroup, "header", g);
            if (!col.count("v_" + g)) throw Error(ErrorCode::MissingColumn, "header", "v_" + g);
            h.group_ids.push_back(g);
            ycol.push_back(c);
            vcol.push_back(col["v_" + g]);
        } else if (starts_with(name, "v_")) {
            const std::string g = name.substr(2);
            if (!reg.index_of(g)) throw Error(ErrorCode::UnknownGroup, "header", g);
            if (!col.count("y_" + g)) throw Error(ErrorCode::MissingColumn, "header", "y_" + g);
        } else {
            h.passthrough_columns.push_back(name);
            pcol.push_back(c);
        }
    }
    for (const auto& g : reg.groups)
        if (g.size_on_frame > 0 && !h.column_of(g.id)) throw Error(ErrorCode::MissingColumn, "header", "y_" + g.id);

    auto cap = [&](Count y) { return top_code ? std::min(y, *top_code) : y; };
    const bool has_flag = col.count("group_flag") > 0;
    for (std::size_t r = 1; r < recs.size(); ++r) {
        const auto& rec = recs[r];
        const std::string where = rec.size() > col["id"] && !rec[col["id"]].empty() ? rec[col["id"]]
                                                                                    : "line " + std::to_string(r + 1);
        if (rec.size() != hdr.size())
            throw Error(ErrorCode::MissingValue, where,
                        "expected " + std::to_string(hdr.size()) + " fields, got " + std::to_string(rec.size()));
        HiddenRow row;
        row.id = rec[col["id"]];
        if (row.id.empty()) throw Error(ErrorCode::MissingValue, where, "id");
        row.rel_weight = parse_real(rec[col["rel_weight"]], where, "rel_weight");
        if (!std::isfinite(row.rel_weight) || row.rel_weight <= 0)
            throw Error(ErrorCode::NonpositiveWeight, where, "rel_weight " + rec[col["rel_weight"]]);
        if (has_flag && !rec[col["group_flag"]].empty())
            row.group_flag = parse_bool(rec[col["group_flag"]], where, "group_flag") ? 1 : 0;
        for (std::size_t j = 0; j < ycol.size(); ++j) {
            row.y.push_back(cap(parse_count(rec[ycol[j]], where, hdr[ycol[j]])));
            row.v.push_back(cap(parse_count(rec[vcol[j]], where, hdr[vcol[j]])));
        }
        for (auto c : pcol) row.passthrough.push_back(rec[c]);
        h.rows.push_back(std::move(row));
    }
    h.validate();
    return h;
}

inline HiddenSurvey load_hidden_survey(const std::string& path, const KnownPopulationRegistry& reg,
                                       std::optional<Count> top_code = std::nullopt) {
    std::istringstream in(read_file(path));
    return parse_hidden_survey(in, reg, top_code);
}

inline std::string format_hidden_survey(const HiddenSurvey& h) {
    std::string out = "id,rel_weight,group_flag";
    for (const auto& g : h.group_ids) out += ",y_" + csv::quote(g);
    for (const auto& g : h.group_ids) out += ",v_" + csv::quote(g);
    for (const auto& p : h.passthrough_columns) out += ',' + csv::quote(p);
    out += '\n';
    for (const auto& r : h.rows) {
        out += csv::quote(r.id) + ',' + csv::fmt(r.rel_weight) + ',' + (r.group_flag ? std::to_string(*r.group_flag) : "");
        for (Count y : r.y) out += ',' + std::to_string(y);
        for (Count v : r.v) out += ',' + std::to_string(v);
        for (const auto& p : r.passthrough) out += ',' + csv::quote(p);
        out += '\n';
    }
    return out;
}

inline void save_hidden_survey(const HiddenSurvey& h, const std::string& path) {
    write_file(path, format_hidden_survey(h));
}

// ---- registry ----

inline nlohmann::json registry_to_json(const KnownPopulationRegistry& reg) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["groups"] = nlohmann::json::array();
    for (const auto& g : reg.groups)
        j["groups"].push_back({{"id", g.id}, {"size_total", g.size_total}, {"size_on_frame", g.size_on_frame}});
    j["frame_size"] = reg.frame_size;
    j["universe_size"] = reg.universe_size;
    return j;
}

inline KnownPopulationRegistry registry_from_json(const nlohmann::json& j) {
    KnownPopulationRegistry reg;
    try {
        for (const auto& g : j.at("groups"))
            reg.groups.push_back({g.at("id").get<std::string>(), g.at("size_total").get<Count>(),
                                  g.at("size_on_frame").get<Count>()});
        reg.frame_size = j.at("frame_size").get<Count>();
        reg.universe_size = j.at("universe_size").get<Count>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, std::string("registry: ") + e.what());
    }
    reg.validate();
    return reg;
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Parse, what + ": " + e.what());
    }
}

inline KnownPopulationRegistry load_registry(const std::string& path) {
    return registry_from_json(parse_json_text(read_file(path), path));
}

inline void save_registry(const KnownPopulationRegistry& reg, const std::string& path) {
    write_file(path, registry_to_json(reg).dump(2) + "\n");
}

// ---- estimate ----

inline nlohmann::json estimate_to_json(const Estimate& e) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["value"] = e.value;
    j["replicates"] = e.replicates;
    if (e.interval)
        j["interval"] = {{"low", e.interval->low}, {"high", e.interval->high}, {"level", e.interval->level}};
    else
        j["interval"] = nullptr;
    j["method"] = e.method;
    j["inputs_digest"] = e.inputs_digest;
    j["excluded_replicates"] = e.excluded_replicates;
    j["metadata"] = e.metadata;
    return j;
}

inline Estimate estimate_from_json(const nlohmann::json& j) {
    Estimate e;
    try {
        e.value = j.at("value").get<double>();
        if (j.contains("replicates")) e.replicates = j["replicates"].get<std::vector<double>>();
        if (j.contains("interval") && !j["interval"].is_null()) {
            const auto& i = j["interval"];
            e.interval = Interval{i.at("low").get<double>(), i.at("high").get<double>(), i.at("level").get<double>()};
        }
        e.method = j.value("method", "");
        e.inputs_digest = j.value("inputs_digest", "");
        e.excluded_replicates = j.value("excluded_replicates", std::size_t{0});
        if (j.contains("metadata")) e.metadata = j["metadata"];
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorCode::Parse, std::string("estimate: ") + ex.what());
    }
    return e;
}

inline void save_estimate(const Estimate& e, const std::string& path) {
    write_file(path, estimate_to_json(e).dump(2) + "\n");
}

inline Estimate load_estimate(const std::string& path) {
    return estimate_from_json(parse_json_text(read_file(path), path));
}

}  // namespace nsum
