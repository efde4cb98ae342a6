#include "recollide/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "recollide/errors.hpp"

namespace recollide::io {

Json Json::object() {
    Json j;
    j.kind_ = Kind::object;
    return j;
}

Json Json::array() {
    Json j;
    j.kind_ = Kind::array;
    return j;
}

Json Json::number(double v) {
    Json j;
    j.kind_ = Kind::number;
    j.num_ = v;
    return j;
}

Json Json::integer(std::int64_t v) {
    Json j;
    j.kind_ = Kind::integer;
    j.int_ = v;
    return j;
}

Json Json::uinteger(std::uint64_t v) {
    Json j;
    j.kind_ = Kind::uinteger;
    j.uint_ = v;
    return j;
}

Json Json::boolean(bool v) {
    Json j;
    j.kind_ = Kind::boolean;
    j.bool_ = v;
    return j;
}

Json Json::string(std::string v) {
    Json j;
    j.kind_ = Kind::str;
    j.str_ = std::move(v);
    return j;
}

Json Json::null() {
    return Json{};
}

Json& Json::set(const std::string& key, Json v) {
    if (kind_ != Kind::object) throw PreconditionError("Json::set on non-object");
    members_.emplace_back(key, std::move(v));
    return *this;
}

Json& Json::set(const std::string& key, double v) { return set(key, number(v)); }
Json& Json::set(const std::string& key, std::int64_t v) { return set(key, integer(v)); }
Json& Json::set(const std::string& key, std::uint64_t v) { return set(key, uinteger(v)); }
Json& Json::set(const std::string& key, int v) { return set(key, integer(v)); }
Json& Json::set(const std::string& key, bool v) { return set(key, boolean(v)); }
Json& Json::set(const std::string& key, const char* v) { return set(key, string(v)); }
Json& Json::set(const std::string& key, const std::string& v) { return set(key, string(v)); }

Json& Json::push(Json v) {
    if (kind_ != Kind::array) throw PreconditionError("Json::push on non-array");
    elements_.push_back(std::move(v));
    return *this;
}

Json& Json::push(double v) { return push(number(v)); }

namespace {

void escape_string(const std::string& s, std::string& out) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
}

}  // namespace

std::string format_double(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void Json::dump_to(std::string& out) const {
    switch (kind_) {
        case Kind::object: {
            out += '{';
            bool first = true;
            for (const auto& [k, v] : members_) {
                if (!first) out += ',';
                first = false;
                escape_string(k, out);
                out += ':';
                v.dump_to(out);
            }
            out += '}';
            break;
        }
        case Kind::array: {
            out += '[';
            bool first = true;
            for (const auto& v : elements_) {
                if (!first) out += ',';
                first = false;
                v.dump_to(out);
            }
            out += ']';
            break;
        }
        case Kind::number:
            out += format_double(num_);
            break;
        case Kind::integer: {
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof buf, int_);
            out.append(buf, res.ptr);
            break;
        }
        case Kind::uinteger: {
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof buf, uint_);
            out.append(buf, res.ptr);
            break;
        }
        case Kind::boolean:
            out += bool_ ? "true" : "false";
            break;
        case Kind::str:
            escape_string(str_, out);
            break;
        case Kind::null:
            out += "null";
            break;
    }
}

std::string Json::dump() const {
    std::string out;
    dump_to(out);
    return out;
}

std::string csv_escape(const std::string& cell) {
    bool needs_quote = cell.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quote) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(header[i]);
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            throw PreconditionError("format_csv: row width differs from header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(row[i]);
        }
        out += '\n';
    }
    return out;
}

void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot open for writing: " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw ConfigError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw ConfigError("rename failed for " + target.string() + ": " + ec.message());
    }
}

}  // namespace recollide::io
