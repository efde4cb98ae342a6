#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace recollide::io {

// Minimal ordered JSON tree. Keys keep insertion order and doubles are
// rendered with 17 significant digits via to_chars, so equal inputs give
// byte-identical output regardless of locale or platform quirks.
class Json {
  public:
    static Json object();
    static Json array();
    static Json number(double v);
    static Json integer(std::int64_t v);
    static Json uinteger(std::uint64_t v);
    static Json boolean(bool v);
    static Json string(std::string v);
    static Json null();

    Json& set(const std::string& key, Json v);
    Json& set(const std::string& key, double v);
    Json& set(const std::string& key, std::int64_t v);
    Json& set(const std::string& key, std::uint64_t v);
    Json& set(const std::string& key, int v);
    Json& set(const std::string& key, bool v);
    Json& set(const std::string& key, const char* v);
    Json& set(const std::string& key, const std::string& v);

    Json& push(Json v);
    Json& push(double v);

    std::string dump() const;

  private:
    enum class Kind { object, array, number, integer, uinteger, boolean, str, null };
    Kind kind_ = Kind::null;
    double num_ = 0.0;
    std::int64_t int_ = 0;
    std::uint64_t uint_ = 0;
    bool bool_ = false;
    std::string str_;
    std::vector<std::pair<std::string, Json>> members_;
    std::vector<Json> elements_;

    void dump_to(std::string& out) const;
};

std::string format_double(double v);

// RFC 4180 style CSV: header row, '.' decimal separator, quoting only when
// a cell contains a comma, quote, or newline.
std::string csv_escape(const std::string& cell);
std::string format_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

// Write via temp file + rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace recollide::io
