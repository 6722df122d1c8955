#include "ipal/state/csv_import.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <fmt/format.h>

#include "ipal/error.hpp"
#include "ipal/io.hpp"

namespace ipal::state {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Splits "<int>[<dp><frac>]" with an optional sign. Returns false if `s` is
// not of that shape.
bool split_number(std::string_view s, char dp, std::string_view& sign, std::string_view& int_part,
                  std::optional<std::string_view>& frac) {
  sign = {};
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    sign = s.substr(0, 1);
    s.remove_prefix(1);
  }
  const auto pos = s.find(dp);
  int_part = s.substr(0, pos);
  frac.reset();
  if (pos != std::string_view::npos) {
    frac = s.substr(pos + 1);
    if (!all_digits(*frac)) return false;
  }
  return !int_part.empty();
}

// True for "1,234,567" style grouping with separator `sep`.
bool valid_grouping(std::string_view s, char sep) {
  std::size_t start = 0;
  bool first = true;
  while (true) {
    const auto pos = s.find(sep, start);
    const auto group = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!all_digits(group)) return false;
    if (first ? (group.size() > 3) : (group.size() != 3)) return false;
    first = false;
    if (pos == std::string_view::npos) return true;
    start = pos + 1;
  }
}

Value to_number(std::string_view sign, std::string_view digits, std::optional<std::string_view> frac,
                std::string_view original) {
  std::string text(sign == "-" ? "-" : "");
  text += digits;
  if (!frac) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc{} && p == text.data() + text.size()) return v;
  }
  text += '.';
  text += frac ? *frac : std::string_view("0");
  double d = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw ParseError(fmt::format("cannot parse number \"{}\"", original));
  return d;
}

Timestamp parse_time(std::string_view field, const ColumnMap& map) {
  const auto text = trim(field);
  if (!map.timestamp_format) {
    double s = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), s);
    if (ec != std::errc{} || p != text.data() + text.size())
      throw ParseError(fmt::format("unparseable timestamp \"{}\"", text));
    return timestamp_from_seconds(s);
  }
  std::tm tm{};
  std::istringstream in{std::string(text)};
  in >> std::get_time(&tm, map.timestamp_format->c_str());
  if (in.fail()) throw ParseError(fmt::format("timestamp \"{}\" does not match \"{}\"", text, *map.timestamp_format));
  // Optional fractional seconds directly after the parsed part.
  std::int64_t micros = 0;
  if (in.peek() == '.') {
    in.get();
    std::string frac;
    while (std::isdigit(in.peek())) frac.push_back(static_cast<char>(in.get()));
    frac.resize(6, '0');
    micros = std::stoll(frac.substr(0, 6));
  }
  std::string rest;
  std::getline(in, rest);
  if (!trim(rest).empty()) throw ParseError(fmt::format("trailing text in timestamp \"{}\"", text));
  const auto secs = static_cast<std::int64_t>(timegm(&tm));
  return Timestamp{Duration{secs * 1000000 + micros}};
}

Label parse_label(std::string_view field, const ColumnMap& map) {
  const auto token = std::string(trim(field));
  if (std::find(map.malicious_tokens.begin(), map.malicious_tokens.end(), token) != map.malicious_tokens.end())
    return Label::malicious;
  if (std::find(map.benign_tokens.begin(), map.benign_tokens.end(), token) != map.benign_tokens.end())
    return Label::benign;
  if (map.malicious_tokens.empty() && map.benign_tokens.empty()) {
    if (token == "1" || token == "true" || token == "True") return Label::malicious;
    if (token == "0" || token == "false" || token == "False") return Label::benign;
  }
  throw ParseError(fmt::format("unknown label token \"{}\"", token));
}

char single_char(const nlohmann::json& j, const char* key, char fallback) {
  if (!j.contains(key)) return fallback;
  const auto s = j.at(key).get<std::string>();
  if (s.size() != 1) throw ParseError(fmt::format("\"{}\" must be a single character", key));
  return s[0];
}

}  // namespace

ColumnMap ColumnMap::from_json(const nlohmann::json& j) {
  ColumnMap m;
  try {
    m.timestamp_column = j.value("timestamp", m.timestamp_column);
    if (j.contains("label")) m.label_column = j.at("label").get<std::string>();
    m.malicious_tokens = j.value("malicious_tokens", std::vector<std::string>{});
    m.benign_tokens = j.value("benign_tokens", std::vector<std::string>{});
    if (j.contains("timestamp_format")) m.timestamp_format = j.at("timestamp_format").get<std::string>();
    m.delimiter = single_char(j, "delimiter", ',');
    m.decimal_point = single_char(j, "decimal_point", '.');
    if (j.contains("thousands_separator")) m.thousands_separator = single_char(j, "thousands_separator", ',');
    m.columns = j.value("columns", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad column map: {}", e.what()));
  }
  if (m.thousands_separator && *m.thousands_separator == m.decimal_point)
    throw ParseError("thousands separator and decimal point must differ");
  return m;
}

ColumnMap ColumnMap::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

Value parse_field(std::string_view field, const ColumnMap& map) {
  const auto text = trim(field);
  std::string_view sign, int_part;
  std::optional<std::string_view> frac;
  if (!split_number(text, map.decimal_point, sign, int_part, frac)) return std::string(text);

  if (all_digits(int_part)) return to_number(sign, int_part, frac, text);

  // Something other than digits in the integer part: grouped number or text.
  static constexpr std::string_view kGroupChars = ",.' _";
  const bool looks_grouped = std::isdigit(static_cast<unsigned char>(int_part.front())) &&
                             std::all_of(int_part.begin(), int_part.end(), [](char c) {
                               return std::isdigit(static_cast<unsigned char>(c)) ||
                                      kGroupChars.find(c) != std::string_view::npos;
                             });
  if (!looks_grouped) return std::string(text);

  if (!map.thousands_separator)
    throw ParseError(fmt::format("\"{}\" looks like a grouped number but no thousands_separator is configured", text));
  if (!valid_grouping(int_part, *map.thousands_separator))
    throw ParseError(fmt::format("\"{}\" does not match digit grouping with '{}'", text, *map.thousands_separator));
  std::string digits;
  for (char c : int_part)
    if (c != *map.thousands_separator) digits.push_back(c);
  return to_number(sign, digits, frac, text);
}

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

void import_state_csv(const std::filesystem::path& path, const ColumnMap& map,
                      const std::function<void(StateMessage&&)>& sink) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(fmt::format("{}: empty file", path.string()));
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);

  auto header = split_csv_line(line, map.delimiter);
  for (auto& h : header) h = std::string(trim(h));
  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(fmt::format("{}: missing mapped column \"{}\"", path.string(), name));
    return static_cast<std::size_t>(it - header.begin());
  };

  const auto ts_col = column(map.timestamp_column);
  const std::optional<std::size_t> label_col =
      map.label_column ? std::optional(column(*map.label_column)) : std::nullopt;
  std::vector<std::size_t> value_cols;
  if (map.columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i != ts_col && (!label_col || i != *label_col) && !header[i].empty()) value_cols.push_back(i);
  } else {
    for (const auto& c : map.columns) value_cols.push_back(column(c));
  }

  std::size_t line_no = 1;
  std::optional<Timestamp> last;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto fields = split_csv_line(line, map.delimiter);
      if (fields.size() != header.size())
        throw ParseError(fmt::format("{} fields, header has {}", fields.size(), header.size()));
      StateMessage s;
      s.timestamp = parse_time(fields[ts_col], map);
      if (last && s.timestamp <= *last) throw ParseError("timestamps must strictly increase");
      last = s.timestamp;
      s.malicious = label_col ? parse_label(fields[*label_col], map) : Label::unlabeled;
      for (auto c : value_cols) s.state.emplace(header[c], parse_field(fields[c], map));
      sink(std::move(s));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
}

std::vector<StateMessage> import_state_csv(const std::filesystem::path& path, const ColumnMap& map) {
  std::vector<StateMessage> out;
  import_state_csv(path, map, [&](StateMessage&& s) { out.push_back(std::move(s)); });
  return out;
}

}  // namespace ipal::state
