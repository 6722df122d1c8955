#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/message.hpp"

namespace ipal::state {

/// Describes how a dataset's state log maps onto StateMessages.
struct ColumnMap {
  std::string timestamp_column = "timestamp";
  std::optional<std::string> label_column;
  std::vector<std::string> malicious_tokens;
  std::vector<std::string> benign_tokens;
  /// strptime-style format (UTC). Without one, timestamps are seconds.
  std::optional<std::string> timestamp_format;
  char delimiter = ',';
  char decimal_point = '.';
  /// Digit-group separator. Without one, grouped numbers are rejected.
  std::optional<char> thousands_separator;
  /// Columns to keep; empty keeps every non-timestamp, non-label column.
  std::vector<std::string> columns;

  static ColumnMap from_json(const nlohmann::json& j);
  static ColumnMap load(const std::filesystem::path& path);
};

/// Parses one field per the locale settings: integer, real, or the trimmed
/// text. Throws ParseError for numbers whose grouping is ambiguous.
Value parse_field(std::string_view field, const ColumnMap& map);

/// RFC-4180 style splitting (quotes, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line, char delimiter);

void import_state_csv(const std::filesystem::path& path, const ColumnMap& map,
                      const std::function<void(StateMessage&&)>& sink);
std::vector<StateMessage> import_state_csv(const std::filesystem::path& path, const ColumnMap& map);

}  // namespace ipal::state
