#include "cascade/config.h"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

#include "cascade/ingest.h"
#include "cascade/post_record.h"

namespace cascade {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected key = value", line_no));
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(fmt::format("config line {}: empty key", line_no));
    config.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

bool KeyValueConfig::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

void KeyValueConfig::set(std::string key, std::string value) {
  entries_.insert_or_assign(std::move(key), std::move(value));
}

std::optional<std::string> KeyValueConfig::get_string(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> KeyValueConfig::get_double(std::string_view key) const {
  const auto value = get_string(key);
  if (!value) return std::nullopt;
  double out = 0.0;
  const auto* end = value->data() + value->size();
  const auto [ptr, ec] = std::from_chars(value->data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument(fmt::format("config key '{}': '{}' is not a number", key, *value));
  }
  return out;
}

std::optional<std::int64_t> KeyValueConfig::get_int(std::string_view key) const {
  const auto value = get_string(key);
  if (!value) return std::nullopt;
  std::int64_t out = 0;
  const auto* end = value->data() + value->size();
  const auto [ptr, ec] = std::from_chars(value->data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument(fmt::format("config key '{}': '{}' is not an integer", key, *value));
  }
  return out;
}

std::optional<bool> KeyValueConfig::get_bool(std::string_view key) const {
  const auto value = get_string(key);
  if (!value) return std::nullopt;
  const std::string v = case_fold(*value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(fmt::format("config key '{}': '{}' is not a boolean", key, *value));
}

}  // namespace cascade
