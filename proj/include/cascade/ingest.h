#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/post_record.h"

namespace cascade {

enum class InputFormat {
  kJsonLines,  // one JSON object per line
  kDelimited,  // header row + delimited rows (CSV/TSV)
};

// "jsonl"/"ndjson"/"json" or "csv"/"tsv"/"delimited".
std::optional<InputFormat> format_from_name(std::string_view name);
std::optional<InputFormat> format_from_extension(const std::filesystem::path& path);

class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ParseError {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::string message;
};

struct ParseOptions {
  InputFormat format = InputFormat::kJsonLines;
  bool strict = false;
  char delimiter = ',';
  unsigned threads = 1;
};

struct ParseResult {
  std::vector<PostRecord> records;
  std::vector<ParseError> errors;
};

// Lenient by default: malformed records are reported and skipped. In strict
// mode the first malformed record throws IngestError.
ParseResult parse_posts(std::string_view source, const ParseOptions& options);

// Reads a whole file. When `format` is empty it is inferred from the
// extension; a .tsv extension also selects the tab delimiter.
ParseResult read_posts_file(const std::filesystem::path& path,
                            std::optional<InputFormat> format, bool strict,
                            unsigned threads = 1);

struct DedupeReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t duplicates = 0;
  std::size_t invalid = 0;
  std::map<std::string, std::size_t> invalid_reasons;
};

// Drops records that violate PostRecord invariants, keeps the first
// occurrence of each id, and sorts by (created_utc, id).
std::vector<PostRecord> validate_and_dedupe(std::vector<PostRecord> records,
                                            DedupeReport* report = nullptr);

std::vector<PostRecord> filter_nsfw(std::vector<PostRecord> records);

void write_json_lines(std::ostream& out, std::span<const PostRecord> records);
std::string to_json_line(const PostRecord& record);
void write_delimited(std::ostream& out, std::span<const PostRecord> records,
                     char delimiter = ',');

// Splits one delimited-table record into fields (RFC 4180 quoting). Exposed
// for the stage readers that consume the pipeline's own CSV artifacts.
class DelimitedReader {
 public:
  DelimitedReader(std::string_view text, char delimiter = ',');
  // Returns false at end of input. `line` receives the 1-based start line.
  bool next(std::vector<std::string>& fields, std::size_t& line);

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  char delimiter_;
};

std::string quote_field(std::string_view field, char delimiter = ',');
std::string read_file(const std::filesystem::path& path);

}  // namespace cascade
