#include "cascade/ingest.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <rapidjson/memorystream.h>
#include <rapidjson/reader.h>
#include <rapidjson/stringbuffer.h>
#include <rapidjson/writer.h>

namespace cascade {

namespace {


struct FieldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_extra_column(std::string_view name) {
  return name.starts_with("obj_") || name.starts_with("emb_");
}

// ---- JSON lines -----------------------------------------------------------

// Top-level scalar fields of one JSON line. Nested values are kept as a
// marker so typed reads report them as the wrong type.
struct FlatValue {
  enum class Kind { kNull, kBool, kInt, kUint, kDouble, kString, kNested };
  Kind kind = Kind::kNull;
  bool b = false;
  std::int64_t i = 0;
  std::uint64_t u = 0;
  double d = 0.0;
  std::string s;

  bool is_number() const { return kind == Kind::kInt || kind == Kind::kUint || kind == Kind::kDouble; }
  double as_double() const {
    if (kind == Kind::kInt) return static_cast<double>(i);
    if (kind == Kind::kUint) return static_cast<double>(u);
    return d;
  }
};

constexpr std::array<std::string_view, 21> kFieldNames = {
    "id",          "created_utc",        "subreddit",        "author",          "title",
    "image_url",   "crosspost_parent_id", "score",           "total_comments",  "upvote_ratio",
    "num_crossposts", "is_original_content", "nsfw",         "misinfo_flag",    "genai_flag",
    "sentiment_compound", "sentiment_pos", "sentiment_neg",  "thumbnail_width", "thumbnail_height",
    "thumbnail_path"};

consteval std::size_t field(std::string_view name) {
  for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
    if (kFieldNames[i] == name) return i;
  }
  throw "unknown field";
}

struct FlatObject {
  bool is_object = false;
  std::array<FlatValue, kFieldNames.size()> known;
  std::vector<std::pair<std::string, FlatValue>> extras;

  // Slot for a top-level key; nullptr for keys the record ignores.
  FlatValue* slot(std::string_view key) {
    for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
      if (kFieldNames[i] == key) return &(known[i] = FlatValue{});
    }
    if (!is_extra_column(key)) return nullptr;
    for (auto& [k, v] : extras) {
      if (k == key) return &(v = FlatValue{});
    }
    return &extras.emplace_back(std::string(key), FlatValue{}).second;
  }
};

bool valid_utf8(const char* p, std::size_t n) {
  std::size_t i = 0;
  while (i < n) {
    const auto c = static_cast<unsigned char>(p[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) len = 2, cp = c & 0x1F;
    else if ((c & 0xF0) == 0xE0) len = 3, cp = c & 0x0F;
    else if ((c & 0xF8) == 0xF0) len = 4, cp = c & 0x07;
    else return false;
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(p[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

class FlatHandler : public rapidjson::BaseReaderHandler<rapidjson::UTF8<>, FlatHandler> {
 public:
  explicit FlatHandler(FlatObject& out) : out_(out) {}

  bool Null() {
    scalar_slot();
    return true;
  }
  bool Bool(bool v) {
    if (auto* s = scalar_slot()) {
      s->kind = FlatValue::Kind::kBool;
      s->b = v;
    }
    return true;
  }
  bool Int(int v) { return Int64(v); }
  bool Int64(std::int64_t v) {
    if (auto* s = scalar_slot()) {
      s->kind = FlatValue::Kind::kInt;
      s->i = v;
    }
    return true;
  }
  bool Uint(unsigned v) { return Int64(v); }
  bool Uint64(std::uint64_t v) {
    if (v <= static_cast<std::uint64_t>(INT64_MAX)) return Int64(static_cast<std::int64_t>(v));
    if (auto* s = scalar_slot()) {
      s->kind = FlatValue::Kind::kUint;
      s->u = v;
    }
    return true;
  }
  bool Double(double v) {
    if (auto* s = scalar_slot()) {
      s->kind = FlatValue::Kind::kDouble;
      s->d = v;
    }
    return true;
  }
  bool String(const char* str, rapidjson::SizeType len, bool) {
    if (!valid_utf8(str, len)) return false;
    if (auto* s = scalar_slot()) {
      s->kind = FlatValue::Kind::kString;
      s->s.assign(str, len);
    }
    return true;
  }
  bool StartObject() {
    if (depth_ == 0) out_.is_object = true;
    else if (depth_ == 1) nested();
    ++depth_;
    return true;
  }
  bool Key(const char* str, rapidjson::SizeType len, bool) {
    if (!valid_utf8(str, len)) return false;
    if (depth_ == 1) key_slot_ = out_.slot(std::string_view(str, len));
    return true;
  }
  bool EndObject(rapidjson::SizeType) {
    --depth_;
    return true;
  }
  bool StartArray() {
    if (depth_ == 1) nested();
    ++depth_;
    return true;
  }
  bool EndArray(rapidjson::SizeType) {
    --depth_;
    return true;
  }

 private:
  FlatValue* scalar_slot() { return depth_ == 1 ? key_slot_ : nullptr; }
  void nested() {
    if (key_slot_) key_slot_->kind = FlatValue::Kind::kNested;
  }

  FlatObject& out_;
  int depth_ = 0;
  FlatValue* key_slot_ = nullptr;
};

bool parse_flat(std::string_view text, FlatObject& out) {
  rapidjson::MemoryStream in(text.data(), text.size());
  rapidjson::Reader reader;
  FlatHandler handler(out);
  return !reader.Parse<rapidjson::kParseFullPrecisionFlag>(in, handler).IsError();
}

const FlatValue* lookup(const FlatObject& obj, std::size_t f) {
  const FlatValue& v = obj.known[f];
  return v.kind == FlatValue::Kind::kNull ? nullptr : &v;
}

std::optional<std::string> json_string(const FlatObject& obj, std::size_t f) {
  const FlatValue* v = lookup(obj, f);
  if (!v) return std::nullopt;
  if (v->kind != FlatValue::Kind::kString) {
    throw FieldError(fmt::format("field '{}' is not a string", kFieldNames[f]));
  }
  return v->s;
}

std::optional<std::int64_t> json_int(const FlatObject& obj, std::size_t f) {
  const FlatValue* v = lookup(obj, f);
  if (!v) return std::nullopt;
  if (v->kind == FlatValue::Kind::kInt) return v->i;
  if (v->kind == FlatValue::Kind::kDouble) {
    const double d = v->d;
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9.0e18) {
      return static_cast<std::int64_t>(d);
    }
  }
  throw FieldError(fmt::format("field '{}' is not an integer", kFieldNames[f]));
}

std::optional<double> json_double(const FlatObject& obj, std::size_t f) {
  const FlatValue* v = lookup(obj, f);
  if (!v) return std::nullopt;
  if (!v->is_number()) throw FieldError(fmt::format("field '{}' is not a number", kFieldNames[f]));
  return v->as_double();
}

std::optional<bool> json_bool(const FlatObject& obj, std::size_t f) {
  const FlatValue* v = lookup(obj, f);
  if (!v) return std::nullopt;
  if (v->kind == FlatValue::Kind::kBool) return v->b;
  if (v->kind == FlatValue::Kind::kInt && (v->i == 0 || v->i == 1)) return v->i == 1;
  throw FieldError(fmt::format("field '{}' is not a boolean", kFieldNames[f]));
}

template <typename T>
T required(std::optional<T> v, const char* key) {
  if (!v) throw FieldError(fmt::format("missing required field '{}'", key));
  return std::move(*v);
}

PostRecord record_from_json(const FlatObject& obj) {
  if (!obj.is_object) throw FieldError("record is not an object");
  PostRecord r;
  r.id = required(json_string(obj, field("id")), "id");
  r.created_utc = required(json_int(obj, field("created_utc")), "created_utc");
  r.subreddit = required(json_string(obj, field("subreddit")), "subreddit");
  r.author = json_string(obj, field("author")).value_or("");
  r.title = json_string(obj, field("title")).value_or("");
  if (auto url = json_string(obj, field("image_url"))) {
    auto canon = canonicalize_url(*url);
    if (!canon.empty()) r.image_url = std::move(canon);
  }
  r.crosspost_parent_id = json_string(obj, field("crosspost_parent_id"));
  if (r.crosspost_parent_id && r.crosspost_parent_id->empty()) r.crosspost_parent_id.reset();
  r.score = required(json_int(obj, field("score")), "score");
  r.total_comments = required(json_int(obj, field("total_comments")), "total_comments");
  r.upvote_ratio = json_double(obj, field("upvote_ratio"));
  r.num_crossposts = json_int(obj, field("num_crossposts")).value_or(0);
  r.is_original_content = json_bool(obj, field("is_original_content")).value_or(false);
  r.nsfw = json_bool(obj, field("nsfw")).value_or(false);
  r.misinfo_flag = json_bool(obj, field("misinfo_flag")).value_or(false);
  r.genai_flag = json_bool(obj, field("genai_flag")).value_or(false);
  r.sentiment_compound = json_double(obj, field("sentiment_compound"));
  r.sentiment_pos = json_double(obj, field("sentiment_pos"));
  r.sentiment_neg = json_double(obj, field("sentiment_neg"));
  r.thumbnail_width = json_int(obj, field("thumbnail_width"));
  r.thumbnail_height = json_int(obj, field("thumbnail_height"));
  r.thumbnail_path = json_string(obj, field("thumbnail_path"));
  for (const auto& [key, value] : obj.extras) {
    if (!is_extra_column(key) || value.kind == FlatValue::Kind::kNull) continue;
    if (value.kind == FlatValue::Kind::kBool) {
      r.extra.emplace_back(key, value.b ? 1.0 : 0.0);
    } else if (value.is_number()) {
      r.extra.emplace_back(key, value.as_double());
    } else {
      throw FieldError(fmt::format("field '{}' is not numeric", key));
    }
  }
  std::sort(r.extra.begin(), r.extra.end());
  return r;
}

void parse_json_chunk(std::string_view chunk, std::size_t first_line, ParseResult& out) {
  std::size_t line = first_line;
  std::size_t pos = 0;
  while (pos < chunk.size()) {
    auto end = chunk.find('\n', pos);
    if (end == std::string_view::npos) end = chunk.size();
    std::string_view text = chunk.substr(pos, end - pos);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    const bool blank = std::all_of(text.begin(), text.end(), [](char c) {
      return c == ' ' || c == '\t';
    });
    if (!blank) {
      FlatObject obj;
      if (!parse_flat(text, obj)) {
        out.errors.push_back({line, "malformed JSON"});
      } else {
        try {
          out.records.push_back(record_from_json(obj));
        } catch (const FieldError& e) {
          out.errors.push_back({line, e.what()});
        }
      }
    }
    pos = end + 1;
    ++line;
  }
}

ParseResult parse_json_lines(std::string_view source, unsigned threads) {
  threads = std::max(1u, threads);
  // Below this size a single pass is faster than spawning workers.
  if (threads == 1 || source.size() < (1u << 20)) {
    ParseResult result;
    parse_json_chunk(source, 1, result);
    return result;
  }
  std::vector<std::string_view> chunks;
  std::vector<std::size_t> first_lines;
  std::size_t begin = 0;
  std::size_t line = 1;
  const std::size_t target = source.size() / threads + 1;
  while (begin < source.size()) {
    std::size_t end = std::min(source.size(), begin + target);
    if (end < source.size()) {
      const auto nl = source.find('\n', end);
      end = nl == std::string_view::npos ? source.size() : nl + 1;
    }
    chunks.push_back(source.substr(begin, end - begin));
    first_lines.push_back(line);
    line += static_cast<std::size_t>(
        std::count(source.begin() + begin, source.begin() + end, '\n'));
    begin = end;
  }
  std::vector<ParseResult> parts(chunks.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      workers.emplace_back([&, i] { parse_json_chunk(chunks[i], first_lines[i], parts[i]); });
    }
  }
  ParseResult result;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.records.size();
  result.records.reserve(total);
  for (auto& p : parts) {
    std::move(p.records.begin(), p.records.end(), std::back_inserter(result.records));
    std::move(p.errors.begin(), p.errors.end(), std::back_inserter(result.errors));
  }
  return result;
}

// ---- delimited tables -----------------------------------------------------

std::optional<std::int64_t> cell_int(const std::string& cell, std::string_view name) {
  if (cell.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec == std::errc() && p == cell.data() + cell.size()) return v;
  double d = 0;
  auto [pd, ecd] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
  if (ecd == std::errc() && pd == cell.data() + cell.size() && d == std::floor(d) &&
      std::fabs(d) < 9.0e18) {
    return static_cast<std::int64_t>(d);
  }
  throw FieldError(fmt::format("field '{}' is not an integer", name));
}

std::optional<double> cell_double(const std::string& cell, std::string_view name) {
  if (cell.empty()) return std::nullopt;
  double v = 0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec == std::errc() && p == cell.data() + cell.size()) return v;
  throw FieldError(fmt::format("field '{}' is not a number", name));
}

std::optional<bool> cell_bool(const std::string& cell, std::string_view name) {
  if (cell.empty()) return std::nullopt;
  const std::string v = case_fold(cell);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FieldError(fmt::format("field '{}' is not a boolean", name));
}

std::optional<std::string> cell_string(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return cell;
}

class HeaderIndex {
 public:
  explicit HeaderIndex(const std::vector<std::string>& header) : header_(header) {}
  const std::string* get(const std::vector<std::string>& row, std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return &row[i];
    }
    return nullptr;
  }
  const std::vector<std::string>& names() const { return header_; }

 private:
  std::vector<std::string> header_;
};

PostRecord record_from_row(const HeaderIndex& h, const std::vector<std::string>& row) {
  static const std::string kEmpty;
  auto cell = [&](std::string_view name) -> const std::string& {
    const std::string* c = h.get(row, name);
    return c ? *c : kEmpty;
  };
  auto need = [&](std::string_view name) -> const std::string& {
    const std::string& c = cell(name);
    if (c.empty()) throw FieldError(fmt::format("missing required field '{}'", name));
    return c;
  };
  PostRecord r;
  r.id = need("id");
  r.created_utc = *cell_int(need("created_utc"), "created_utc");
  if (!h.get(row, "subreddit")) throw FieldError("missing required field 'subreddit'");
  r.subreddit = cell("subreddit");
  r.author = cell("author");
  r.title = cell("title");
  if (auto url = cell_string(cell("image_url"))) {
    auto canon = canonicalize_url(*url);
    if (!canon.empty()) r.image_url = std::move(canon);
  }
  r.crosspost_parent_id = cell_string(cell("crosspost_parent_id"));
  r.score = *cell_int(need("score"), "score");
  r.total_comments = *cell_int(need("total_comments"), "total_comments");
  r.upvote_ratio = cell_double(cell("upvote_ratio"), "upvote_ratio");
  r.num_crossposts = cell_int(cell("num_crossposts"), "num_crossposts").value_or(0);
  r.is_original_content = cell_bool(cell("is_original_content"), "is_original_content").value_or(false);
  r.nsfw = cell_bool(cell("nsfw"), "nsfw").value_or(false);
  r.misinfo_flag = cell_bool(cell("misinfo_flag"), "misinfo_flag").value_or(false);
  r.genai_flag = cell_bool(cell("genai_flag"), "genai_flag").value_or(false);
  r.sentiment_compound = cell_double(cell("sentiment_compound"), "sentiment_compound");
  r.sentiment_pos = cell_double(cell("sentiment_pos"), "sentiment_pos");
  r.sentiment_neg = cell_double(cell("sentiment_neg"), "sentiment_neg");
  r.thumbnail_width = cell_int(cell("thumbnail_width"), "thumbnail_width");
  r.thumbnail_height = cell_int(cell("thumbnail_height"), "thumbnail_height");
  r.thumbnail_path = cell_string(cell("thumbnail_path"));
  for (std::size_t i = 0; i < h.names().size(); ++i) {
    const auto& name = h.names()[i];
    if (!is_extra_column(name)) continue;
    if (auto v = cell_double(row[i], name)) r.extra.emplace_back(name, *v);
  }
  std::sort(r.extra.begin(), r.extra.end());
  return r;
}

ParseResult parse_delimited(std::string_view source, char delimiter) {
  ParseResult result;
  DelimitedReader reader(source, delimiter);
  std::vector<std::string> fields;
  std::size_t line = 0;
  bool have_header = false;
  std::optional<HeaderIndex> header;
  while (true) {
    try {
      if (!reader.next(fields, line)) break;
    } catch (const IngestError& e) {
      result.errors.push_back({e.line(), e.what()});
      break;
    }
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (!have_header) {
      header.emplace(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != header->names().size()) {
      result.errors.push_back(
          {line, fmt::format("expected {} fields, found {}", header->names().size(), fields.size())});
      continue;
    }
    try {
      result.records.push_back(record_from_row(*header, fields));
    } catch (const FieldError& e) {
      result.errors.push_back({line, e.what()});
    }
  }
  return result;
}

void put_cell(std::ostream& out, std::string_view s, char delim) { out << quote_field(s, delim); }

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

// ---- public API -------------------------------------------------------------

std::optional<InputFormat> format_from_name(std::string_view name) {
  const std::string n = case_fold(name);
  if (n == "jsonl" || n == "ndjson" || n == "json" || n == "lines") return InputFormat::kJsonLines;
  if (n == "csv" || n == "tsv" || n == "delimited" || n == "table") return InputFormat::kDelimited;
  return std::nullopt;
}

std::optional<InputFormat> format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext.empty()) return std::nullopt;
  return format_from_name(std::string_view(ext).substr(1));
}

DelimitedReader::DelimitedReader(std::string_view text, char delimiter)
    : text_(text), delimiter_(delimiter) {
  if (text_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
}

bool DelimitedReader::next(std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  if (pos_ >= text_.size()) return false;
  line = line_;
  std::string field;
  bool in_quotes = false;
  bool quoted_field = false;
  while (pos_ < text_.size()) {
    const char c = text_[pos_++];
    if (in_quotes) {
      if (c == '"') {
        if (pos_ < text_.size() && text_[pos_] == '"') {
          field.push_back('"');
          ++pos_;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !quoted_field) {
      in_quotes = true;
      quoted_field = true;
    } else if (c == delimiter_) {
      fields.push_back(std::move(field));
      field.clear();
      quoted_field = false;
    } else if (c == '\n') {
      ++line_;
      if (!field.empty() && field.back() == '\r' && !quoted_field) field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw IngestError("unterminated quoted field", line);
  if (!field.empty() && field.back() == '\r' && !quoted_field) field.pop_back();
  fields.push_back(std::move(field));
  return true;
}

std::string quote_field(std::string_view field, char delimiter) {
  const bool needs = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) !=
                         std::string_view::npos ||
                     (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

ParseResult parse_posts(std::string_view source, const ParseOptions& options) {
  ParseResult result = options.format == InputFormat::kJsonLines
                           ? parse_json_lines(source, options.threads)
                           : parse_delimited(source, options.delimiter);
  if (options.strict && !result.errors.empty()) {
    const auto& first = *std::min_element(
        result.errors.begin(), result.errors.end(),
        [](const ParseError& a, const ParseError& b) { return a.line < b.line; });
    throw IngestError(fmt::format("line {}: {}", first.line, first.message), first.line);
  }
  return result;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(fmt::format("cannot read '{}'", path.string()));
  std::string data;
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size > 0) {
    data.resize(static_cast<std::size_t>(size));
    in.seekg(0);
    in.read(data.data(), size);
  }
  if (!in && !in.eof()) throw IngestError(fmt::format("error reading '{}'", path.string()));
  return data;
}

ParseResult read_posts_file(const std::filesystem::path& path,
                            std::optional<InputFormat> format, bool strict,
                            unsigned threads) {
  if (!format) format = format_from_extension(path);
  if (!format) {
    throw IngestError(fmt::format("cannot infer input format of '{}'", path.string()));
  }
  const std::string data = read_file(path);
  ParseOptions options;
  options.format = *format;
  options.strict = strict;
  options.threads = threads;
  options.delimiter = path.extension() == ".tsv" ? '\t' : ',';
  return parse_posts(data, options);
}

std::vector<PostRecord> validate_and_dedupe(std::vector<PostRecord> records,
                                            DedupeReport* report) {
  DedupeReport local;
  local.input = records.size();
  std::vector<PostRecord> out;
  out.reserve(records.size());
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());
  for (auto& r : records) {
    if (auto why = first_violation(r)) {
      ++local.invalid;
      ++local.invalid_reasons[*why];
      continue;
    }
    if (!seen.insert(r.id).second) {
      ++local.duplicates;
      continue;
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), time_order_less);
  local.kept = out.size();
  if (report) *report = std::move(local);
  return out;
}

std::vector<PostRecord> filter_nsfw(std::vector<PostRecord> records) {
  std::erase_if(records, [](const PostRecord& r) { return r.nsfw; });
  return records;
}

namespace {

using JsonWriter = rapidjson::Writer<rapidjson::StringBuffer>;

void put(JsonWriter& w, const char* key, std::string_view v) {
  w.Key(key);
  w.String(v.data(), static_cast<rapidjson::SizeType>(v.size()));
}

void put(JsonWriter& w, const char* key, std::int64_t v) {
  w.Key(key);
  w.Int64(v);
}

void put(JsonWriter& w, const char* key, double v) {
  w.Key(key);
  if (std::isfinite(v)) w.Double(v);
  else w.Null();
}

void put(JsonWriter& w, const char* key, bool v) {
  w.Key(key);
  w.Bool(v);
}

template <typename T>
void put(JsonWriter& w, const char* key, const std::optional<T>& v) {
  if (v) put(w, key, *v);
}

void append_json(rapidjson::StringBuffer& buffer, const PostRecord& r) {
  JsonWriter w(buffer);
  w.StartObject();
  put(w, "id", r.id);
  put(w, "created_utc", r.created_utc);
  put(w, "subreddit", r.subreddit);
  put(w, "author", r.author);
  put(w, "title", r.title);
  put(w, "image_url", r.image_url);
  put(w, "crosspost_parent_id", r.crosspost_parent_id);
  put(w, "score", r.score);
  put(w, "total_comments", r.total_comments);
  put(w, "upvote_ratio", r.upvote_ratio);
  put(w, "num_crossposts", r.num_crossposts);
  put(w, "is_original_content", r.is_original_content);
  put(w, "nsfw", r.nsfw);
  put(w, "misinfo_flag", r.misinfo_flag);
  put(w, "genai_flag", r.genai_flag);
  put(w, "sentiment_compound", r.sentiment_compound);
  put(w, "sentiment_pos", r.sentiment_pos);
  put(w, "sentiment_neg", r.sentiment_neg);
  put(w, "thumbnail_width", r.thumbnail_width);
  put(w, "thumbnail_height", r.thumbnail_height);
  put(w, "thumbnail_path", r.thumbnail_path);
  for (const auto& [name, value] : r.extra) put(w, name.c_str(), value);
  w.EndObject();
}

}  // namespace

std::string to_json_line(const PostRecord& r) {
  rapidjson::StringBuffer buffer;
  append_json(buffer, r);
  return {buffer.GetString(), buffer.GetSize()};
}

void write_json_lines(std::ostream& out, std::span<const PostRecord> records) {
  rapidjson::StringBuffer buffer;
  for (const auto& r : records) {
    buffer.Clear();
    append_json(buffer, r);
    buffer.Put('\n');
    out.write(buffer.GetString(), static_cast<std::streamsize>(buffer.GetSize()));
  }
}

void write_delimited(std::ostream& out, std::span<const PostRecord> records, char d) {
  static const char* kColumns[] = {
      "id", "created_utc", "subreddit", "author", "title", "image_url",
      "crosspost_parent_id", "score", "total_comments", "upvote_ratio", "num_crossposts",
      "is_original_content", "nsfw", "misinfo_flag", "genai_flag", "sentiment_compound",
      "sentiment_pos", "sentiment_neg", "thumbnail_width", "thumbnail_height",
      "thumbnail_path"};
  std::vector<std::string> extras;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.extra) extras.push_back(name);
  }
  std::sort(extras.begin(), extras.end());
  extras.erase(std::unique(extras.begin(), extras.end()), extras.end());

  bool first = true;
  for (const char* c : kColumns) {
    if (!first) out << d;
    out << c;
    first = false;
  }
  for (const auto& e : extras) out << d << quote_field(e, d);
  out << '\n';

  auto opt_str = [](const std::optional<std::string>& v) { return v.value_or(""); };
  auto opt_num = [](const auto& v) { return v ? num(static_cast<double>(*v)) : std::string(); };
  auto opt_int = [](const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  auto flag = [](bool b) { return b ? "true" : "false"; };
  for (const auto& r : records) {
    put_cell(out, r.id, d);
    out << d << r.created_utc << d;
    put_cell(out, r.subreddit, d);
    out << d;
    put_cell(out, r.author, d);
    out << d;
    put_cell(out, r.title, d);
    out << d;
    put_cell(out, opt_str(r.image_url), d);
    out << d;
    put_cell(out, opt_str(r.crosspost_parent_id), d);
    out << d << r.score << d << r.total_comments << d << opt_num(r.upvote_ratio) << d
        << r.num_crossposts << d << flag(r.is_original_content) << d << flag(r.nsfw) << d
        << flag(r.misinfo_flag) << d << flag(r.genai_flag) << d << opt_num(r.sentiment_compound)
        << d << opt_num(r.sentiment_pos) << d << opt_num(r.sentiment_neg) << d
        << opt_int(r.thumbnail_width) << d << opt_int(r.thumbnail_height) << d;
    put_cell(out, opt_str(r.thumbnail_path), d);
    for (const auto& e : extras) {
      out << d;
      auto it = std::lower_bound(r.extra.begin(), r.extra.end(), e,
                                 [](const auto& kv, const std::string& k) { return kv.first < k; });
      if (it != r.extra.end() && it->first == e) out << num(it->second);
    }
    out << '\n';
  }
}

}  // namespace cascade
