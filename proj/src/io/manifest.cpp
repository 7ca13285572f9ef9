#include "ainx/manifest.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "ainx/binary_io.hpp"
#include "ainx/wav.hpp"

namespace ainx::io {

namespace {

std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field", line_no);
  return fields;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + '"';
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_seconds(const std::string& field, const char* what, std::size_t line_no) {
  if (field.empty()) return std::nullopt;
  double v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v) || v < 0) {
    throw FormatError(std::string("invalid ") + what + " '" + field + "'", line_no);
  }
  return v;
}

}  // namespace

Manifest parse_manifest_text(std::string_view text, const std::filesystem::path& base_dir) {
  Manifest m;
  bool have_header = false, have_classes = false;
  std::int32_t max_label = -1;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.starts_with("#")) {
      if (line.starts_with("#classes=")) {
        if (have_header) throw FormatError("#classes= must precede the header", line_no);
        for (auto& name : split_csv(std::string_view(line).substr(9), line_no)) m.class_names.push_back(trim(name));
        have_classes = true;
      }
      continue;
    }
    auto fields = split_csv(line, line_no);
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      if (fields.size() != 4 || fields[0] != "path" || fields[1] != "label" || fields[2] != "start" ||
          fields[3] != "end") {
        throw FormatError("expected header 'path,label,start,end'", line_no);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 4) {
      throw FormatError("expected 4 fields, found " + std::to_string(fields.size()), line_no);
    }
    ManifestRow row;
    row.line = line_no;
    if (fields[0].empty()) throw FormatError("empty audio path", line_no);
    std::filesystem::path p = std::filesystem::u8path(fields[0]);
    row.audio_path = p.is_absolute() ? p : base_dir / p;
    const auto& lab = fields[1];
    const auto res = std::from_chars(lab.data(), lab.data() + lab.size(), row.label);
    if (lab.empty() || res.ec != std::errc() || res.ptr != lab.data() + lab.size()) {
      throw FormatError("label '" + lab + "' is not an integer", line_no);
    }
    if (row.label < 0) throw FormatError("label " + lab + " is negative", line_no);
    if (have_classes && std::size_t(row.label) >= m.class_names.size()) {
      throw FormatError("label " + lab + " out of range for " + std::to_string(m.class_names.size()) + " classes",
                        line_no);
    }
    row.start_s = parse_seconds(fields[2], "start", line_no);
    row.end_s = parse_seconds(fields[3], "end", line_no);
    if (row.start_s && row.end_s && !(*row.start_s < *row.end_s)) {
      throw FormatError("start must be before end", line_no);
    }
    max_label = std::max(max_label, row.label);
    m.rows.push_back(std::move(row));
  }
  if (!have_classes) {
    for (std::int32_t c = 0; c <= max_label; ++c) m.class_names.push_back(std::to_string(c));
  }
  return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_manifest_text(std::string_view(bytes.data(), bytes.size()), path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string format_manifest(const Manifest& manifest, const std::filesystem::path& base_dir) {
  std::ostringstream out;
  out << "#classes=";
  for (std::size_t c = 0; c < manifest.class_names.size(); ++c) {
    out << (c ? "," : "") << quote_csv(manifest.class_names[c]);
  }
  out << "\npath,label,start,end\n";
  auto seconds = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, *v);
    return std::string(buf, res.ptr);
  };
  for (const auto& row : manifest.rows) {
    auto rel = row.audio_path.lexically_relative(base_dir);
    const auto& p = rel.empty() || rel.native().starts_with("..") ? row.audio_path : rel;
    out << quote_csv(p.generic_string()) << ',' << row.label << ',' << seconds(row.start_s) << ','
        << seconds(row.end_s) << '\n';
  }
  return out.str();
}

train::Dataset load_dataset(const Manifest& manifest) {
  train::Dataset ds;
  ds.class_names = manifest.class_names;
  for (const auto& row : manifest.rows) {
    auto clip = read_wav(row.audio_path);
    const auto n = clip.samples.size();
    const auto b = row.start_s ? std::min(n, std::size_t(std::llround(*row.start_s * clip.sample_rate))) : 0;
    const auto e = row.end_s ? std::min(n, std::size_t(std::llround(*row.end_s * clip.sample_rate))) : n;
    if (b >= e) {
      throw FormatError(row.audio_path.string() + ": window [start, end) selects no samples", row.line);
    }
    train::Example ex;
    ex.samples.assign(clip.samples.begin() + std::ptrdiff_t(b), clip.samples.begin() + std::ptrdiff_t(e));
    ex.sample_rate = clip.sample_rate;
    ex.label = row.label;
    ex.source = row.audio_path.string();
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace ainx::io
