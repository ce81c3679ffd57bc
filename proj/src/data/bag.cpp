#include "data/bag.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace ccan {

void FeatureBag::validate() const {
  if (tokens.rows == 0) throw DataError("bag '" + bag_id + "' has no tokens");
  if (coords.size() != tokens.rows) {
    throw DataError("bag '" + bag_id + "': " + std::to_string(tokens.rows) + " tokens but " +
                    std::to_string(coords.size()) + " coordinates");
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const GridCoord& c : coords) {
    if (c.rows_total != rows_total || c.cols_total != cols_total || c.row >= rows_total || c.col >= cols_total) {
      throw DataError("bag '" + bag_id + "': coordinate (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                      ") outside the " + std::to_string(rows_total) + "x" + std::to_string(cols_total) + " grid");
    }
    if (!seen.emplace(c.row, c.col).second) {
      throw DataError("bag '" + bag_id + "': duplicate coordinate (" + std::to_string(c.row) + ", " +
                      std::to_string(c.col) + ")");
    }
  }
}

namespace {

void put_id(ByteWriter& w, const std::string& id, const char* what) {
  if (id.size() > 255) throw DataError(std::string(what) + " longer than 255 bytes cannot be stored");
  w.u8(static_cast<std::uint8_t>(id.size()));
  w.raw(id);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw DataError(std::string(what) + " exceeds the 32-bit range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_bag(const FeatureBag& bag) {
  bag.validate();
  if (bag.label > 255) throw DataError("label " + std::to_string(bag.label) + " does not fit in one byte");
  ByteWriter w;
  w.raw("CCFB");
  w.u16(kBagFormatVersion);
  w.u32(checked_u32(bag.size(), "token count"));
  w.u32(checked_u32(bag.dim(), "token width"));
  w.u32(checked_u32(bag.rows_total, "grid rows"));
  w.u32(checked_u32(bag.cols_total, "grid cols"));
  w.u8(static_cast<std::uint8_t>(bag.label));
  put_id(w, bag.bag_id, "bag_id");
  put_id(w, bag.patient_id, "patient_id");
  for (const GridCoord& c : bag.coords) {
    w.u32(static_cast<std::uint32_t>(c.row));
    w.u32(static_cast<std::uint32_t>(c.col));
  }
  for (float v : bag.tokens.values) w.f32(v);
  return w.bytes();
}

FeatureBag decode_bag(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.raw(4) != "CCFB") throw FormatError("bad magic, expected CCFB", 0);
  const std::size_t version_at = r.offset();
  const std::uint16_t version = r.u16();
  if (version != kBagFormatVersion) {
    throw FormatError("unsupported CCFB version " + std::to_string(version), version_at);
  }
  FeatureBag bag;
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  bag.rows_total = r.u32();
  bag.cols_total = r.u32();
  bag.label = r.u8();
  bag.bag_id = r.raw(r.u8());
  bag.patient_id = r.raw(r.u8());
  const std::size_t body = static_cast<std::size_t>(n) * 8 + static_cast<std::size_t>(n) * d * 4;
  r.require(body);
  bag.coords.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    GridCoord c;
    c.row = r.u32();
    c.col = r.u32();
    c.rows_total = bag.rows_total;
    c.cols_total = bag.cols_total;
    bag.coords.push_back(c);
  }
  bag.tokens = Matrix(n, d);
  for (float& v : bag.tokens.values) v = r.f32();
  if (r.remaining() != 0) throw FormatError("trailing bytes after bag payload", r.offset());
  try {
    bag.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("invalid bag contents: ") + e.what(), r.offset());
  }
  return bag;
}

void write_bag(const FeatureBag& bag, const std::string& path) { write_file_bytes(path, encode_bag(bag)); }

FeatureBag read_bag(const std::string& path) { return decode_bag(read_file_bytes(path)); }

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ostringstream out;
  out << "bag_id,patient_id,label,path\n";
  for (const auto& e : entries) {
    for (const std::string* s : {&e.bag_id, &e.patient_id, &e.path}) {
      if (s->find_first_of(",\n") != std::string::npos) throw DataError("manifest field contains ',' or newline: " + *s);
    }
    out << e.bag_id << ',' << e.patient_id << ',' << e.label << ',' << e.path << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "bag_id,patient_id,label,path") {
    throw DataError("manifest '" + path + "' lacks the header bag_id,patient_id,label,path");
  }
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw DataError("manifest line " + std::to_string(line_no) + " must have 4 fields");
    ManifestEntry e{f[0], f[1], 0, f[3]};
    try {
      e.label = static_cast<std::uint32_t>(std::stoul(f[2]));
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(line_no) + ": bad label '" + f[2] + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<FeatureBag> load_manifest_bags(const std::string& manifest_path) {
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<FeatureBag> bags;
  for (const auto& e : read_manifest(manifest_path)) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = base / p;
    FeatureBag bag = read_bag(p.string());
    if (bag.bag_id != e.bag_id) {
      throw DataError("manifest lists '" + e.bag_id + "' but " + p.string() + " holds '" + bag.bag_id + "'");
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

}  // namespace ccan
