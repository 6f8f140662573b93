#include "nolab/storage.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unistd.h>

namespace nolab::storage {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void text(const std::string& s) { bytes(s.data(), s.size()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > b_.size()) throw FormatError(std::string("truncated file while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char* magic) {
  if (r.remaining() < 4 || r.text(4, "magic") != magic)
    throw FormatError(std::string("bad magic: not a ") + magic + " file");
}

json parse_metadata(Reader& r) {
  auto len = r.u64("metadata length");
  auto text = r.text(static_cast<std::size_t>(len), "metadata");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("metadata is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::size_t DatasetContainer::n_samples() const { return metadata.at("n_samples").get<std::size_t>(); }
std::size_t DatasetContainer::grid() const { return metadata.at("grid").get<std::size_t>(); }

void DatasetContainer::validate() const {
  if (!metadata.contains("n_samples") || !metadata.contains("grid"))
    throw FormatError("dataset metadata must declare n_samples and grid");
  const std::size_t expected = n_samples() * grid() * grid();
  if (inputs.size() != expected || targets.size() != expected)
    throw FormatError("dataset payload length does not match n_samples x grid^2 (" + std::to_string(expected) +
                      " floats per array)");
}

Tensor DatasetContainer::input_tensor(DType dtype) const {
  return Tensor::from({n_samples(), grid(), grid()}, std::vector<double>(inputs.begin(), inputs.end()), dtype);
}

Tensor DatasetContainer::target_tensor(DType dtype) const {
  return Tensor::from({n_samples(), grid(), grid()}, std::vector<double>(targets.begin(), targets.end()), dtype);
}

std::vector<std::uint8_t> serialize_dataset(const DatasetContainer& c) {
  c.validate();
  Writer w;
  w.text("NODF");
  w.u32(kDatasetVersion);
  const std::string meta = c.metadata.dump();
  w.u64(meta.size());
  w.text(meta);
  for (float v : c.inputs) w.f32(v);
  for (float v : c.targets) w.f32(v);
  return w.take();
}

DatasetContainer deserialize_dataset(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, "NODF");
  auto version = r.u32("version");
  if (version != kDatasetVersion) throw FormatError("unknown dataset format version " + std::to_string(version));
  DatasetContainer c;
  c.metadata = parse_metadata(r);
  if (!c.metadata.contains("n_samples") || !c.metadata.contains("grid"))
    throw FormatError("dataset metadata must declare n_samples and grid");
  const std::size_t count = c.n_samples() * c.grid() * c.grid();
  if (r.remaining() != 2 * count * sizeof(float))
    throw FormatError("dataset payload length mismatch: expected " + std::to_string(2 * count * sizeof(float)) +
                      " bytes, found " + std::to_string(r.remaining()));
  c.inputs.resize(count);
  c.targets.resize(count);
  for (auto& v : c.inputs) v = r.f32("inputs");
  for (auto& v : c.targets) v = r.f32("targets");
  return c;
}

void write_dataset(const DatasetContainer& container, const std::filesystem::path& path) {
  atomic_write(path, serialize_dataset(container));
}

DatasetContainer read_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_bytes(path)); }

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointFile& f) {
  Writer w;
  w.text("NOCK");
  w.u32(kCheckpointVersion);
  const std::string meta = f.metadata.dump();
  w.u64(meta.size());
  w.text(meta);
  w.u32(static_cast<std::uint32_t>(f.blocks.size()));
  for (const auto& b : f.blocks) {
    if (shape_numel(b.shape) != b.values.size())
      throw FormatError("checkpoint block '" + b.name + "' shape does not match its value count");
    w.u32(static_cast<std::uint32_t>(b.name.size()));
    w.text(b.name);
    w.u32(static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) w.u64(d);
    for (float v : b.values) w.f32(v);
  }
  return w.take();
}

CheckpointFile deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, "NOCK");
  auto version = r.u32("version");
  if (version != kCheckpointVersion) throw FormatError("unknown checkpoint format version " + std::to_string(version));
  CheckpointFile f;
  f.metadata = parse_metadata(r);
  const auto nblocks = r.u32("block count");
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    CheckpointBlock b;
    b.name = r.text(r.u32("block name length"), "block name");
    const auto rank = r.u32("block rank");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      b.shape.push_back(static_cast<std::size_t>(r.u64("block dims")));
      // bound the running product by what is left so a corrupt dim cannot overflow
      if (b.shape.back() != 0 && n > r.remaining() / sizeof(float) / b.shape.back())
        throw FormatError("truncated file while reading block values of '" + b.name + "'");
      n *= b.shape.back();
    }
    r.need(n * sizeof(float), "block values");
    b.values.resize(n);
    for (auto& v : b.values) v = r.f32("block values");
    f.blocks.push_back(std::move(b));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last checkpoint block");
  return f;
}

void write_checkpoint_file(const CheckpointFile& file, const std::filesystem::path& path) {
  atomic_write(path, serialize_checkpoint(file));
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_bytes(path));
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) {
      std::filesystem::remove(tmp);
      throw Error("write to '" + tmp.string() + "' failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

std::string digest(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string digest_file(const std::filesystem::path& path) {
  auto b = read_bytes(path);
  return digest(b);
}

std::string format_number(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << v;
  return os.str();
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += quote(row[i]);
  }
  out += "\r\n";
}

}  // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& r : table.rows) append_row(out, r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      field.clear();
      row.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) throw FormatError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  CsvTable t;
  if (rows.empty()) return t;
  t.header = std::move(rows.front());
  t.rows.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { atomic_write_text(path, to_csv(table)); }

CsvTable read_csv(const std::filesystem::path& path) {
  auto b = read_bytes(path);
  return parse_csv(std::string(b.begin(), b.end()));
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw ShapeError("pgm: pixel count does not match width x height");
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  atomic_write(path, bytes);
}

Pgm read_pgm(const std::filesystem::path& path) {
  auto b = read_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    std::string t;
    while (pos < b.size() && !std::isspace(b[pos])) t += static_cast<char>(b[pos++]);
    return t;
  };
  if (token() != "P5") throw FormatError("pgm: not a binary P5 file");
  Pgm p;
  p.width = std::stoul(token());
  p.height = std::stoul(token());
  if (token() != "255") throw FormatError("pgm: only maxval 255 is supported");
  ++pos;
  if (b.size() - pos != p.width * p.height) throw FormatError("pgm: pixel payload length mismatch");
  p.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  return p;
}

}  // namespace nolab::storage
