#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nolab/tensor.hpp"

namespace nolab::storage {

using json = nlohmann::json;

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On-disk dataset: paired input/target fields plus self-describing
/// metadata. Payloads are float32, sample-major, row-major [n, grid, grid].
///
/// Layout (all integers little-endian):
///   "NODF" | u32 version | u64 metadata bytes | metadata (UTF-8 JSON)
///   | inputs f32[n*grid*grid] | targets f32[n*grid*grid]
struct DatasetContainer {
  json metadata;  // must carry "n_samples" and "grid"
  std::vector<float> inputs;
  std::vector<float> targets;

  std::size_t n_samples() const;
  std::size_t grid() const;
  // [n, grid, grid] views as tensors
  Tensor input_tensor(DType dtype = DType::f64) const;
  Tensor target_tensor(DType dtype = DType::f64) const;
  void validate() const;
};

void write_dataset(const DatasetContainer& container, const std::filesystem::path& path);
DatasetContainer read_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_dataset(const DatasetContainer& container);
DatasetContainer deserialize_dataset(std::span<const std::uint8_t> bytes);

/// Named float32 parameter blocks plus metadata.
///
///   "NOCK" | u32 version | u64 metadata bytes | metadata JSON | u32 blocks
///   | per block: u32 name bytes | name | u32 rank | u64 dims[rank] | f32 data
struct CheckpointBlock {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointFile {
  json metadata;
  std::vector<CheckpointBlock> blocks;
};

void write_checkpoint_file(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const CheckpointFile& file);
CheckpointFile deserialize_checkpoint(std::span<const std::uint8_t> bytes);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string digest(std::span<const std::uint8_t> bytes);
std::string digest_file(const std::filesystem::path& path);
template <typename T>
std::string digest_of(std::span<const T> values) {
  return digest(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(values.data()),
                                              values.size_bytes()));
}

/// RFC-4180 style CSV, '.' decimal separator, values written with enough
/// digits to round-trip a double.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
std::string format_number(double v);
std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Binary 8-bit grayscale PGM (P5).
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels);
struct Pgm {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
Pgm read_pgm(const std::filesystem::path& path);

}  // namespace nolab::storage
