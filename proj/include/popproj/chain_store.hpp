#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace popproj::mcmc {

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChainMetadata {
  std::string model;
  std::string config_hash;
  std::uint64_t seed = 0;
  int chain_id = 1;
  long iterations = 0;
  long burn_in = 0;
  long thin = 1;
  std::size_t draws = 0;
  bool complete = false;

  bool operator==(const ChainMetadata&) const = default;
};

/// Thinned draws of one chain, one row per kept iteration.
struct ChainStore {
  ChainMetadata metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> draws;

  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;

  bool operator==(const ChainStore&) const = default;
};

std::filesystem::path chain_csv_path(const std::filesystem::path& dir, int chain_id);
std::filesystem::path chain_metadata_path(const std::filesystem::path& dir, int chain_id);

/// Append-only CSV writer. The sidecar metadata is written with
/// complete=false on open and rewritten on finish(); a chain cut short keeps
/// its rows and stays flagged incomplete.
class ChainWriter {
 public:
  ChainWriter(std::filesystem::path dir, ChainMetadata metadata, std::vector<std::string> columns);

  void append(std::span<const double> row);
  void finish();
  const ChainMetadata& metadata() const { return metadata_; }

 private:
  void write_metadata() const;

  std::filesystem::path dir_;
  ChainMetadata metadata_;
  std::vector<std::string> columns_;
  std::ofstream csv_;
};

/// Writes a complete chain in one go.
void write_chain(const std::filesystem::path& dir, const ChainStore& store);
ChainStore read_chain(const std::filesystem::path& dir, int chain_id);
/// Reads every chain_<id>.csv in `dir`, ordered by id.
std::vector<ChainStore> read_chains(const std::filesystem::path& dir);

/// 17 significant digits; reads back to the identical double.
std::string format_double(double value);

}  // namespace popproj::mcmc
