#include "popproj/chain_store.hpp"

#include <algorithm>
#include <regex>

#include <fmt/format.h>
#include <json.hpp>

#include "popproj/csv.hpp"

namespace popproj::mcmc {

namespace {

nlohmann::json to_json(const ChainMetadata& m) {
  return {{"model", m.model},         {"config_hash", m.config_hash}, {"seed", m.seed},
          {"chain_id", m.chain_id},   {"iterations", m.iterations},   {"burn_in", m.burn_in},
          {"thin", m.thin},           {"draws", m.draws},             {"complete", m.complete}};
}

ChainMetadata metadata_from_json(const nlohmann::json& j) {
  ChainMetadata m;
  m.model = j.at("model").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.chain_id = j.at("chain_id").get<int>();
  m.iterations = j.at("iterations").get<long>();
  m.burn_in = j.at("burn_in").get<long>();
  m.thin = j.at("thin").get<long>();
  m.draws = j.at("draws").get<std::size_t>();
  m.complete = j.at("complete").get<bool>();
  return m;
}

void write_row(std::ostream& out, std::span<const double> row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << format_double(row[i]);
  }
  out << '\n';
}

}  // namespace

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

std::size_t ChainStore::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw std::out_of_range(fmt::format("chain has no column '{}'", name));
  }
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> ChainStore::column(const std::string& name) const {
  const std::size_t j = column_index(name);
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& row : draws) out.push_back(row[j]);
  return out;
}

std::filesystem::path chain_csv_path(const std::filesystem::path& dir, int chain_id) {
  return dir / fmt::format("chain_{}.csv", chain_id);
}

std::filesystem::path chain_metadata_path(const std::filesystem::path& dir, int chain_id) {
  return dir / fmt::format("chain_{}.meta.json", chain_id);
}

ChainWriter::ChainWriter(std::filesystem::path dir, ChainMetadata metadata,
                         std::vector<std::string> columns)
    : dir_(std::move(dir)), metadata_(std::move(metadata)), columns_(std::move(columns)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  metadata_.complete = false;
  metadata_.draws = 0;
  csv_.open(chain_csv_path(dir_, metadata_.chain_id), std::ios::trunc);
  if (!csv_) {
    throw StorageError(fmt::format("cannot open {} for writing",
                                   chain_csv_path(dir_, metadata_.chain_id).string()));
  }
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) csv_ << ',';
    csv_ << csv::escape(columns_[i]);
  }
  csv_ << '\n';
  csv_.flush();
  write_metadata();
}

void ChainWriter::append(std::span<const double> row) {
  if (row.size() != columns_.size()) {
    throw StorageError(fmt::format("row has {} values for {} columns", row.size(),
                                   columns_.size()));
  }
  write_row(csv_, row);
  csv_.flush();
  if (!csv_) {
    throw StorageError(fmt::format("write to {} failed after {} draws; partial chain kept",
                                   chain_csv_path(dir_, metadata_.chain_id).string(),
                                   metadata_.draws));
  }
  ++metadata_.draws;
}

void ChainWriter::finish() {
  csv_.flush();
  if (!csv_) throw StorageError("chain file is in a failed state");
  metadata_.complete = true;
  write_metadata();
}

void ChainWriter::write_metadata() const {
  const auto path = chain_metadata_path(dir_, metadata_.chain_id);
  std::ofstream out(path, std::ios::trunc);
  out << to_json(metadata_).dump(2) << '\n';
  if (!out) throw StorageError(fmt::format("cannot write {}", path.string()));
}

void write_chain(const std::filesystem::path& dir, const ChainStore& store) {
  ChainWriter writer(dir, store.metadata, store.columns);
  for (const auto& row : store.draws) writer.append(row);
  writer.finish();
}

ChainStore read_chain(const std::filesystem::path& dir, int chain_id) {
  ChainStore store;
  const auto meta_path = chain_metadata_path(dir, chain_id);
  std::ifstream meta(meta_path);
  if (!meta) throw StorageError(fmt::format("cannot read {}", meta_path.string()));
  try {
    store.metadata = metadata_from_json(nlohmann::json::parse(meta));
  } catch (const nlohmann::json::exception& e) {
    throw StorageError(fmt::format("{}: {}", meta_path.string(), e.what()));
  }
  const auto table = csv::read(chain_csv_path(dir, chain_id));
  store.columns = table.header;
  store.draws.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> row(table.header.size());
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = table.number(r, c);
    store.draws.push_back(std::move(row));
  }
  // an interrupted chain never rewrote its sidecar; the flushed rows count
  if (!store.metadata.complete) store.metadata.draws = store.draws.size();
  if (store.draws.size() != store.metadata.draws) {
    throw StorageError(fmt::format("{}: metadata records {} draws but the file has {}",
                                   meta_path.string(), store.metadata.draws, store.draws.size()));
  }
  return store;
}

std::vector<ChainStore> read_chains(const std::filesystem::path& dir) {
  static const std::regex pattern(R"(chain_(\d+)\.csv)");
  std::vector<int> ids;
  if (!std::filesystem::is_directory(dir)) {
    throw StorageError(fmt::format("chain directory {} does not exist", dir.string()));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, match, pattern)) ids.push_back(std::stoi(match[1]));
  }
  std::sort(ids.begin(), ids.end());
  std::vector<ChainStore> stores;
  for (int id : ids) stores.push_back(read_chain(dir, id));
  if (stores.empty()) throw StorageError(fmt::format("no chain files in {}", dir.string()));
  return stores;
}

}  // namespace popproj::mcmc
