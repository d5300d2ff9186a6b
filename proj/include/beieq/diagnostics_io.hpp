#pragma once

/// @file diagnostics_io.hpp
/// @brief JSON run configuration, energy CSV, binary snapshots and logging.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "beieq/scheme.hpp"
#include "beieq/verification.hpp"

namespace beieq {

/// I/O failure; the message always names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InitialSpec {
  std::string preset = "smooth-modes";  // zero | smooth-modes | random-perturbation
  double amplitude = 0.1;
  std::uint64_t seed = 0;
  double p0 = 0.0;
  std::string snapshot;  // when set, overrides the preset

  bool operator==(const InitialSpec&) const = default;
};

struct OutputSpec {
  std::string energy_csv;
  std::string snapshot_dir;
  int snapshot_every = 0;

  bool operator==(const OutputSpec&) const = default;
};

struct RunConfig {
  SchemeConfig scheme;
  InitialSpec initial;
  OutputSpec output;

  bool operator==(const RunConfig&) const = default;
};

/// Parse and validate JSON text. Throws ConfigError whose message starts
/// with the offending field path (e.g. "params.A0: ...").
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Initial fields for the configured preset or snapshot.
InitialData make_initial(const RunConfig& cfg);
InitialData preset_initial(const GridSpec& g, const std::string& preset, double amplitude, std::uint64_t seed,
                           double p0 = 0.0);

// --- energy CSV ------------------------------------------------------------------

extern const char* const kEnergyCsvHeader;

void write_energy_csv(const std::vector<EnergyRow>& rows, const std::filesystem::path& path);
std::string format_energy_csv(const std::vector<EnergyRow>& rows);
std::vector<EnergyRow> read_energy_csv(const std::filesystem::path& path);

// --- snapshots -------------------------------------------------------------------

struct SnapshotField {
  std::string name;
  std::vector<double> data;

  bool operator==(const SnapshotField&) const = default;
};

struct Snapshot {
  int nx = 0;
  int ny = 0;
  double hx = 0.0;
  double hy = 0.0;
  double t = 0.0;
  /// Cell-centered fields first, then face fields (u1, u2, ut1, ut2).
  std::vector<SnapshotField> fields;

  const SnapshotField* find(const std::string& name) const;
  bool operator==(const Snapshot&) const = default;
};

/// Number of values stored for a field name on an nx x ny grid.
std::size_t snapshot_field_length(const std::string& name, int nx, int ny);

Snapshot snapshot_of(const State& s);
void write_snapshot(const Snapshot& snap, const std::filesystem::path& path);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Write `content` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// --- logging ---------------------------------------------------------------------

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

/// From BEIEQ_LOG (quiet | info | debug); default info.
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace beieq
