#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "photocov/geometry.hpp"

namespace photocov {

inline constexpr int kReconstructionFormatVersion = 1;

struct ReadOptions {
  /// Reject unknown fields instead of warning.
  bool strict = false;
  /// Receives one message per ignored field when not strict.
  std::vector<std::string>* warnings = nullptr;
};

/// Versioned JSON document. Doubles are written in shortest round-trip form.
std::string reconstruction_to_json(const Reconstruction& recon);

/// Throws SchemaViolation with the JSON pointer of the offending value.
Reconstruction reconstruction_from_json(const std::string& text, const ReadOptions& options = {});

void write_reconstruction(const std::filesystem::path& path, const Reconstruction& recon);
Reconstruction read_reconstruction(const std::filesystem::path& path,
                                   const ReadOptions& options = {});

/// A pair's geometry plus the relative file names of its grids.
struct PairRecord {
  int pair_id = 0;
  StereoPairGeometry geometry;
  std::string disparity_file;
  std::string cost_file;
};

std::string pairs_to_json(const std::vector<PairRecord>& pairs);
std::vector<PairRecord> pairs_from_json(const std::string& text, const ReadOptions& options = {});

void write_pairs(const std::filesystem::path& path, const std::vector<PairRecord>& pairs);
std::vector<PairRecord> read_pairs(const std::filesystem::path& path, const ReadOptions& options = {});

/// Whole file as a string. Throws IOError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace photocov
