#pragma once

#include "maxsens/fem.hpp"
#include "maxsens/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace maxsens {

// Shortest decimal that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view what = "number");
long long parse_integer(std::string_view text, std::string_view what = "integer");
std::vector<double> parse_doubles(std::string_view text, std::string_view what = "numbers");
std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(std::string_view text);
// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Ordered "key = value" lines; '#' starts a comment line.
class KeyValueFile {
 public:
  void add(std::string key, std::string value);
  void add(std::string key, double value) { add(std::move(key), format_double(value)); }
  void add(std::string key, const std::vector<double>& values);
  // Replaces every entry under key.
  void set(std::string key, std::string value);

  bool has(std::string_view key) const;
  // Exactly one entry required.
  const std::string& get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  std::vector<std::string> get_all(std::string_view key) const;
  double get_double(std::string_view key) const { return parse_double(get(key), key); }
  std::vector<double> get_doubles(std::string_view key) const {
    return parse_doubles(get(key), key);
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::vector<std::string>& comments() { return comments_; }

  std::string to_string() const;
  void write(const std::filesystem::path& path) const;
  static KeyValueFile parse(std::string_view text, const std::string& source);
  static KeyValueFile read(const std::filesystem::path& path);

 private:
  std::vector<std::string> comments_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Binary edge-dof dump keyed by the mesh fingerprint, plus a text sidecar
// `<path>.txt` with the provenance entries.
void write_field(const FieldSolution& field, const std::filesystem::path& path,
                 const KeyValueFile& provenance = {});
// Compatibility error if the dump was written for another mesh.
FieldSolution read_field(std::shared_ptr<const TetMesh> mesh, const std::filesystem::path& path);

// Text trace file: one "value" line (re, im pairs of the three components) per
// boundary vertex, keyed by the mesh fingerprint.
void write_trace(const BoundaryTrace& trace, const std::filesystem::path& path,
                 const KeyValueFile& provenance = {});
BoundaryTrace read_trace(std::shared_ptr<const TetMesh> mesh, const std::filesystem::path& path);

}  // namespace maxsens
