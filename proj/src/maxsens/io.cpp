#include "maxsens/io.hpp"

#include "maxsens/error.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace maxsens {

namespace {

constexpr char kFieldMagic[8] = {'M', 'X', 'S', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kFieldVersion = 1;

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_fingerprint(const KeyValueFile& kv, const TetMesh& mesh, const std::string& what) {
  const std::uint64_t stored = parse_hex64(kv.get("mesh_fingerprint"));
  if (stored != mesh.fingerprint()) {
    fail(ErrorCode::kCompatibility, what + " was written for mesh " + hex64(stored) +
                                        ", not for mesh " + hex64(mesh.fingerprint()));
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) fail(ErrorCode::kIo, "cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::kParse, "invalid " + std::string(what) + " '" + std::string(text) + "'");
  return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::kParse, "invalid " + std::string(what) + " '" + std::string(text) + "'");
  return v;
}

std::vector<double> parse_doubles(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',')) ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != ',') ++i;
    if (i > start) out.push_back(parse_double(text.substr(start, i - start), what));
  }
  return out;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  const auto [ptr, ec] = std::to_chars(buf, buf + 16, value, 16);
  std::string s(buf, ptr);
  return std::string(16 - s.size(), '0') + s;
}

std::uint64_t parse_hex64(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::kParse, "invalid fingerprint '" + std::string(text) + "'");
  return v;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void KeyValueFile::add(std::string key, std::string value) {
  entries_.emplace_back(std::move(key), std::move(value));
}

void KeyValueFile::set(std::string key, std::string value) {
  std::erase_if(entries_, [&](const auto& e) { return e.first == key; });
  add(std::move(key), std::move(value));
}

void KeyValueFile::add(std::string key, const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ' ';
    s += format_double(values[i]);
  }
  add(std::move(key), std::move(s));
}

bool KeyValueFile::has(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& KeyValueFile::get(std::string_view key) const {
  const std::string* found = nullptr;
  for (const auto& [k, v] : entries_) {
    if (k != key) continue;
    if (found) fail(ErrorCode::kParse, "key '" + std::string(key) + "' appears more than once");
    found = &v;
  }
  if (!found) fail(ErrorCode::kParse, "missing key '" + std::string(key) + "'");
  return *found;
}

std::string KeyValueFile::get_or(std::string_view key, std::string fallback) const {
  return has(key) ? get(key) : fallback;
}

std::vector<std::string> KeyValueFile::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& c : comments_) out += "# " + c + "\n";
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueFile::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << to_string();
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& source) {
  KeyValueFile kv;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++number;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      kv.comments_.emplace_back(trim(line.substr(1)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kParse,
           source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    kv.entries_.emplace_back(std::string(trim(line.substr(0, eq))),
                             std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
  return parse(read_all(path), path.string());
}

void write_field(const FieldSolution& field, const std::filesystem::path& path,
                 const KeyValueFile& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  const std::uint64_t fp = field.mesh().fingerprint();
  const std::uint64_t n = static_cast<std::uint64_t>(field.coefficients().size());
  out.write(kFieldMagic, sizeof kFieldMagic);
  out.write(reinterpret_cast<const char*>(&kFieldVersion), sizeof kFieldVersion);
  out.write(reinterpret_cast<const char*>(&fp), sizeof fp);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(field.coefficients().data()),
            static_cast<std::streamsize>(n * sizeof(Complex)));
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path.string() + "'");

  KeyValueFile side = provenance;
  side.set("format", "maxsens-field");
  side.set("version", std::to_string(kFieldVersion));
  side.set("mesh_fingerprint", hex64(fp));
  side.set("num_dofs", std::to_string(n));
  side.set("l2_coefficients", format_double(field.coefficients().norm()));
  side.write(path.string() + ".txt");
}

FieldSolution read_field(std::shared_ptr<const TetMesh> mesh, const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const std::size_t header = sizeof kFieldMagic + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t);
  if (bytes.size() < header || std::memcmp(bytes.data(), kFieldMagic, sizeof kFieldMagic) != 0)
    fail(ErrorCode::kParse, "'" + path.string() + "' is not a field dump");
  std::uint32_t version = 0;
  std::uint64_t fp = 0;
  std::uint64_t n = 0;
  std::size_t off = sizeof kFieldMagic;
  std::memcpy(&version, bytes.data() + off, sizeof version);
  off += sizeof version;
  std::memcpy(&fp, bytes.data() + off, sizeof fp);
  off += sizeof fp;
  std::memcpy(&n, bytes.data() + off, sizeof n);
  off += sizeof n;
  if (version != kFieldVersion)
    fail(ErrorCode::kParse, "unsupported field dump version " + std::to_string(version));
  if (fp != mesh->fingerprint()) {
    fail(ErrorCode::kCompatibility, "field dump '" + path.string() + "' belongs to mesh " +
                                        hex64(fp) + ", not " + hex64(mesh->fingerprint()));
  }
  if (bytes.size() != off + n * sizeof(Complex))
    fail(ErrorCode::kParse, "field dump '" + path.string() + "' is truncated");
  ComplexVector c(static_cast<Eigen::Index>(n));
  std::memcpy(c.data(), bytes.data() + off, n * sizeof(Complex));
  return FieldSolution(std::move(mesh), std::move(c));
}

void write_trace(const BoundaryTrace& trace, const std::filesystem::path& path,
                 const KeyValueFile& provenance) {
  KeyValueFile kv = provenance;
  kv.set("format", "maxsens-trace");
  kv.set("version", "1");
  kv.set("mesh_fingerprint", hex64(trace.mesh().fingerprint()));
  kv.set("num_values", std::to_string(trace.values().size()));
  for (const auto& v : trace.values()) {
    kv.add("value", std::vector<double>{v[0].real(), v[0].imag(), v[1].real(), v[1].imag(),
                                        v[2].real(), v[2].imag()});
  }
  kv.write(path);
}

BoundaryTrace read_trace(std::shared_ptr<const TetMesh> mesh, const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::read(path);
  if (kv.get("format") != "maxsens-trace")
    fail(ErrorCode::kParse, "'" + path.string() + "' is not a trace file");
  check_fingerprint(kv, *mesh, "trace '" + path.string() + "'");
  const auto lines = kv.get_all("value");
  if (static_cast<long long>(lines.size()) != parse_integer(kv.get("num_values")))
    fail(ErrorCode::kParse, "trace '" + path.string() + "' has a wrong value count");
  std::vector<Vec3c> values;
  values.reserve(lines.size());
  for (const auto& l : lines) {
    const auto d = parse_doubles(l, "trace value");
    if (d.size() != 6) fail(ErrorCode::kParse, "trace value needs 6 numbers");
    values.emplace_back(Complex(d[0], d[1]), Complex(d[2], d[3]), Complex(d[4], d[5]));
  }
  return BoundaryTrace(std::move(mesh), std::move(values));
}

}  // namespace maxsens
