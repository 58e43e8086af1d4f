#include "maxsens/error.hpp"
#include "maxsens/mesh.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace maxsens {

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Next non-blank line, trimmed; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      line = line.substr(first, last - first + 1);
      return true;
    }
    return false;
  }

  std::string require(std::string_view what) {
    std::string line;
    if (!next(line)) error("unexpected end of file, expected " + std::string(what));
    return line;
  }

  [[noreturn]] void error(const std::string& message) const {
    fail(ErrorCode::kParse, source_ + ":" + std::to_string(number_) + ": " + message);
  }

  int line_number() const { return number_; }

 private:
  std::istream& in_;
  std::string source_;
  int number_ = 0;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view token, const LineReader& reader, std::string_view what) {
  T value{};
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end)
    reader.error("invalid " + std::string(what) + " '" + std::string(token) + "'");
  return value;
}

void expect_end(LineReader& reader, std::string_view tag) {
  const auto line = reader.require(tag);
  if (line != tag) reader.error("expected " + std::string(tag) + ", found '" + line + "'");
}

// Element dimension for the Gmsh element types we know about; -1 if unknown.
int element_dimension(int type) {
  switch (type) {
    case 15: return 0;                       // point
    case 1: case 8: case 26: case 27: case 28: return 1;  // lines
    case 2: case 3: case 9: case 10: case 16: case 20: case 21: case 22: case 23:
    case 24: case 25: return 2;              // triangles, quads
    case 4: case 5: case 6: case 7: case 11: case 12: case 13: case 14: case 17:
    case 18: case 19: case 29: case 30: case 31: return 3;
    default: return -1;
  }
}

}  // namespace

TetMesh parse_msh(std::istream& in, const std::string& source_name) {
  LineReader reader(in, source_name);
  std::vector<Vec3> vertices;
  std::unordered_map<long long, Index> node_index;
  std::vector<std::array<Index, 4>> tets;
  std::vector<int> tags;
  bool have_format = false;
  bool have_nodes = false;
  bool have_elements = false;

  std::string line;
  while (reader.next(line)) {
    if (line == "$MeshFormat") {
      const std::string fields_line = reader.require("format line");
      const auto fields = split(fields_line);
      if (fields.size() != 3) reader.error("malformed $MeshFormat line");
      const auto version = parse_number<double>(fields[0], reader, "version");
      const auto file_type = parse_number<int>(fields[1], reader, "file type");
      if (version < 2.0 || version >= 3.0) reader.error("unsupported msh version, need 2.x");
      if (file_type != 0) reader.error("binary msh files are not supported");
      expect_end(reader, "$EndMeshFormat");
      have_format = true;
    } else if (line == "$Nodes") {
      if (!have_format) reader.error("$Nodes before $MeshFormat");
      const auto count = parse_number<long long>(reader.require("node count"), reader, "node count");
      if (count < 0) reader.error("negative node count");
      vertices.reserve(static_cast<std::size_t>(count));
      for (long long i = 0; i < count; ++i) {
        const std::string fields_line = reader.require("node");
        const auto fields = split(fields_line);
        if (fields.size() != 4) reader.error("node line needs 'id x y z'");
        const auto id = parse_number<long long>(fields[0], reader, "node id");
        const Vec3 x(parse_number<double>(fields[1], reader, "coordinate"),
                     parse_number<double>(fields[2], reader, "coordinate"),
                     parse_number<double>(fields[3], reader, "coordinate"));
        if (!node_index.emplace(id, static_cast<Index>(vertices.size())).second)
          reader.error("duplicate node id " + std::to_string(id));
        vertices.push_back(x);
      }
      expect_end(reader, "$EndNodes");
      have_nodes = true;
    } else if (line == "$Elements") {
      if (!have_nodes) reader.error("$Elements before $Nodes");
      const auto count =
          parse_number<long long>(reader.require("element count"), reader, "element count");
      if (count < 0) reader.error("negative element count");
      for (long long i = 0; i < count; ++i) {
        const std::string fields_line = reader.require("element");
        const auto fields = split(fields_line);
        if (fields.size() < 3) reader.error("element line too short");
        const int type = parse_number<int>(fields[1], reader, "element type");
        const int ntags = parse_number<int>(fields[2], reader, "tag count");
        if (ntags < 0 || fields.size() < static_cast<std::size_t>(3 + ntags))
          reader.error("element tag count exceeds line length");
        const int dim = element_dimension(type);
        if (dim < 0) reader.error("unknown element type " + std::to_string(type));
        if (dim < 3) continue;
        if (type != 4)
          reader.error("volume element type " + std::to_string(type) +
                       " is not a linear tetrahedron (type 4)");
        if (fields.size() != static_cast<std::size_t>(3 + ntags + 4))
          reader.error("tetrahedron needs exactly 4 nodes");
        std::array<Index, 4> tet{};
        for (int k = 0; k < 4; ++k) {
          const auto node = parse_number<long long>(fields[3 + ntags + k], reader, "node reference");
          const auto it = node_index.find(node);
          if (it == node_index.end())
            reader.error("element references undefined node " + std::to_string(node));
          tet[k] = it->second;
        }
        tets.push_back(tet);
        tags.push_back(ntags > 0 ? parse_number<int>(fields[3], reader, "physical tag") : 0);
      }
      expect_end(reader, "$EndElements");
      have_elements = true;
    } else if (!line.empty() && line[0] == '$' && line.rfind("$End", 0) != 0) {
      // Unknown section: skip to its matching end tag.
      const std::string end_tag = "$End" + line.substr(1);
      std::string skipped;
      bool closed = false;
      while (reader.next(skipped)) {
        if (skipped == end_tag) {
          closed = true;
          break;
        }
      }
      if (!closed) reader.error("section " + line + " is not closed");
    } else {
      reader.error("unexpected line '" + line + "'");
    }
  }
  if (!have_format) reader.error("missing $MeshFormat section");
  if (!have_elements || tets.empty()) reader.error("no tetrahedra found");
  return TetMesh(std::move(vertices), std::move(tets), std::move(tags));
}

TetMesh load_msh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open mesh file '" + path.string() + "'");
  return parse_msh(in, path.string());
}

void write_msh(const TetMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write mesh file '" + path.string() + "'");
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n" << mesh.num_vertices() << "\n";
  out << std::setprecision(17);
  const auto verts = mesh.vertices();
  for (std::size_t i = 0; i < verts.size(); ++i)
    out << i + 1 << ' ' << verts[i].x() << ' ' << verts[i].y() << ' ' << verts[i].z() << "\n";
  out << "$EndNodes\n$Elements\n" << mesh.num_tets() << "\n";
  const auto tets = mesh.tets();
  const auto tags = mesh.region_tags();
  for (std::size_t t = 0; t < tets.size(); ++t) {
    out << t + 1 << " 4 2 " << tags[t] << ' ' << tags[t];
    for (Index v : tets[t]) out << ' ' << v + 1;
    out << "\n";
  }
  out << "$EndElements\n";
  if (!out) fail(ErrorCode::kIo, "failed writing mesh file '" + path.string() + "'");
}

}  // namespace maxsens
