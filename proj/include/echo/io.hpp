#pragma once

// File formats
//
//   edge list     one "u v" pair per line, whitespace separated; blank lines
//                 and lines starting with '#' are ignored.
//   features csv  one comma-separated row of reals per node, row i = node i.
//   ECHF          little-endian binary features: "ECHF", u64 rows, u64 cols,
//                 rows*cols f32 row-major.
//   ECHE          same layout with magic "ECHE"; holds trained embeddings.
//   partition     one integer community id per line, line i = node i.
//   wedges        weighted undirected edges "i j w" per line with i < j;
//                 an optional "# nodes N" header fixes the node count.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "echo/error.hpp"
#include "echo/graph.hpp"

namespace echo {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

template <class Int>
bool parse_int(std::string_view tok, Int& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline bool parse_real(std::string_view tok, double& out) {
  std::string buf(tok);
  if (buf.empty()) return false;
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline std::uint64_t read_u64_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw FormatError(path + ": truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f32_le(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      std::array<unsigned char, 4> b{};
      for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(b.data()), 4);
    }
  }
}

inline void read_f32_le(std::istream& in, std::span<float> values, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(float)))) {
    throw FormatError(path + ": truncated payload");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : values) {
      auto bits = std::bit_cast<std::uint32_t>(f);
      bits = __builtin_bswap32(bits);
      f = std::bit_cast<float>(bits);
    }
  }
}

struct BinaryMatrix {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<float> data;
};

inline void save_binary_matrix(const std::string& path, const char (&magic)[5], std::size_t rows,
                               std::size_t cols, std::span<const float> data) {
  auto out = open_out(path, true);
  out.write(magic, 4);
  write_u64_le(out, rows);
  write_u64_le(out, cols);
  write_f32_le(out, data);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline BinaryMatrix load_binary_matrix(const std::string& path, const char (&magic)[5]) {
  auto in = open_in(path, true);
  char got[4] = {};
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(path + ": missing '" + std::string(magic) + "' magic");
  }
  BinaryMatrix m;
  m.rows = read_u64_le(in, path);
  m.cols = read_u64_le(in, path);
  if (m.cols != 0 && m.rows > std::numeric_limits<std::size_t>::max() / sizeof(float) / m.cols) {
    throw FormatError(path + ": implausible shape");
  }
  m.data.resize(m.rows * m.cols);
  read_f32_le(in, m.data, path);
  return m;
}

}  // namespace detail

struct EdgeListStats {
  std::size_t lines_read = 0;
  std::size_t self_loops_dropped = 0;
};

/// Reads a whitespace-separated edge list. With zero_indexed = false ids are
/// taken as 1-based. The node count is max id + 1 unless a `# nodes N` comment
/// declares more, which keeps isolated nodes past the largest id.
inline Graph load_edge_list(const std::string& path, bool zero_indexed = true,
                            EdgeListStats* stats = nullptr) {
  auto in = detail::open_in(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  std::uint64_t max_id = 0;
  std::size_t declared = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      auto toks = detail::split_ws(s.substr(1));
      std::size_t v = 0;
      if (toks.size() >= 2 && toks[0] == "nodes" && detail::parse_int(toks[1], v)) declared = v;
      continue;
    }
    auto toks = detail::split_ws(s);
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    if (toks.size() != 2 || !detail::parse_int(toks[0], a) || !detail::parse_int(toks[1], b)) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected two integer node ids");
    }
    if (!zero_indexed) {
      if (a == 0 || b == 0) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": id 0 in a 1-indexed edge list");
      }
      --a;
      --b;
    }
    if (a > std::numeric_limits<NodeId>::max() - 1 || b > std::numeric_limits<NodeId>::max() - 1) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": node id out of range");
    }
    max_id = std::max({max_id, a, b});
    any = true;
    edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  }
  const std::size_t n = std::max(declared, any ? static_cast<std::size_t>(max_id) + 1 : std::size_t{0});
  std::size_t loops = 0;
  Graph g = Graph::from_edges(n, std::move(edges), &loops);
  if (stats) {
    stats->lines_read = lineno;
    stats->self_loops_dropped = loops;
  }
  return g;
}

struct RemappedGraph {
  Graph graph;
  /// external_ids[i] is the id that node i carried in the file.
  std::vector<std::uint64_t> external_ids;
};

/// Edge list with arbitrary (sparse) integer ids, densified in order of
/// first appearance.
inline RemappedGraph load_edge_list_remapped(const std::string& path) {
  auto in = detail::open_in(path);
  std::unordered_map<std::uint64_t, NodeId> ids;
  RemappedGraph out;
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  auto intern = [&](std::uint64_t ext) {
    auto [it, inserted] = ids.try_emplace(ext, static_cast<NodeId>(ids.size()));
    if (inserted) out.external_ids.push_back(ext);
    return it->second;
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto toks = detail::split_ws(s);
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    if (toks.size() != 2 || !detail::parse_int(toks[0], a) || !detail::parse_int(toks[1], b)) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected two integer node ids");
    }
    const NodeId u = intern(a);
    const NodeId v = intern(b);
    edges.push_back({u, v});
  }
  out.graph = Graph::from_edges(ids.size(), std::move(edges));
  return out;
}

inline void save_edge_list(const std::string& path, const Graph& g) {
  auto out = detail::open_out(path);
  out << "# nodes " << g.num_nodes() << " edges " << g.num_edges() << '\n';
  for (const auto& e : g.edges()) out << e.u << ' ' << e.v << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline FeatureMatrix load_features_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<float> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    for (;;) {
      const auto comma = s.find(',', start);
      auto tok = detail::trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
      double v = 0.0;
      if (!detail::parse_real(tok, v) || !std::isfinite(v)) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                          std::string(tok) + "'");
      }
      data.push_back(static_cast<float>(v));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": ragged row (" + std::to_string(count) +
                        " cells, expected " + std::to_string(cols) + ")");
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path + ": no rows");
  return FeatureMatrix(rows, cols, std::move(data));
}

inline void save_features_csv(const std::string& path, const FeatureMatrix& x) {
  auto out = detail::open_out(path);
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (c) out << ',';
      out << x(r, c);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void save_features_binary(const std::string& path, const FeatureMatrix& x) {
  detail::save_binary_matrix(path, "ECHF", x.rows(), x.cols(), x.data());
}

inline FeatureMatrix load_features_binary(const std::string& path) {
  auto m = detail::load_binary_matrix(path, "ECHF");
  if (m.rows == 0) throw FormatError(path + ": no rows");
  return FeatureMatrix(m.rows, m.cols, std::move(m.data));
}

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& s) {
  detail::save_binary_matrix(path, "ECHE", s.rows(), s.cols(), s.data());
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
  auto m = detail::load_binary_matrix(path, "ECHE");
  return EmbeddingMatrix(m.rows, m.cols, std::move(m.data));
}

/// Dispatches on the first four bytes: "ECHF" selects the binary container,
/// anything else is parsed as CSV.
inline FeatureMatrix load_features(const std::string& path) {
  {
    auto in = detail::open_in(path, true);
    char magic[4] = {};
    if (in.read(magic, 4) && std::memcmp(magic, "ECHF", 4) == 0) return load_features_binary(path);
  }
  return load_features_csv(path);
}

inline void save_partition(const std::string& path, const Partition& p) {
  auto out = detail::open_out(path);
  for (auto id : p.labels()) out << id << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Loads and canonicalizes.
inline Partition load_partition(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    std::uint32_t id = 0;
    if (!detail::parse_int(s, id)) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected an integer community id");
    }
    labels.push_back(id);
  }
  return Partition(std::move(labels)).canonical();
}

}  // namespace echo
