#include "attacklab/graph_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace attacklab {

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

char split_tag(Split s) {
  switch (s) {
    case Split::Train:
      return 'T';
    case Split::Val:
      return 'V';
    case Split::Test:
      return 'S';
  }
  return '?';
}

Split parse_split(const std::string& tag, int line) {
  if (tag == "T") return Split::Train;
  if (tag == "V") return Split::Val;
  if (tag == "S") return Split::Test;
  throw ParseError(line, "bad split tag '" + tag + "'");
}

}  // namespace

void write_graph(const EngagementGraph& g, std::ostream& out) {
  out << "#engagement-graph v1\n";
  out << "counts " << g.user_count() << ' ' << g.post_count() << ' ' << g.edge_count() << ' '
      << g.feature_dim() << '\n';
  for (int u = 0; u < g.user_count(); ++u) {
    out << "U " << u;
    for (int j = 0; j < g.feature_dim(); ++j) out << ' ' << format_double(g.user_features(u, j));
    out << '\n';
  }
  for (int v = 0; v < g.post_count(); ++v) {
    out << "P " << v << ' ' << g.label(v) << ' ' << split_tag(g.split(v));
    for (int j = 0; j < g.feature_dim(); ++j) out << ' ' << format_double(g.post_features(v, j));
    out << '\n';
  }
  for (auto [u, v] : g.edges()) out << "E " << u << ' ' << v << '\n';
}

void save_graph(const EngagementGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_graph: cannot open " + path);
  write_graph(g, out);
  if (!out) throw Error("save_graph: write failed for " + path);
}

EngagementGraph read_graph(std::istream& in) {
  std::string line;
  int line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line() || line != "#engagement-graph v1")
    throw ParseError(line_no == 0 ? 1 : line_no, "expected header '#engagement-graph v1'");

  if (!next_line()) throw ParseError(line_no + 1, "missing counts line");
  int users = 0, posts = 0, edges = 0, dim = 0;
  {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> users >> posts >> edges >> dim) || tag != "counts")
      throw ParseError(line_no, "bad counts line");
    if (users < 0 || posts < 0 || edges < 0 || dim < 1)
      throw ParseError(line_no, "counts out of range");
  }

  Matrix uf(users, dim), pf(posts, dim);
  std::vector<char> seen_user(users, 0), seen_post(posts, 0);
  std::vector<int> labels(posts, 0);
  std::vector<Split> splits(posts, Split::Test);
  std::vector<std::pair<int, int>> edge_list;
  edge_list.reserve(edges);

  while (next_line()) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "U") {
      int idx;
      if (!(ss >> idx)) throw ParseError(line_no, "bad user line");
      if (idx < 0 || idx >= users) throw ParseError(line_no, "user index out of range");
      if (seen_user[idx]) throw ParseError(line_no, "duplicate user " + std::to_string(idx));
      seen_user[idx] = 1;
      for (int j = 0; j < dim; ++j)
        if (!(ss >> uf(idx, j))) throw ParseError(line_no, "expected " + std::to_string(dim) + " user features");
    } else if (tag == "P") {
      int idx, label;
      std::string split;
      if (!(ss >> idx >> label >> split)) throw ParseError(line_no, "bad post line");
      if (idx < 0 || idx >= posts) throw ParseError(line_no, "post index out of range");
      if (seen_post[idx]) throw ParseError(line_no, "duplicate post " + std::to_string(idx));
      if (label != 0 && label != 1) throw ParseError(line_no, "label must be 0 or 1");
      seen_post[idx] = 1;
      labels[idx] = label;
      splits[idx] = parse_split(split, line_no);
      for (int j = 0; j < dim; ++j)
        if (!(ss >> pf(idx, j))) throw ParseError(line_no, "expected " + std::to_string(dim) + " post features");
    } else if (tag == "E") {
      int u, v;
      if (!(ss >> u >> v)) throw ParseError(line_no, "bad edge line");
      if (u < 0 || u >= users) throw ParseError(line_no, "edge user index out of range");
      if (v < 0 || v >= posts) throw ParseError(line_no, "edge post index out of range");
      edge_list.emplace_back(u, v);
    } else {
      throw ParseError(line_no, "unknown record '" + tag + "'");
    }
  }

  for (int u = 0; u < users; ++u)
    if (!seen_user[u]) throw InconsistentCounts("missing user " + std::to_string(u));
  for (int v = 0; v < posts; ++v)
    if (!seen_post[v]) throw InconsistentCounts("missing post " + std::to_string(v));
  if (static_cast<int>(edge_list.size()) != edges)
    throw InconsistentCounts("counts line says " + std::to_string(edges) + " edges, found " +
                             std::to_string(edge_list.size()));

  try {
    return EngagementGraph(std::move(uf), std::move(pf), std::move(labels), std::move(splits),
                           std::move(edge_list));
  } catch (const DuplicateEdge& e) {
    throw InconsistentCounts(e.what());
  }
}

EngagementGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_graph: cannot open " + path);
  return read_graph(in);
}

}  // namespace attacklab
