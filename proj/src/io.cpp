#include "latree/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "latree/error.hpp"

namespace latree {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::Parse, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("field '") + key + "': " + e.what());
  }
}

json tree_json(const LatentTree& tree) {
  json out;
  out["nodes"] = json::array();
  for (NodeId v : tree.nodes()) {
    json n{{"id", v}, {"kind", is_hidden(v) ? "hidden" : "observed"}};
    if (!tree.label(v).empty()) n["label"] = tree.label(v);
    out["nodes"].push_back(n);
  }
  out["edges"] = json::array();
  for (const Edge& e : tree.edges()) {
    json ej{{"u", e.u}, {"v", e.v}};
    if (auto d = tree.length(e.u, e.v)) ej["d"] = std::isfinite(*d) ? json(*d) : json("inf");
    out["edges"].push_back(ej);
  }
  return out;
}

LatentTree tree_of_json(const json& j) {
  LatentTree tree;
  for (const json& n : field<json>(j, "nodes")) {
    const auto id = field<NodeId>(n, "id");
    if (n.contains("kind")) {
      const auto kind = field<std::string>(n, "kind");
      if ((kind == "hidden") != is_hidden(id) || (kind != "hidden" && kind != "observed"))
        throw Error(ErrorKind::Parse, "node " + std::to_string(id) + " has kind '" + kind + "'");
    }
    tree.add_node(id, n.contains("label") ? field<std::string>(n, "label") : std::string{});
  }
  for (const json& e : field<json>(j, "edges")) {
    std::optional<double> d;
    if (e.contains("d")) {
      if (e["d"].is_string()) {
        if (e["d"].get<std::string>() != "inf") throw Error(ErrorKind::Parse, "bad edge length");
        d = kInfinity;
      } else {
        d = field<double>(e, "d");
      }
    }
    tree.add_edge(field<NodeId>(e, "u"), field<NodeId>(e, "v"), d);
  }
  tree.validate();
  return tree;
}

json edge_values(const std::map<Edge, double>& values) {
  json out = json::array();
  for (const auto& [e, v] : values) out.push_back({{"u", e.u}, {"v", e.v}, {"value", v}});
  return out;
}

std::map<Edge, double> edge_values_of(const json& arr) {
  std::map<Edge, double> out;
  for (const json& x : arr) out[Edge(field<NodeId>(x, "u"), field<NodeId>(x, "v"))] = field<double>(x, "value");
  return out;
}

json matrix_json(const Eigen::MatrixXd& M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXd matrix_of(const json& j, int K) {
  Eigen::MatrixXd M(K, K);
  if (!j.is_array() || static_cast<int>(j.size()) != K) throw Error(ErrorKind::Parse, "matrix has the wrong shape");
  for (int r = 0; r < K; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != K) throw Error(ErrorKind::Parse, "matrix has the wrong shape");
    for (int c = 0; c < K; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

// ------------------------------------------------------------------ CSV

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_row(line));
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "empty CSV");
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r].size() != rows[0].size())
      throw Error(ErrorKind::RaggedRows, "row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                                             " fields, header has " + std::to_string(rows[0].size()));
  return rows;
}

std::optional<double> parse_number(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "Inf") return kInfinity;
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::optional<NodeId> parse_id(const std::string& s) {
  NodeId v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Integer headers are ids; otherwise ids 0..m-1 with the headers as names.
std::pair<std::vector<NodeId>, std::vector<std::string>> header_ids(const std::vector<std::string>& header) {
  std::vector<NodeId> ids;
  for (const auto& h : header) {
    auto id = parse_id(h);
    if (!id) break;
    ids.push_back(*id);
  }
  std::vector<NodeId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  const bool unique = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  if (ids.size() == header.size() && unique) return {ids, {}};
  ids.clear();
  for (std::size_t k = 0; k < header.size(); ++k) ids.push_back(static_cast<NodeId>(k));
  return {ids, header};
}

std::string header_line(const std::vector<NodeId>& ids, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (k) out += ',';
    out += names.empty() ? std::to_string(ids[k]) : names[k];
  }
  return out + '\n';
}

std::string matrix_csv(const std::vector<NodeId>& ids, const std::vector<std::string>& names,
                       const Eigen::MatrixXd& M) {
  std::string out = header_line(ids, names);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) out += ',';
      out += format_double(M(r, c));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd numeric_body(const std::vector<std::vector<std::string>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  const auto m = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd M(n, m);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < m; ++c) {
      const auto& cell = rows[static_cast<std::size_t>(r + 1)][static_cast<std::size_t>(c)];
      auto v = parse_number(cell);
      if (!v)
        throw Error(ErrorKind::NonNumeric,
                    "row " + std::to_string(r + 2) + ", column " + std::to_string(c + 1) + ": '" + cell + "'");
      M(r, c) = *v;
    }
  return M;
}

}  // namespace

std::string tree_to_json(const LatentTree& tree) { return tree_json(tree).dump(2) + "\n"; }

LatentTree tree_from_json(const std::string& text) { return tree_of_json(parse_json(text)); }

bool json_has_model(const std::string& text) { return parse_json(text).contains("family"); }

std::string model_to_json(const TreeModel& model) {
  json out = tree_json(tree_of(model));
  out["family"] = to_string(family_of(model));
  if (const auto* g = std::get_if<GaussianTreeModel>(&model)) {
    out["rho"] = edge_values(g->rho);
  } else if (const auto* s = std::get_if<SymmetricDiscreteTreeModel>(&model)) {
    out["K"] = s->K;
    out["theta"] = edge_values(s->theta);
  } else {
    const auto& d = std::get<GeneralDiscreteTreeModel>(model);
    out["K"] = d.K;
    out["root"] = d.root;
    out["root_marginal"] = std::vector<double>(d.root_marginal.data(), d.root_marginal.data() + d.K);
    out["conditional"] = json::array();
    for (const auto& [step, C] : d.conditional)
      out["conditional"].push_back({{"parent", step.first}, {"child", step.second}, {"matrix", matrix_json(C)}});
  }
  return out.dump(2) + "\n";
}

TreeModel model_from_json(const std::string& text) {
  const json j = parse_json(text);
  LatentTree tree = tree_of_json(j);
  const Family family = family_from_string(field<std::string>(j, "family"));
  TreeModel model;
  switch (family) {
    case Family::Gaussian: {
      GaussianTreeModel g;
      g.tree = tree;
      g.rho = edge_values_of(field<json>(j, "rho"));
      model = g;
      break;
    }
    case Family::Symmetric: {
      SymmetricDiscreteTreeModel s;
      s.tree = tree;
      s.K = field<int>(j, "K");
      s.theta = edge_values_of(field<json>(j, "theta"));
      model = s;
      break;
    }
    case Family::Discrete: {
      GeneralDiscreteTreeModel d;
      d.tree = tree;
      d.K = field<int>(j, "K");
      d.root = field<NodeId>(j, "root");
      const auto marginal = field<std::vector<double>>(j, "root_marginal");
      if (static_cast<int>(marginal.size()) != d.K) throw Error(ErrorKind::Parse, "root marginal has the wrong size");
      d.root_marginal = Eigen::Map<const Eigen::VectorXd>(marginal.data(), d.K);
      for (const json& c : field<json>(j, "conditional"))
        d.conditional[{field<NodeId>(c, "parent"), field<NodeId>(c, "child")}] = matrix_of(field<json>(c, "matrix"), d.K);
      model = d;
      break;
    }
  }
  for (const Edge& e : tree.edges()) {
    bool present = true;
    if (const auto* g = std::get_if<GaussianTreeModel>(&model)) present = g->rho.count(e) != 0;
    if (const auto* s = std::get_if<SymmetricDiscreteTreeModel>(&model)) present = s->theta.count(e) != 0;
    if (const auto* d = std::get_if<GeneralDiscreteTreeModel>(&model))
      present = d->conditional.count({e.u, e.v}) + d->conditional.count({e.v, e.u}) == 1;
    if (!present)
      throw Error(ErrorKind::Parse, "no parameter for edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
  }
  return model;
}

std::string to_newick(const LatentTree& tree) {
  if (tree.node_count() == 0) return ";";
  const NodeId root = tree.nodes().front();
  auto name = [&](NodeId v) {
    std::string s = is_hidden(v) ? (tree.label(v).empty() ? "H" + std::to_string(-v) : tree.label(v)) : tree.display_name(v);
    for (char& c : s)
      if (std::string_view("(),:; \t[]'").find(c) != std::string_view::npos) c = '_';
    return s;
  };
  std::function<std::string(NodeId, NodeId)> rec = [&](NodeId v, NodeId parent) {
    std::string out;
    std::vector<NodeId> kids;
    for (NodeId w : tree.neighbors(v))
      if (w != parent) kids.push_back(w);
    if (!kids.empty()) {
      out += '(';
      for (std::size_t k = 0; k < kids.size(); ++k) {
        if (k) out += ',';
        out += rec(kids[k], v);
        if (auto d = tree.length(v, kids[k])) out += ':' + format_double(*d);
      }
      if (is_observed(v)) out += ',' + name(v) + ":0";
      out += ')';
      return is_observed(v) ? out : out + name(v);
    }
    return out + name(v);
  };
  return rec(root, root) + ";";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Parse, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Parse, "cannot write '" + path + "'");
  out << text;
}

std::string sign_path(const std::string& path) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + ".sign" + p.extension().string())).string();
}

void write_distance_csv(const DistanceMatrix& D, const std::string& path) {
  write_file(path, matrix_csv(D.labels, D.names, D.d));
  if (D.sign) write_file(sign_path(path), matrix_csv(D.labels, D.names, *D.sign));
}

DistanceMatrix read_distance_csv(const std::string& path) {
  const auto rows = read_rows(read_file(path));
  auto [ids, names] = header_ids(rows[0]);
  if (rows.size() - 1 != ids.size()) throw Error(ErrorKind::Parse, "distance matrix is not square");
  DistanceMatrix D(ids);
  D.names = names;
  D.d = numeric_body(rows);
  for (Eigen::Index a = 0; a < D.size(); ++a) {
    if (D.d(a, a) != 0.0) throw Error(ErrorKind::Parse, "distance matrix has a nonzero diagonal");
    for (Eigen::Index b = 0; b < D.size(); ++b)
      if (D.d(a, b) < 0 || std::isnan(D.d(a, b)) || D.d(a, b) != D.d(b, a))
        throw Error(ErrorKind::Parse, "distance matrix must be symmetric and non-negative");
  }
  const std::string sp = sign_path(path);
  if (std::filesystem::exists(sp)) {
    const auto srows = read_rows(read_file(sp));
    if (srows[0] != rows[0] || srows.size() != rows.size()) throw Error(ErrorKind::Parse, "sign file does not match");
    D.sign = numeric_body(srows);
  }
  return D;
}

void write_samples_csv(const SampleMatrix& samples, const std::string& path) {
  std::string out = header_line(samples.columns, samples.names);
  for (Eigen::Index r = 0; r < samples.n(); ++r) {
    for (Eigen::Index c = 0; c < samples.m(); ++c) {
      if (c) out += ',';
      const double v = samples.data(r, c);
      out += samples.alphabet > 0 ? std::to_string(static_cast<long long>(v)) : format_double(v);
    }
    out += '\n';
  }
  write_file(path, out);
}

SampleMatrix parse_csv(const std::string& text, Family family, bool center, int K) {
  const auto rows = read_rows(text);
  SampleMatrix s;
  std::tie(s.columns, s.names) = header_ids(rows[0]);
  if (family == Family::Gaussian) {
    s.data = numeric_body(rows);
    for (Eigen::Index i = 0; i < s.data.size(); ++i)
      if (!std::isfinite(s.data.data()[i])) throw Error(ErrorKind::NonNumeric, "non-finite entry");
    if (center && s.n() > 1) {
      for (Eigen::Index c = 0; c < s.m(); ++c) {
        auto col = s.data.col(c);
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(s.n() - 1));
        if (sd > 0) col /= sd;
      }
    }
    return s;
  }
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  s.data.resize(n, static_cast<Eigen::Index>(s.columns.size()));
  long long largest = 0;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < s.m(); ++c) {
      const auto& cell = rows[static_cast<std::size_t>(r + 1)][static_cast<std::size_t>(c)];
      long long v = 0;
      const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size() || v < 0 || (K > 0 && v >= K))
        throw Error(ErrorKind::AlphabetViolation,
                    "row " + std::to_string(r + 2) + ", column " + std::to_string(c + 1) + ": '" + cell + "'");
      largest = std::max(largest, v);
      s.data(r, c) = static_cast<double>(v);
    }
  s.alphabet = K > 0 ? K : static_cast<int>(std::max<long long>(2, largest + 1));
  return s;
}

SampleMatrix ingest_csv(const std::string& path, Family family, bool center, int K) {
  return parse_csv(read_file(path), family, center, K);
}

bool looks_like_distance_csv(const std::string& path) {
  const auto rows = read_rows(read_file(path));
  if (rows.size() - 1 != rows[0].size()) return false;
  try {
    const Eigen::MatrixXd M = numeric_body(rows);
    for (Eigen::Index a = 0; a < M.rows(); ++a) {
      if (M(a, a) != 0.0) return false;
      for (Eigen::Index b = 0; b < a; ++b)
        if (M(a, b) != M(b, a)) return false;
    }
  } catch (const Error&) {
    return false;
  }
  return true;
}

}  // namespace latree
