#pragma once

// JSON and CSV serialization for map specs, polylines, martingale trees and
// the report structs. Uses nlohmann/json.

#include "lipquot/affine_oracle.hpp"
#include "lipquot/counterexamples.hpp"
#include "lipquot/martingale.hpp"
#include "lipquot/quotient_zoo.hpp"
#include "lipquot/solvers.hpp"
#include "lipquot/uaap.hpp"

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include "json.hpp"
#endif

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lipquot {

using Json = nlohmann::json;

/// Doubles as JSON numbers; non-finite values become the strings "inf", "-inf", "nan".
inline Json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double num_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw UsageError("json: expected a number, got " + j.dump());
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

inline Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw UsageError("json: expected an array of numbers");
  Vector v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = num_from_json(j[i]);
  return v;
}

/// Row-major nested arrays.
inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw UsageError("json: expected a non-empty array of rows");
  const auto cols = j[0].size();
  Matrix m(static_cast<int>(j.size()), static_cast<int>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from_json(j[i]);
    if (static_cast<std::size_t>(row.size()) != cols) throw UsageError("json: ragged matrix rows");
    m.row(static_cast<int>(i)) = row.transpose();
  }
  return m;
}

inline Json to_json(const std::vector<Vector>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(to_json(p));
  return a;
}

inline std::vector<Vector> points_from_json(const Json& j) {
  if (!j.is_array()) throw UsageError("json: expected an array of points");
  std::vector<Vector> out;
  for (const auto& p : j) out.push_back(vector_from_json(p));
  return out;
}

namespace detail {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw UsageError(std::string("json: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw UsageError(std::string("json: bad field '") + key + "': " + e.what());
  }
}

inline double num_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw UsageError(std::string("json: missing field '") + key + "'");
  return num_from_json(j.at(key));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Map specs: {"kind": ..., "params": {...}}, nets inline.

inline Json to_json(const ZooMapSpec& s) {
  Json params = Json::object();
  switch (s.kind) {
    case ZooKind::fold: break;
    case ZooKind::prop42:
      if (s.slice_a) params["sliceA"] = num(*s.slice_a);
      break;
    case ZooKind::prop41: {
      const auto& q = s.prop41;
      params = {{"m", q.m}, {"p", num(q.p)}, {"a", num(q.a)}, {"kMin", q.k_min}, {"kMax", q.k_max},
                {"netRegion", num(q.net_region)}, {"seed", q.seed}};
      Json nets = Json::object();
      for (const auto& [k, pts] : q.nets) nets[std::to_string(k)] = to_json(pts);
      params["nets"] = std::move(nets);
      break;
    }
    case ZooKind::prop311:
      params = {{"n", s.prop311.n}, {"m", s.prop311.m}, {"p", num(s.prop311.p)}};
      break;
    case ZooKind::linear: params["matrix"] = to_json(s.linear); break;
  }
  return {{"kind", to_string(s.kind)}, {"params", std::move(params)}};
}

inline ZooMapSpec zoo_spec_from_json(const Json& j) {
  if (!j.is_object()) throw UsageError("json: map spec must be an object");
  const ZooKind kind = zoo_kind_from_string(detail::field<std::string>(j, "kind"));
  const Json params = j.value("params", Json::object());
  switch (kind) {
    case ZooKind::fold: return ZooMapSpec::fold();
    case ZooKind::prop42: {
      std::optional<double> slice;
      if (params.contains("sliceA")) slice = detail::num_field(params, "sliceA");
      return ZooMapSpec::prop42(slice);
    }
    case ZooKind::prop311:
      return ZooMapSpec::prop311_map(detail::field<int>(params, "n"), detail::field<int>(params, "m"),
                                     detail::num_field(params, "p"));
    case ZooKind::linear: return ZooMapSpec::linear_map(matrix_from_json(detail::field<Json>(params, "matrix")));
    case ZooKind::prop41: {
      ZooMapSpec s;
      s.kind = ZooKind::prop41;
      auto& q = s.prop41;
      q.m = detail::field<int>(params, "m");
      q.p = detail::num_field(params, "p");
      q.a = detail::num_field(params, "a");
      q.k_min = detail::field<int>(params, "kMin");
      q.k_max = detail::field<int>(params, "kMax");
      q.net_region = detail::num_field(params, "netRegion");
      q.seed = params.value("seed", std::uint64_t{0});
      require(q.k_min <= q.k_max, "json: kMin must not exceed kMax");
      const Json nets = detail::field<Json>(params, "nets");
      for (int k = q.k_min; k <= q.k_max; ++k) {
        const auto key = std::to_string(k);
        if (!nets.contains(key)) throw UsageError("json: missing net for level " + key);
        q.nets[k] = points_from_json(nets.at(key));
        for (const auto& u : q.nets[k])
          if (u.size() != q.m) throw UsageError("json: net point dimension mismatch at level " + key);
      }
      index_nets(s);
      return s;
    }
  }
  throw UsageError("json: unknown map kind");
}

// ---------------------------------------------------------------------------
// Polylines

inline Json to_json(const Polyline& p) {
  Json times = Json::array();
  for (double t : p.times) times.push_back(num(t));
  return {{"times", times}, {"points", to_json(p.points)}, {"lipBound", num(p.lip_bound)}};
}

inline Polyline polyline_from_json(const Json& j) {
  Polyline p;
  for (const auto& t : detail::field<Json>(j, "times")) p.times.push_back(num_from_json(t));
  p.points = points_from_json(detail::field<Json>(j, "points"));
  p.lip_bound = j.contains("lipBound") ? num_from_json(j["lipBound"]) : 0.0;
  p.check();
  return p;
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with header t,x0,x1,...
inline std::string polyline_csv(const Polyline& p) {
  std::ostringstream os;
  os << "t";
  const int d = p.points.empty() ? 0 : static_cast<int>(p.points.front().size());
  for (int k = 0; k < d; ++k) os << ",x" << k;
  os << "\n";
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    os << csv_number(p.times[i]);
    for (int k = 0; k < d; ++k) os << "," << csv_number(p.points[i][k]);
    os << "\n";
  }
  return os.str();
}

/// CSV of a point set with header x0,x1,... and an optional extra column.
inline std::string points_csv(const std::vector<Vector>& pts, const std::string& extra_name = {},
                              const std::vector<double>& extra = {}) {
  std::ostringstream os;
  const int d = pts.empty() ? 0 : static_cast<int>(pts.front().size());
  for (int k = 0; k < d; ++k) os << (k ? "," : "") << "x" << k;
  if (!extra_name.empty()) os << (d ? "," : "") << extra_name;
  os << "\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < d; ++k) os << (k ? "," : "") << csv_number(pts[i][k]);
    if (!extra_name.empty()) os << (d ? "," : "") << csv_number(extra.at(i));
    os << "\n";
  }
  return os.str();
}

/// Reads numeric CSV rows; a first line containing letters is treated as a header.
inline std::vector<std::vector<double>> read_csv_rows(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line.find_first_of("abcdefghjklmopqrstuvwxyzABCDEFGHJKLMOPQRSTUVWXYZ_") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      try {
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos)
        throw UsageError("csv: not a number: '" + cell + "'");
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw UsageError("csv: ragged rows");
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Martingale trees: nested {"a", "c", "value", "b"?, "children"?: [left, right]}.

inline Json to_json(const PartitionMartingale& m) {
  if (m.nodes().empty()) throw UsageError("json: empty martingale");
  auto rec = [&](auto&& self, int i) -> Json {
    const auto& n = m.node(i);
    Json j = {{"a", num(n.a)}, {"c", num(n.c)}, {"value", to_json(n.value)}};
    if (!n.is_leaf()) {
      j["b"] = num(*n.b);
      j["children"] = Json::array({self(self, n.left), self(self, n.right)});
    }
    return j;
  };
  return rec(rec, 0);
}

/// Loads the tree verbatim (no consistency repair); validate_martingale reports malformed trees.
inline PartitionMartingale martingale_from_json(const Json& j) {
  PartitionMartingale m;
  auto& ns = m.mutable_nodes();
  auto fill = [&](auto&& self, const Json& jn, int idx, int level) -> void {
    if (!jn.is_object()) throw UsageError("json: martingale node must be an object");
    MartingaleNode n;
    n.a = detail::num_field(jn, "a");
    n.c = detail::num_field(jn, "c");
    n.value = vector_from_json(detail::field<Json>(jn, "value"));
    n.level = level;
    if (jn.contains("b")) n.b = detail::num_field(jn, "b");
    const bool split = jn.contains("children");
    if (split) {
      const Json& ch = jn.at("children");
      if (!ch.is_array() || ch.size() != 2) throw UsageError("json: a split node needs exactly two children");
      n.left = static_cast<int>(ns.size());
      n.right = n.left + 1;
      ns.emplace_back();
      ns.emplace_back();
      ns[idx] = n;
      self(self, ch[0], n.left, level + 1);
      self(self, ch[1], n.right, level + 1);
    } else {
      ns[idx] = n;
    }
  };
  ns.emplace_back();
  fill(fill, j, 0, 0);
  return m;
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const AffineMap& a) { return {{"linear", to_json(a.linear)}, {"offset", to_json(a.offset)}}; }

inline Json to_json(const FitResult& f) {
  return {{"map", to_json(f.map)},         {"error", num(f.error)},   {"activeCount", f.active_count},
          {"lowerBound", num(f.lower_bound)}, {"slack", num(f.slack)}, {"exact", f.exact},
          {"certified", f.certified}};
}

inline Json to_json(const ApproxCertificate& c) {
  Json trace = Json::array();
  for (const auto& s : c.trace)
    trace.push_back({{"d", num(s.d)}, {"lipHalf", num(s.lip_half)}, {"lipDouble", num(s.lip_double)},
                     {"satisfied", s.satisfied}});
  Json j = {{"center", to_json(c.ball.center)},
            {"radius", num(c.ball.radius)},
            {"map", to_json(c.map)},
            {"constructionMap", to_json(c.construction_map)},
            {"eps", num(c.eps)},
            {"d", num(c.d)},
            {"k", c.k},
            {"delta", num(c.delta)},
            {"L", num(c.L)},
            {"boundClaim", num(c.bound_claim)},
            {"sampledError", num(c.sampled_error)},
            {"constructionError", num(c.construction_error)},
            {"radiusFloor", num(c.radius_floor)},
            {"constantBranch", c.constant_branch},
            {"polished", c.polished},
            {"trace", std::move(trace)}};
  if (c.z_star) j["zStar"] = to_json(c.z_star->coords);
  if (!c.coordinates.empty()) {
    Json coords = Json::array();
    for (const auto& sub : c.coordinates) coords.push_back(to_json(sub));
    j["coordinates"] = std::move(coords);
  }
  return j;
}

inline Json to_json(const WitnessReport& w) {
  Json details = Json::object();
  for (const auto& [k, v] : w.details) details[k] = num(v);
  Json j = {{"points", to_json(w.points)}, {"values", to_json(w.values)}, {"lowerBound", num(w.lower_bound)},
            {"passed", w.passed},          {"note", w.note},              {"details", std::move(details)}};
  if (w.theory_bound) j["theoryBound"] = num(*w.theory_bound);
  return j;
}

inline Json to_json(const CoverReport& r) {
  Json j = {{"center", to_json(r.center)},  {"r", num(r.r)},
            {"rho", num(r.rho)},            {"targetsTried", r.targets_tried},
            {"worstResidual", num(r.worst_residual)}, {"covered", r.covered},
            {"tol", num(r.tol)}};
  if (r.covered_radius_estimate) j["coveredRadiusEstimate"] = num(*r.covered_radius_estimate);
  return j;
}

inline Json to_json(const LevelSetReport& r) {
  Json res = Json::array();
  for (double v : r.residuals) res.push_back(num(v));
  return {{"target", to_json(r.target)},     {"points", to_json(r.points)},  {"residuals", std::move(res)},
          {"minPairGap", num(r.min_pair_gap)}, {"gridMesh", num(r.grid_mesh)}, {"gridPoints", r.grid_points},
          {"candidates", r.candidates}};
}

inline Json to_json(const PerturbResult& r) {
  Json stages = Json::array();
  for (const auto& s : r.stages)
    stages.push_back({{"radius", num(s.radius)}, {"step", num(s.step)}, {"residual", num(s.residual)}});
  return {{"z", to_json(r.z)}, {"residual", num(r.residual)}, {"delta", num(r.delta)},
          {"r", num(r.r)},     {"bound", num(r.bound)},       {"stages", std::move(stages)}};
}

inline Json to_json(const Prop311Solution& s) {
  Json slots = Json::array();
  for (const auto& t : s.slots)
    slots.push_back({{"slot", t.slot}, {"b", num(t.b)}, {"A", num(t.A)}, {"branch", t.branch}, {"k", t.k},
                     {"multiplier", num(t.multiplier)}});
  return {{"z", to_json(s.z)}, {"residual", num(s.residual)}, {"ratio", num(s.ratio)}, {"slots", std::move(slots)}};
}

inline Json to_json(const JacobianReport& r) {
  return {{"jacobian", to_json(r.jacobian)}, {"minSingularValue", num(r.min_singular_value)}};
}

inline Json to_json(const DirectionalReport& r) {
  Json ts = Json::array();
  for (double t : r.ts) ts.push_back(num(t));
  return {{"limit", to_json(r.limit)}, {"converged", r.converged}, {"ts", std::move(ts)},
          {"quotients", to_json(r.quotients)}};
}

inline Json to_json(const MartingaleReport& r) {
  return {{"isMartingale", r.is_martingale},
          {"isBounded", r.is_bounded},
          {"isSeparated", r.is_separated},
          {"isDyadic", r.is_dyadic},
          {"bound", num(r.bound)},
          {"maxIdentityError", num(r.max_identity_error)},
          {"minSeparation", num(r.min_separation)},
          {"depth", r.depth},
          {"nodes", r.nodes}};
}

inline Json to_json(const ObstructionReport& r) {
  return {{"epsLowerBound", num(r.eps_lower_bound)}, {"level", r.level}, {"outerWidth", num(r.outer_width)},
          {"jump", num(r.jump)}};
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
  if (!out) throw UsageError("write to '" + path + "' failed");
}

}  // namespace lipquot
