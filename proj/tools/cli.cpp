#include "cli.hpp"

#include "lipquot/lipquot.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace lipquot::cli {
namespace {

struct Claim {
  std::string name;
  double measured = 0.0;
  bool passed = false;
  std::optional<double> theory;
};

struct Outcome {
  Json results = Json::object();
  std::vector<Claim> claims;
  std::vector<std::string> artifacts;
  std::optional<std::string> csv;

  void claim(std::string name, double measured, bool passed, std::optional<double> theory = std::nullopt) {
    claims.push_back({std::move(name), measured, passed, theory});
  }
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
};

using Body = std::function<Outcome(const Common&)>;

struct Command {
  CLI::App* app = nullptr;
  std::string name;
  std::shared_ptr<Common> common;
  Body body;
};

// ---------------------------------------------------------------------------
// value parsing

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError(what + ": not a number: '" + s + "'");
  }
  if (used != s.size()) throw UsageError(what + ": not a number: '" + s + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(parse_number(cell, what));
  if (out.empty()) throw UsageError(what + ": empty list");
  return out;
}

Vector parse_vector(const std::string& s, const std::string& what) {
  const auto xs = parse_list(s, what);
  return Eigen::Map<const Vector>(xs.data(), static_cast<int>(xs.size()));
}

Vector parse_vector_dim(const std::string& s, int dim, const std::string& what) {
  const Vector v = parse_vector(s, what);
  if (v.size() != dim) throw UsageError(what + ": expected " + std::to_string(dim) + " coordinates");
  return v;
}

/// Rows separated by ';', entries by ','.
Matrix parse_matrix(const std::string& s, const std::string& what) {
  std::vector<Vector> rows;
  std::stringstream ss(s);
  std::string row;
  while (std::getline(ss, row, ';')) rows.push_back(parse_vector(row, what));
  if (rows.empty()) throw UsageError(what + ": empty matrix");
  Matrix m(static_cast<int>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw UsageError(what + ": ragged rows");
    m.row(static_cast<int>(i)) = rows[i].transpose();
  }
  return m;
}

/// "lo,hi" for every coordinate, or lo1,hi1,lo2,hi2,...
std::pair<Vector, Vector> parse_box(const std::string& s, int dim) {
  const auto xs = parse_list(s, "--box");
  Vector lo(dim), hi(dim);
  if (xs.size() == 2) {
    lo.setConstant(xs[0]);
    hi.setConstant(xs[1]);
  } else if (xs.size() == static_cast<std::size_t>(2 * dim)) {
    for (int i = 0; i < dim; ++i) {
      lo[i] = xs[2 * i];
      hi[i] = xs[2 * i + 1];
    }
  } else {
    throw UsageError("--box: expected 2 or " + std::to_string(2 * dim) + " numbers");
  }
  return {lo, hi};
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// shared option groups

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Root seed for every random stream");
  sub->add_option("--out", c.out, "Report path (stdout when empty)");
  sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

struct MapOpts {
  std::string map = "fold";
  std::string spec;
  std::string slice_a;
  int slots = 8;
  int inner = 10;
  double p = 2.0;
  int x_dim = 2;
  double a = 0.5;
  int k_min = -8;
  int k_max = -2;
  double net_region = 1.5;
  std::string matrix;
  std::string save_spec;
};

void add_map_options(CLI::App* sub, MapOpts& o) {
  sub->add_option("--map", o.map, "Map kind")->check(CLI::IsMember({"fold", "prop42", "prop41", "prop311", "linear"}));
  sub->add_option("--spec", o.spec, "Map spec JSON file (overrides --map)");
  sub->add_option("--slice-a", o.slice_a, "prop42: restrict to the plane a = value");
  sub->add_option("--slots", o.slots, "prop311: number of outer slots n");
  sub->add_option("--inner", o.inner, "prop311: inner coordinates per slot m");
  sub->add_option("--p", o.p, "prop311/prop41: l_p exponent");
  sub->add_option("--x-dim", o.x_dim, "prop41: dimension of X");
  sub->add_option("--a", o.a, "prop41: the constant a");
  sub->add_option("--k-min", o.k_min, "prop41: finest net level");
  sub->add_option("--k-max", o.k_max, "prop41: coarsest net level");
  sub->add_option("--net-region", o.net_region, "prop41: radius of the netted region");
  sub->add_option("--matrix", o.matrix, "linear: rows separated by ';'");
  sub->add_option("--save-spec", o.save_spec, "Write the resolved map spec as JSON");
}

ZooMapSpec resolve_map(const MapOpts& o, std::uint64_t seed, Outcome& out) {
  ZooMapSpec spec;
  if (!o.spec.empty()) {
    spec = zoo_spec_from_json(read_json_file(o.spec));
  } else {
    switch (zoo_kind_from_string(o.map)) {
      case ZooKind::fold: spec = ZooMapSpec::fold(); break;
      case ZooKind::prop42:
        spec = ZooMapSpec::prop42(o.slice_a.empty() ? std::nullopt
                                                    : std::optional<double>(parse_number(o.slice_a, "--slice-a")));
        break;
      case ZooKind::prop311: spec = ZooMapSpec::prop311_map(o.slots, o.inner, o.p); break;
      case ZooKind::linear:
        if (o.matrix.empty()) throw UsageError("--map linear needs --matrix");
        spec = ZooMapSpec::linear_map(parse_matrix(o.matrix, "--matrix"));
        break;
      case ZooKind::prop41: {
        Prop41Params q;
        q.m = o.x_dim;
        q.p = o.p;
        q.a = o.a;
        q.k_min = o.k_min;
        q.k_max = o.k_max;
        q.net_region = o.net_region;
        q.seed = seed;
        spec = build_prop41(q);
        break;
      }
    }
  }
  if (!o.save_spec.empty()) {
    write_text_file(o.save_spec, to_json(spec).dump(2) + "\n");
    out.artifacts.push_back(o.save_spec);
  }
  out.results["map"] = to_string(spec.kind);
  return spec;
}

void save_json(const std::string& path, const Json& j, Outcome& out) {
  if (path.empty()) return;
  write_text_file(path, j.dump(2) + "\n");
  out.artifacts.push_back(path);
}

// ---------------------------------------------------------------------------
// uaap-search

void add_uaap(CLI::App& app, std::vector<Command>& cmds) {
  struct Opts {
    std::string function = "ridge";
    int dim = 5;
    double p = 2.0;
    double eps = 0.1;
    double radius = 1.0;
    std::string center;
    std::string coef;
    int pair_budget = 4000;
    int validation = 4000;
    std::string scales;
  };
  auto o = std::make_shared<Opts>();
  auto c = std::make_shared<Common>();
  auto* sub = app.add_subcommand("uaap-search", "Find a ball on which a Lipschitz function is nearly affine");
  sub->add_option("--function", o->function, "Test function")
      ->check(CLI::IsMember({"ridge", "norm", "abs", "sawtooth", "linear", "absmap", "identity"}));
  sub->add_option("--dim", o->dim, "Domain dimension");
  sub->add_option("--p", o->p, "Domain l_p exponent");
  sub->add_option("--eps", o->eps, "Accuracy eps in (0, 1/2)");
  sub->add_option("--radius", o->radius, "Domain ball radius");
  sub->add_option("--center", o->center, "Domain ball centre (default 0)");
  sub->add_option("--coef", o->coef, "linear: coefficient vector");
  sub->add_option("--pair-budget", o->pair_budget, "Pairs for the Lipschitz estimates");
  sub->add_option("--validation-samples", o->validation, "Ball samples for validation");
  sub->add_option("--check-scales", o->scales, "Rescaling factors to check for exact equivariance");
  add_common(sub, *c);
  cmds.push_back({sub, "uaap-search", c, [o](const Common& cm) {
    Outcome out;
    const NormedSpace space(o->dim, o->p);
    const Vector c0 = o->center.empty() ? Vector::Zero(o->dim) : parse_vector_dim(o->center, o->dim, "--center");
    const Ball ball{c0, o->radius};
    UaapOptions uopt;
    uopt.seed = cm.seed;
    uopt.pair_budget = o->pair_budget;
    uopt.validation_samples = o->validation;
    const double p = o->p;

    const bool vector = o->function == "absmap" || o->function == "identity";
    if (vector) {
      const bool absm = o->function == "absmap";
      LipschitzFunction f(
          [absm](const Vector& x) { return absm ? Vector(x.cwiseAbs()) : x; }, o->dim, ball, 1.0);
      f.with_codomain(NormedSpace::linf(o->dim));
      ApproxCertificate cert;
      try {
        cert = uaap_search_vector(space, f, o->eps, o->dim, uopt);
      } catch (const UaapValidationFailure& e) {
        out.results["certificate"] = to_json(e.certificate);
        out.claim("sampledError", e.certificate.sampled_error, false, e.certificate.bound_claim);
        return out;
      }
      out.results["certificate"] = to_json(cert);
      out.claim("sampledError", cert.sampled_error, cert.sampled_error <= cert.bound_claim * uopt.slack,
                cert.bound_claim * uopt.slack);
      return out;
    }

    std::function<double(const Vector&)> fn;
    double lip = 1.0;
    if (o->function == "ridge") {
      const auto rf = ridge_function(o->dim, p, derive_seed(cm.seed, "uaap_function"), ball);
      fn = [rf](const Vector& x) { return rf.value(x); };
    } else if (o->function == "norm") {
      fn = [p](const Vector& x) { return lp_norm(x, p); };
    } else if (o->function == "abs") {
      fn = [](const Vector& x) { return std::abs(x[0]); };
    } else if (o->function == "sawtooth") {
      fn = [](const Vector& x) { return sawtooth(x[0]); };
      lip = 2.0;
    } else {
      if (o->coef.empty()) throw UsageError("--function linear needs --coef");
      const Vector a = parse_vector_dim(o->coef, o->dim, "--coef");
      fn = [a](const Vector& x) { return a.dot(x); };
      lip = lp_norm(a, dual_exponent(p));
    }

    const auto run_at = [&](double s) {
      const auto scaled = [fn, s](const Vector& x) { return s * fn(x / s); };
      return uaap_search_scalar(space, LipschitzFunction::scalar(scaled, {Vector(s * c0), s * o->radius}, lip), o->eps,
                                uopt);
    };
    ApproxCertificate cert;
    try {
      cert = run_at(1.0);
    } catch (const UaapValidationFailure& e) {
      out.results["certificate"] = to_json(e.certificate);
      out.claim("sampledError", e.certificate.sampled_error, false, e.certificate.bound_claim * uopt.slack);
      return out;
    }
    out.results["certificate"] = to_json(cert);
    const double floor = uaap_radius_floor(o->eps, smoothness_delta(space, o->eps)) * o->radius;
    out.claim("radiusFloor", cert.ball.radius, cert.ball.radius >= floor * (1.0 - 1e-12), floor);
    out.claim("sampledError", cert.sampled_error, cert.sampled_error <= cert.bound_claim * uopt.slack,
              cert.bound_claim * uopt.slack);

    // independent oracle on fresh samples of the returned ball
    Rng rng(cm.seed, "uaap_oracle");
    std::vector<Vector> xs;
    std::vector<double> fs;
    for (int i = 0; i < 1000; ++i) {
      xs.push_back(sample_ball(lp_norm_fn(p), cert.ball.center, cert.ball.radius, rng));
      fs.push_back(fn(xs.back()));
    }
    const double oracle = minimax_affine_fit(xs, fs).error;
    out.results["oracleError"] = num(oracle);
    out.claim("oracleError", oracle, oracle <= cert.bound_claim * uopt.slack, cert.bound_claim * uopt.slack);

    if (!o->scales.empty()) {
      for (double s : parse_list(o->scales, "--check-scales")) {
        const auto c2 = run_at(s);
        const double dev = std::max({std::abs(c2.ball.radius - s * cert.ball.radius),
                                     max_abs(c2.ball.center - s * cert.ball.center),
                                     std::abs(c2.sampled_error - s * cert.sampled_error)});
        out.claim("rescale " + csv_number(s), dev, dev == 0.0, 0.0);
      }
    }
    return out;
  }});
}

// ---------------------------------------------------------------------------
// affine-fit

void add_affine_fit(CLI::App& app, std::vector<Command>& cmds) {
  struct Opts {
    std::string function = "abs";
    int dim = 1;
    int samples = 201;
    double lo = -1.0;
    double hi = 1.0;
    std::string data;
    int in_dim = 1;
    double p = 2.0;
    std::string expect_error;
    double tol = 1e-6;
  };
  auto o = std::make_shared<Opts>();
  auto c = std::make_shared<Common>();
  auto* sub = app.add_subcommand("affine-fit", "Minimax affine fit on a finite sample");
  sub->add_option("--function", o->function, "Sampled function")
      ->check(CLI::IsMember({"abs", "sawtooth", "norm", "ridge"}));
  sub->add_option("--dim", o->dim, "Domain dimension");
  sub->add_option("--samples", o->samples, "Sample count (a uniform grid when dim = 1)");
  sub->add_option("--lo", o->lo, "Lower corner of the sampling box");
  sub->add_option("--hi", o->hi, "Upper corner of the sampling box");
  sub->add_option("--data", o->data, "CSV of samples: in-dim input columns then output columns");
  sub->add_option("--in-dim", o->in_dim, "Input columns in --data");
  sub->add_option("--p", o->p, "Codomain l_p exponent for vector data");
  sub->add_option("--expect-error", o->expect_error, "Expected optimal error");
  sub->add_option("--tol", o->tol, "Tolerance for --expect-error");
  add_common(sub, *c);
  cmds.push_back({sub, "affine-fit", c, [o](const Common& cm) {
    Outcome out;
    std::vector<Vector> xs, ys;
    if (!o->data.empty()) {
      std::ifstream in(o->data);
      if (!in) throw UsageError("cannot open '" + o->data + "'");
      const auto rows = read_csv_rows(in);
      if (rows.empty()) throw UsageError("--data: no rows");
      const int cols = static_cast<int>(rows.front().size());
      require(o->in_dim >= 1 && o->in_dim < cols, "--in-dim must leave at least one output column");
      for (const auto& r : rows) {
        xs.push_back(Eigen::Map<const Vector>(r.data(), o->in_dim));
        ys.push_back(Eigen::Map<const Vector>(r.data() + o->in_dim, cols - o->in_dim));
      }
    } else {
      require(o->samples >= 2, "--samples must be >= 2");
      require(o->hi > o->lo, "--hi must exceed --lo");
      const Ball box_ball{Vector::Constant(o->dim, 0.5 * (o->lo + o->hi)), 0.5 * (o->hi - o->lo)};
      const auto rf = ridge_function(o->dim, 2.0, derive_seed(cm.seed, "fit_function"), box_ball);
      Rng rng(cm.seed, "fit_samples");
      for (int i = 0; i < o->samples; ++i) {
        Vector x(o->dim);
        if (o->dim == 1)
          x[0] = o->lo + (o->hi - o->lo) * i / (o->samples - 1);
        else
          for (int k = 0; k < o->dim; ++k) x[k] = rng.uniform(o->lo, o->hi);
        double v = 0.0;
        if (o->function == "abs") v = std::abs(x[0]);
        else if (o->function == "sawtooth") v = sawtooth(x[0]);
        else if (o->function == "norm") v = x.norm();
        else v = rf.value(x);
        xs.push_back(x);
        ys.push_back(Vector::Constant(1, v));
      }
    }
    const int m = static_cast<int>(ys.front().size());
    const NormedSpace codomain(m, o->p);
    const FitResult fit = minimax_affine_fit(xs, ys, codomain);
    out.results["samples"] = xs.size();
    out.results["fit"] = to_json(fit);
    out.claim("lowerBound", fit.lower_bound, fit.lower_bound <= fit.error + 1e-9, fit.error);
    if (!o->expect_error.empty()) {
      const double want = parse_number(o->expect_error, "--expect-error");
      out.claim("expectedError", fit.error, std::abs(fit.error - want) <= o->tol, want);
    }
    if (xs.size() >= 4) {
      // dropping samples can only lower the optimum
      const std::size_t half = xs.size() / 2;
      const FitResult sub_fit = minimax_affine_fit(std::vector<Vector>(xs.begin(), xs.begin() + half),
                                                   std::vector<Vector>(ys.begin(), ys.begin() + half), codomain);
      out.claim("monotoneUnderAddition", sub_fit.error, sub_fit.error <= fit.error + 1e-9, fit.error);
    }
    return out;
  }});
}

// ---------------------------------------------------------------------------
// counterexample {tree|staircase|absmap}

void add_counterexamples(CLI::App& app, std::vector<Command>& cmds) {
  auto* group = app.add_subcommand("counterexample", "Explicit lower-bound constructions");
  group->require_subcommand(1);

  {
    struct Opts {
      int N = 6;
      double eps = 0.2;
      std::string r;
      int count = 100;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("tree", "Dyadic-tree norm witness");
    sub->add_option("--N", o->N, "Tree depth");
    sub->add_option("--eps", o->eps, "eps");
    sub->add_option("--r", o->r, "Fixed ball radius (default: seeded in [0.05, 0.9])");
    sub->add_option("--count", o->count, "Seeded (x, r) draws");
    add_common(sub, *c);
    cmds.push_back({sub, "counterexample tree", c, [o](const Common& cm) {
      Outcome out;
      require(o->count >= 1, "--count must be >= 1");
      const auto t = build_dyadic_tree(o->N);
      double mid_err = 0.0, sep_dev = 0.0;
      int internal = 0;
      for (int k = 0; k < o->N; ++k)
        for (int j = 0; j < (1 << k); ++j) {
          const Vector parent = t.functional(j, k).coords;
          const Vector l = t.functional(2 * j, k + 1).coords, r = t.functional(2 * j + 1, k + 1).coords;
          mid_err = std::max(mid_err, max_abs(parent - 0.5 * (l + r)));
          sep_dev = std::max(sep_dev, std::abs(lp_norm(l - r, 1.0) - 2.0));
          ++internal;
        }
      out.results["internalNodes"] = internal;
      out.claim("midpointIdentity", mid_err, mid_err == 0.0, 0.0);
      out.claim("separation", sep_dev, sep_dev == 0.0, 0.0);
      double worst_margin = kInf;
      int passed = 0, certified_full = 0;
      Json witnesses = Json::array();
      for (int i = 0; i < o->count; ++i) {
        Rng rng(cm.seed, "tree_chain", i);
        const double r = o->r.empty() ? rng.uniform(0.05, 0.9) : parse_number(o->r, "--r");
        Vector x(t.dim());
        for (int k = 0; k < t.dim(); ++k) x[k] = rng.uniform(-(1.0 - r), 1.0 - r);
        const auto rep = tree_witness_check(t, x, r, o->eps);
        worst_margin = std::min(worst_margin, rep.detail("chain_margin"));
        passed += rep.passed;
        certified_full += rep.detail("eq28_holds") != 0.0;
        witnesses.push_back({{"r", num(r)}, {"lowerBound", num(rep.lower_bound)}, {"passed", rep.passed},
                             {"chainMargin", num(rep.detail("chain_margin"))},
                             {"requiredDepth", static_cast<int>(rep.detail("required_depth"))}, {"note", rep.note}});
      }
      out.results["witnesses"] = std::move(witnesses);
      out.results["fullBoundCertified"] = certified_full;
      out.claim("chainInequality", worst_margin, passed == o->count, 0.0);
      return out;
    }});
  }
  {
    struct Opts {
      int n = 8, k = 0, l = 2;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("staircase", "Staircase curve in l_1^n");
    sub->add_option("--n", o->n, "Dimension n");
    sub->add_option("--k", o->k, "Start index k");
    sub->add_option("--l", o->l, "Step l");
    add_common(sub, *c);
    cmds.push_back({sub, "counterexample staircase", c, [o](const Common&) {
      Outcome out;
      const auto rep = staircase_witness(o->n, o->k, o->l);
      out.results["witness"] = to_json(rep);
      const double mid = rep.detail("midpoint_identity");
      out.claim("midpointIdentity", mid, mid == static_cast<double>(o->l), static_cast<double>(o->l));
      out.claim("lowerBound", rep.lower_bound, rep.lower_bound >= 0.5 * o->l - 1e-9, 0.5 * o->l);
      return out;
    }});
  }
  {
    struct Opts {
      int n = 8;
      double r = 0.9;
      std::string center;
      int samples = 201;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("absmap", "Coordinatewise absolute value on l_2^n");
    sub->add_option("--n", o->n, "Dimension n");
    sub->add_option("--r", o->r, "Ball radius");
    sub->add_option("--center", o->center, "Ball centre (default 0)");
    sub->add_option("--samples", o->samples, "Samples along the witness segment");
    add_common(sub, *c);
    cmds.push_back({sub, "counterexample absmap", c, [o](const Common&) {
      Outcome out;
      const Vector c0 = o->center.empty() ? Vector::Zero(o->n) : parse_vector_dim(o->center, o->n, "--center");
      const auto rep = absmap_witness(o->n, o->r, c0, o->samples);
      out.results["witness"] = to_json(rep);
      out.claim("lowerBound", rep.lower_bound, rep.passed, rep.theory_bound);
      return out;
    }});
  }
}

// ---------------------------------------------------------------------------
// zoo {eval|cover|jacobian|net|solve311}

void add_zoo(CLI::App& app, std::vector<Command>& cmds) {
  auto* group = app.add_subcommand("zoo", "The quotient map examples");
  group->require_subcommand(1);

  {
    struct Opts {
      MapOpts map;
      std::vector<std::string> points;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("eval", "Evaluate a map");
    add_map_options(sub, o->map);
    sub->add_option("--point", o->points, "Point (repeatable)")->required();
    add_common(sub, *c);
    cmds.push_back({sub, "zoo eval", c, [o](const Common& cm) {
      Outcome out;
      const auto spec = resolve_map(o->map, cm.seed, out);
      std::vector<Vector> pts, vals;
      for (const auto& s : o->points) {
        pts.push_back(parse_vector_dim(s, spec.in_dim(), "--point"));
        vals.push_back(zoo_eval(spec, pts.back()));
      }
      out.results["points"] = to_json(pts);
      out.results["values"] = to_json(vals);
      if (cm.format == "csv") {
        std::vector<Vector> rows;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          Vector r(pts[i].size() + vals[i].size());
          r << pts[i], vals[i];
          rows.push_back(r);
        }
        out.csv = points_csv(rows);
      }
      return out;
    }});
  }
  {
    struct Opts {
      MapOpts map;
      std::string center;
      double r = 0.0;
      std::string rho;
      std::string rho_mode = "fixed";
      int budget = 64;
      double tol = 1e-6;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("cover", "Check T B_r(x) contains B_rho(T x)");
    add_map_options(sub, o->map);
    sub->add_option("--center", o->center, "Ball centre x")->required();
    sub->add_option("--r", o->r, "Domain ball radius r")->required();
    sub->add_option("--rho", o->rho, "Target radius (rho-mode fixed)");
    sub->add_option("--rho-mode", o->rho_mode, "fixed, case1 (r/32), case2 (r^3/400), case3 (r^2/400) or bisect")
        ->check(CLI::IsMember({"fixed", "case1", "case2", "case3", "bisect"}));
    sub->add_option("--budget", o->budget, "Boundary targets per radius");
    sub->add_option("--tol", o->tol, "Residual tolerance");
    add_common(sub, *c);
    cmds.push_back({sub, "zoo cover", c, [o](const Common& cm) {
      Outcome out;
      const auto spec = resolve_map(o->map, cm.seed, out);
      const Vector x = parse_vector_dim(o->center, spec.in_dim(), "--center");
      const double r = o->r;
      double rho = 0.0;
      CoverMode mode = CoverMode::verify;
      if (o->rho_mode == "fixed") {
        if (o->rho.empty()) throw UsageError("--rho-mode fixed needs --rho");
        rho = parse_number(o->rho, "--rho");
      } else if (o->rho_mode == "case1") {
        rho = r / 32.0;
      } else if (o->rho_mode == "case2") {
        rho = r * r * r / 400.0;
      } else if (o->rho_mode == "case3") {
        rho = r * r / 400.0;
      } else {
        mode = CoverMode::bisect;
        if (!o->rho.empty()) rho = parse_number(o->rho, "--rho");
      }
      CoverOptions copt;
      copt.solver.tol = o->tol;
      const auto rep = cover_check(spec, x, r, rho, o->budget, cm.seed, mode, copt);
      out.results["cover"] = to_json(rep);
      if (mode == CoverMode::verify)
        out.claim("covered", rep.worst_residual, rep.covered, o->tol);
      else
        out.claim("coveredRadius", rep.rho, rep.covered);
      return out;
    }});
  }
  {
    struct Opts {
      MapOpts map;
      std::string point;
      double h = 1e-6;
      std::string expect = "none";
      int directions = 0;
      double t_min = 1e-9;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("jacobian", "Finite-difference Jacobian and directional derivatives");
    add_map_options(sub, o->map);
    sub->add_option("--point", o->point, "Point (default 0)");
    sub->add_option("--step", o->h, "Central difference step");
    sub->add_option("--expect", o->expect, "none, zero or nonsingular")
        ->check(CLI::IsMember({"none", "zero", "nonsingular"}));
    sub->add_option("--directions", o->directions, "Seeded unit directions for directional derivatives");
    sub->add_option("--t-min", o->t_min, "Smallest difference-quotient step");
    add_common(sub, *c);
    cmds.push_back({sub, "zoo jacobian", c, [o](const Common& cm) {
      Outcome out;
      const auto spec = resolve_map(o->map, cm.seed, out);
      const int n = spec.in_dim();
      const Vector x = o->point.empty() ? Vector::Zero(n) : parse_vector_dim(o->point, n, "--point");
      const auto jr = jacobian_check(spec, x, o->h);
      out.results["jacobian"] = to_json(jr);
      const Norm dnorm = zoo_domain_norm(spec);
      Json dirs = Json::array();
      double worst_limit = 0.0;
      bool all_converged = true;
      for (int i = 0; i < o->directions; ++i) {
        Rng rng(cm.seed, "jacobian_direction", i);
        Vector u = rng.normal_vector(n);
        u /= dnorm(u);
        const auto dr = directional_derivative(spec, x, u, o->t_min);
        worst_limit = std::max(worst_limit, max_abs(dr.limit));
        all_converged = all_converged && dr.converged;
        dirs.push_back({{"direction", to_json(u)}, {"limit", to_json(dr.limit)}, {"converged", dr.converged}});
      }
      if (o->directions > 0) out.results["directional"] = std::move(dirs);
      if (o->expect == "zero") {
        const double m = max_abs(Eigen::Map<const Vector>(jr.jacobian.data(), jr.jacobian.size()));
        out.claim("zeroJacobian", m, m == 0.0, 0.0);
        if (o->directions > 0) out.claim("zeroDirectional", worst_limit, worst_limit == 0.0 && all_converged, 0.0);
      } else if (o->expect == "nonsingular") {
        out.claim("nonsingular", jr.min_singular_value, jr.min_singular_value > 1e-8, 1e-8);
      }
      if (o->directions > 0 && o->expect != "zero") out.claim("directionalConverged", all_converged, all_converged);
      return out;
    }});
  }
  {
    struct Opts {
      int dim = 2;
      double p = 2.0;
      double sep = 0.25;
      double region = 1.0;
      std::string order = "shuffled";
      int probes = 10000;
      std::string save;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("net", "Greedy maximal separated net");
    sub->add_option("--dim", o->dim, "Dimension");
    sub->add_option("--p", o->p, "l_p exponent");
    sub->add_option("--sep", o->sep, "Separation");
    sub->add_option("--region", o->region, "Radius of the netted ball");
    sub->add_option("--order", o->order, "Grid order")->check(CLI::IsMember({"shuffled", "lattice"}));
    sub->add_option("--probes", o->probes, "Random probes for the maximality check");
    sub->add_option("--save", o->save, "Write the points as JSON");
    add_common(sub, *c);
    cmds.push_back({sub, "zoo net", c, [o](const Common& cm) {
      Outcome out;
      const NormedSpace space(o->dim, o->p);
      const auto pts = build_net(space, o->sep, o->region, cm.seed,
                                 o->order == "lattice" ? NetOrder::lattice : NetOrder::shuffled);
      double min_gap = kInf;
      for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) min_gap = std::min(min_gap, space.norm(pts[i] - pts[j]));
      Rng rng(cm.seed, "net_probes");
      double worst = 0.0;
      const Norm norm = lp_norm_fn(o->p);
      for (int i = 0; i < o->probes; ++i) {
        const Vector v = sample_ball(norm, Vector::Zero(o->dim), o->region, rng);
        double best = kInf;
        for (const auto& u : pts) best = std::min(best, norm(v - u));
        worst = std::max(worst, best);
      }
      out.results["count"] = pts.size();
      out.results["points"] = to_json(pts);
      out.results["minPairGap"] = num(min_gap);
      out.results["maxProbeDistance"] = num(worst);
      out.claim("separation", min_gap, pts.size() < 2 || min_gap >= o->sep * (1.0 - 1e-12), o->sep);
      out.claim("maximality", worst, worst < o->sep, o->sep);
      save_json(o->save, to_json(pts), out);
      if (cm.format == "csv") out.csv = points_csv(pts);
      return out;
    }});
  }
  {
    struct Opts {
      int slots = 8;
      int inner = 10;
      double p = 2.0;
      std::string x, y;
      int count = 100;
      double max_ratio = 20.0;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("solve311", "Constructive preimages for the l_p cut-off map");
    sub->add_option("--slots", o->slots, "Outer slots n");
    sub->add_option("--inner", o->inner, "Inner coordinates per slot m");
    sub->add_option("--p", o->p, "l_p exponent");
    sub->add_option("--x", o->x, "Start point (with --y; otherwise seeded instances)");
    sub->add_option("--y", o->y, "Target");
    sub->add_option("--count", o->count, "Seeded instances when --x/--y are absent");
    sub->add_option("--max-ratio", o->max_ratio, "Claimed bound on ||z - x|| / ||f(x) - y||");
    add_common(sub, *c);
    cmds.push_back({sub, "zoo solve311", c, [o](const Common& cm) {
      Outcome out;
      const auto spec = ZooMapSpec::prop311_map(o->slots, o->inner, o->p);
      std::vector<std::pair<Vector, Vector>> cases;
      if (!o->x.empty() || !o->y.empty()) {
        if (o->x.empty() || o->y.empty()) throw UsageError("--x and --y must be given together");
        cases.emplace_back(parse_vector_dim(o->x, spec.in_dim(), "--x"), parse_vector_dim(o->y, spec.out_dim(), "--y"));
      } else {
        require(o->count >= 1, "--count must be >= 1");
        Rng rng(cm.seed, "prop311_targets");
        for (int i = 0; i < o->count; ++i) cases.push_back(prop311_random_instance(spec, rng));
      }
      double worst_res = 0.0, worst_ratio = 0.0;
      Json sols = Json::array();
      for (const auto& [x, y] : cases) {
        const auto sol = prop311_solve(spec, x, y);
        worst_res = std::max(worst_res, lp_norm(zoo_eval(spec, sol.z) - y, o->p));
        worst_ratio = std::max(worst_ratio, sol.ratio);
        if (cases.size() == 1) out.results["solution"] = to_json(sol);
        sols.push_back({{"residual", num(sol.residual)}, {"ratio", num(sol.ratio)}});
      }
      out.results["instances"] = std::move(sols);
      out.claim("residual", worst_res, worst_res <= 1e-8, 1e-8);
      out.claim("ratio", worst_ratio, worst_ratio <= o->max_ratio, o->max_ratio);
      return out;
    }});
  }
}

// ---------------------------------------------------------------------------
// lift, perturb, levelset

void add_solvers(CLI::App& app, std::vector<Command>& cmds) {
  {
    struct Opts {
      MapOpts map;
      std::string x0 = "1,0";
      std::string curve = "arc";
      double length = 1.0;
      int pieces = 4000;
      std::string from, to;
      std::string curve_file;
      int m = 1000;
      double co_lip = 1.0;
      double tol_factor = 1e-6;
      std::string save;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = app.add_subcommand("lift", "Lift a curve through a co-Lipschitz map");
    add_map_options(sub, o->map);
    sub->add_option("--x0", o->x0, "Start of the lift");
    sub->add_option("--curve", o->curve, "arc, segment or file")->check(CLI::IsMember({"arc", "segment", "file"}));
    sub->add_option("--length", o->length, "arc: length");
    sub->add_option("--pieces", o->pieces, "arc: polyline pieces");
    sub->add_option("--from", o->from, "segment: start");
    sub->add_option("--to", o->to, "segment: end");
    sub->add_option("--curve-file", o->curve_file, "file: polyline JSON");
    sub->add_option("--m", o->m, "Lift steps");
    sub->add_option("--co-lip", o->co_lip, "Co-Lipschitz constant of the map");
    sub->add_option("--tol-factor", o->tol_factor, "Mesh-point residual per unit mesh");
    sub->add_option("--save", o->save, "Write the lift as polyline JSON");
    add_common(sub, *c);
    cmds.push_back({sub, "lift", c, [o](const Common& cm) {
      Outcome out;
      const auto spec = resolve_map(o->map, cm.seed, out);
      Polyline xi;
      if (o->curve == "arc") {
        xi = circle_arc(o->pieces, o->length);
      } else if (o->curve == "segment") {
        if (o->from.empty() || o->to.empty()) throw UsageError("--curve segment needs --from and --to");
        xi = segment_curve(parse_vector(o->from, "--from"), parse_vector(o->to, "--to"));
      } else {
        if (o->curve_file.empty()) throw UsageError("--curve file needs --curve-file");
        xi = polyline_from_json(read_json_file(o->curve_file));
      }
      const Vector x0 = parse_vector_dim(o->x0, spec.in_dim(), "--x0");
      LiftOptions lopt;
      lopt.co_lip = o->co_lip;
      lopt.tol_factor = o->tol_factor;
      lopt.solver.seed = cm.seed;
      const auto phi = lift_curve(spec, x0, xi, o->m, lopt);
      const double h = (xi.times.back() - xi.times.front()) / o->m;
      double worst = 0.0;
      for (std::size_t k = 0; k < phi.size(); ++k)
        worst = std::max(worst, zoo_codomain_norm(spec)(zoo_eval(spec, phi.points[k]) - xi.at(phi.times[k])));
      const double measured = phi.measured_lip(zoo_domain_norm(spec));
      out.results["lift"] = to_json(phi);
      out.claim("meshResidual", worst, worst <= o->tol_factor * h, o->tol_factor * h);
      out.claim("lipBound", phi.lip_bound, phi.lip_bound <= o->co_lip * (1.0 + 1e-3), o->co_lip * (1.0 + 1e-3));
      out.claim("measuredLip", measured, measured <= phi.lip_bound, phi.lip_bound);
      if (spec.kind == ZooKind::fold && o->curve == "arc" && x0 == from_list({1.0, 0.0})) {
        double dev = 0.0;
        for (std::size_t k = 0; k < phi.size(); ++k) {
          const double t = phi.times[k];
          dev = std::max(dev, (phi.points[k] - from_list({std::cos(t / 2), std::sin(t / 2)})).norm());
        }
        out.claim("halfSpeedLift", dev, dev <= 1e-3, 1e-3);
      }
      save_json(o->save, to_json(phi), out);
      if (cm.format == "csv") out.csv = polyline_csv(phi);
      return out;
    }});
  }
  {
    struct Opts {
      int dim = 1;
      double amp = 0.4;
      std::string x, y;
      int count = 50;
      double tol = 1e-8;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = app.add_subcommand("perturb", "Solve (I + amp sin)(x + z) = y by successive approximation");
    sub->add_option("--dim", o->dim, "Dimension");
    sub->add_option("--amp", o->amp, "Amplitude of the sine perturbation");
    sub->add_option("--x", o->x, "Base point (with --y; otherwise seeded targets)");
    sub->add_option("--y", o->y, "Target");
    sub->add_option("--count", o->count, "Seeded targets when --x/--y are absent");
    sub->add_option("--tol", o->tol, "Residual tolerance");
    add_common(sub, *c);
    cmds.push_back({sub, "perturb", c, [o](const Common& cm) {
      Outcome out;
      const MapView f = identity_view(o->dim);
      const MapView g = sine_view(o->dim, o->amp);
      std::vector<std::pair<Vector, Vector>> cases;
      if (!o->x.empty() || !o->y.empty()) {
        if (o->x.empty() || o->y.empty()) throw UsageError("--x and --y must be given together");
        cases.emplace_back(parse_vector_dim(o->x, o->dim, "--x"), parse_vector_dim(o->y, o->dim, "--y"));
      } else {
        require(o->count >= 1, "--count must be >= 1");
        Rng rng(cm.seed, "perturb_targets");
        for (int i = 0; i < o->count; ++i) {
          Vector x(o->dim), y(o->dim);
          for (int k = 0; k < o->dim; ++k) x[k] = rng.uniform(-2.0, 2.0);
          for (int k = 0; k < o->dim; ++k) y[k] = rng.uniform(-3.0, 3.0);
          cases.emplace_back(x, y);
        }
      }
      PerturbOptions popt;
      popt.tol = o->tol;
      popt.solver.seed = cm.seed;
      double worst_res = 0.0, worst_norm = 0.0, worst_decay = 0.0;
      Json runs = Json::array();
      for (const auto& [x, y] : cases) {
        const auto rep = perturb_solve(f, 1.0, g, x, y, popt);
        worst_res = std::max(worst_res, rep.residual);
        if (rep.bound > 0.0) worst_norm = std::max(worst_norm, f.domain_norm(rep.z) / rep.bound);
        for (std::size_t s = 1; s < rep.stages.size(); ++s)
          if (rep.stages[s - 1].radius > 0.0)
            worst_decay = std::max(worst_decay, rep.stages[s].radius / rep.stages[s - 1].radius);
        runs.push_back(to_json(rep));
      }
      const double delta = std::abs(o->amp);
      out.results["runs"] = std::move(runs);
      out.claim("residual", worst_res, worst_res <= o->tol, o->tol);
      out.claim("normBoundRatio", worst_norm, worst_norm <= 1.0 + 1e-6, 1.0);
      out.claim("stageDecay", worst_decay, worst_decay <= delta + 1e-9, delta);
      return out;
    }});
  }
  {
    struct Opts {
      MapOpts map;
      std::string target;
      std::string box;
      double mesh = 0.01;
      double tol = 1e-10;
      int expect_count = -1;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = app.add_subcommand("levelset", "All preimages of a point inside a box");
    add_map_options(sub, o->map);
    sub->add_option("--target", o->target, "Target y")->required();
    sub->add_option("--box", o->box, "lo,hi for every coordinate, or lo1,hi1,lo2,hi2,...")->required();
    sub->add_option("--mesh", o->mesh, "Grid mesh");
    sub->add_option("--tol", o->tol, "Residual tolerance of the refined points");
    sub->add_option("--expect-count", o->expect_count, "Expected number of points (-1: no check)");
    add_common(sub, *c);
    cmds.push_back({sub, "levelset", c, [o](const Common& cm) {
      Outcome out;
      const auto spec = resolve_map(o->map, cm.seed, out);
      const Vector y = parse_vector_dim(o->target, spec.out_dim(), "--target");
      const auto [lo, hi] = parse_box(o->box, spec.in_dim());
      LevelSetOptions lopt;
      lopt.solver.seed = cm.seed;
      const auto rep = level_set(spec, y, lo, hi, o->mesh, o->tol, lopt);
      out.results["levelSet"] = to_json(rep);
      out.results["count"] = rep.points.size();
      double worst = 0.0;
      for (double r : rep.residuals) worst = std::max(worst, r);
      out.claim("residual", worst, worst <= o->tol, o->tol);
      if (o->expect_count >= 0)
        out.claim("count", static_cast<double>(rep.points.size()),
                  static_cast<int>(rep.points.size()) == o->expect_count, o->expect_count);
      if (cm.format == "csv") out.csv = points_csv(rep.points, "residual", rep.residuals);
      return out;
    }});
  }
}

// ---------------------------------------------------------------------------
// martingale {validate|tocurve|fromcurve|obstruct}

struct TreeSource {
  std::string tree;
  std::string example;
};

void add_tree_source(CLI::App* sub, TreeSource& t) {
  sub->add_option("--tree", t.tree, "Martingale tree JSON");
  sub->add_option("--example", t.example, "Built-in tree")->check(CLI::IsMember({"rademacher"}));
}

PartitionMartingale load_tree(const TreeSource& t) {
  if (!t.tree.empty() && !t.example.empty()) throw UsageError("give --tree or --example, not both");
  if (!t.tree.empty()) return martingale_from_json(read_json_file(t.tree));
  if (t.example == "rademacher") return rademacher_martingale();
  throw UsageError("a tree is required: --tree FILE or --example rademacher");
}

void add_martingale(CLI::App& app, std::vector<Command>& cmds) {
  auto* group = app.add_subcommand("martingale", "Generalized dyadic martingales and Lipschitz curves");
  group->require_subcommand(1);
  {
    struct Opts {
      TreeSource src;
      double delta = 0.0;
      double p = 2.0;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("validate", "Check the martingale identity, boundedness and separation");
    add_tree_source(sub, o->src);
    sub->add_option("--delta", o->delta, "Separation to check")->required();
    sub->add_option("--p", o->p, "l_p exponent of the values");
    add_common(sub, *c);
    cmds.push_back({sub, "martingale validate", c, [o](const Common&) {
      Outcome out;
      const auto rep = validate_martingale(load_tree(o->src), o->delta, o->p);
      out.results["validation"] = to_json(rep);
      out.claim("martingaleIdentity", rep.max_identity_error, rep.is_martingale, 1e-12);
      out.claim("bounded", rep.bound, rep.is_bounded);
      out.claim("separated", rep.min_separation, rep.is_separated, o->delta);
      return out;
    }});
  }
  {
    struct Opts {
      TreeSource src;
      double p = 2.0;
      std::string save;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("tocurve", "Integrate a martingale into a Lipschitz curve");
    add_tree_source(sub, o->src);
    sub->add_option("--p", o->p, "l_p exponent of the values");
    sub->add_option("--save", o->save, "Write the curve as polyline JSON");
    add_common(sub, *c);
    cmds.push_back({sub, "martingale tocurve", c, [o](const Common& cm) {
      Outcome out;
      const auto res = to_curve(load_tree(o->src), o->p);
      out.results["curve"] = to_json(res.curve);
      out.claim("stabilized", res.stabilization_error, res.stabilized, 1e-12);
      save_json(o->save, to_json(res.curve), out);
      if (cm.format == "csv") out.csv = polyline_csv(res.curve);
      return out;
    }});
  }
  {
    struct Opts {
      std::string curve_file;
      std::string example;
      int n = 8;
      double delta = 0.4;
      int max_depth = 8;
      int b_grid = 256;
      double p = 2.0;
      std::string save;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("fromcurve", "Split a 1-Lipschitz curve into a separated martingale");
    sub->add_option("--curve-file", o->curve_file, "Polyline JSON on [0,1]");
    sub->add_option("--example", o->example, "Built-in curve")->check(CLI::IsMember({"staircase", "tent"}));
    sub->add_option("--n", o->n, "staircase: steps");
    sub->add_option("--delta", o->delta, "Deviation threshold delta");
    sub->add_option("--max-depth", o->max_depth, "Maximum tree depth");
    sub->add_option("--b-grid", o->b_grid, "Grid intervals for the split point");
    sub->add_option("--p", o->p, "l_p exponent");
    sub->add_option("--save", o->save, "Write the tree as JSON");
    add_common(sub, *c);
    cmds.push_back({sub, "martingale fromcurve", c, [o](const Common&) {
      Outcome out;
      Polyline f;
      if (!o->curve_file.empty() && !o->example.empty()) throw UsageError("give --curve-file or --example, not both");
      if (!o->curve_file.empty()) f = polyline_from_json(read_json_file(o->curve_file));
      else if (o->example == "staircase") f = staircase_polyline(o->n);
      else if (o->example == "tent") f = to_curve(rademacher_martingale()).curve;
      else throw UsageError("a curve is required: --curve-file FILE or --example staircase|tent");
      FromCurveOptions fopt;
      fopt.max_depth = o->max_depth;
      fopt.b_grid = o->b_grid;
      fopt.p = o->p;
      const auto res = from_curve(f, o->delta, fopt);
      out.results["tree"] = to_json(res.martingale);
      out.results["nodes"] = res.martingale.nodes().size();
      out.results["noDeviation"] = res.no_deviation;
      out.claim("edgeSeparation", res.min_edge_separation, res.certified, o->delta);
      out.claim("widthRatio", res.max_width_ratio, res.max_width_ratio <= 2.0 / o->delta + 1e-9, 2.0 / o->delta);
      save_json(o->save, to_json(res.martingale), out);
      return out;
    }});
  }
  {
    struct Opts {
      TreeSource src;
      double x0 = 0.25;
      double eta = 1.0;
      std::string delta;
      double p = 2.0;
    };
    auto o = std::make_shared<Opts>();
    auto c = std::make_shared<Common>();
    auto* sub = group->add_subcommand("obstruct", "Lower bound on eps for eps-Frechet behaviour at x0");
    add_tree_source(sub, o->src);
    sub->add_option("--x0", o->x0, "Point in [0,1)");
    sub->add_option("--eta", o->eta, "Largest outer atom width");
    sub->add_option("--delta", o->delta, "Separation delta; claims the bound delta/4");
    sub->add_option("--p", o->p, "l_p exponent of the values");
    add_common(sub, *c);
    cmds.push_back({sub, "martingale obstruct", c, [o](const Common&) {
      Outcome out;
      const auto rep = frechet_obstruction(load_tree(o->src), o->x0, o->eta, o->p);
      out.results["obstruction"] = to_json(rep);
      if (!o->delta.empty()) {
        const double d = parse_number(o->delta, "--delta");
        out.claim("epsLowerBound", rep.eps_lower_bound, rep.eps_lower_bound >= d / 4.0, d / 4.0);
      }
      return out;
    }});
  }
}

// ---------------------------------------------------------------------------

Json claim_json(const Claim& c) {
  Json j = {{"name", c.name}, {"measured", num(c.measured)}, {"passed", c.passed}};
  if (c.theory) j["theoryBound"] = num(*c.theory);
  return j;
}

Json config_json(const Command& cmd) {
  Json params = Json::object();
  for (const CLI::Option* opt : cmd.app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "seed" || name == "out" || name == "format") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ";") + r;
    } else {
      value = opt->get_default_str();
    }
    params[name] = value;
  }
  return {{"command", cmd.name},
          {"params", std::move(params)},
          {"seed", cmd.common->seed},
          {"outPath", cmd.common->out},
          {"format", cmd.common->format}};
}

void emit(const Command& cmd, const std::string& text, std::ostream& out) {
  if (cmd.common->out.empty())
    out << text;
  else
    write_text_file(cmd.common->out, text);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lipquot: experiments on Lipschitz quotient maps", "lipquot"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML file with option values ([subcommand] sections)");
  app.allow_config_extras(false);

  std::vector<Command> cmds;
  add_uaap(app, cmds);
  add_affine_fit(app, cmds);
  add_counterexamples(app, cmds);
  add_zoo(app, cmds);
  add_solvers(app, cmds);
  add_martingale(app, cmds);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  const Command* cmd = nullptr;
  for (const auto& c : cmds)
    if (c.app->parsed()) cmd = &c;
  if (cmd == nullptr) {
    err << "error: a subcommand is required\n" << app.help();
    return 2;
  }

  Json report = {{"config", config_json(*cmd)}, {"version", kVersion}};
  int code = 0;
  Outcome outcome;
  try {
    outcome = cmd->body(*cmd->common);
    for (const auto& c : outcome.claims)
      if (!c.passed) code = 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    report["error"] = {{"kind", "numerical"}, {"message", e.what()}};
    code = 3;
  } catch (const VerificationFailure& e) {
    err << "verification failure: " << e.what() << "\n";
    report["error"] = {{"kind", "verification"}, {"message", e.what()}};
    code = 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }

  Json claims = Json::array();
  for (const auto& c : outcome.claims) claims.push_back(claim_json(c));
  report["claims"] = std::move(claims);
  report["artifacts"] = outcome.artifacts;
  report["results"] = std::move(outcome.results);
  report["passed"] = code == 0;

  try {
    if (cmd->common->format == "csv") {
      if (!outcome.csv) {
        if (code == 3) {
          emit(*cmd, report.dump(2) + "\n", out);
          return code;
        }
        err << "usage error: --format csv is not available for '" << cmd->name << "'\n";
        return 2;
      }
      emit(*cmd, *outcome.csv, out);
    } else {
      emit(*cmd, report.dump(2) + "\n", out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }
  return code;
}

}  // namespace lipquot::cli
