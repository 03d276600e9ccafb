// iselab: one binary exposing every module as a subcommand with diffable
// CSV/JSON outputs and a run manifest next to every output file.
//
// Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 numerical
// failure (including hard verify-suite failures), 4 resource limit.

#include <chrono>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "iselab/brw.hpp"
#include "iselab/csvio.hpp"
#include "iselab/errors.hpp"
#include "iselab/genfun.hpp"
#include "iselab/ise.hpp"
#include "iselab/lattice.hpp"
#include "iselab/perc.hpp"
#include "iselab/rational.hpp"
#include "iselab/shapes.hpp"
#include "iselab/verify.hpp"
#include "json.hpp"

namespace {

using namespace iselab;

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    double v = std::stod(item, &used);
    while (used < item.size() && std::isspace((unsigned char)item[used])) ++used;
    if (used != item.size())
      throw std::invalid_argument("bad number in list: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty number list: " + text);
  return out;
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_doubles(text)) {
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw std::invalid_argument("expected integers: " + text);
    out.push_back(i);
  }
  return out;
}

LatticeModel::Flavor parse_flavor(const std::string& text) {
  if (text == "nn") return LatticeModel::Flavor::nearest_neighbour;
  if (text == "spread") return LatticeModel::Flavor::spread_out;
  throw std::invalid_argument("flavor must be nn or spread: " + text);
}

Shape select_shape(int m, int sigma) {
  auto shapes = enumerate_shapes(m);
  if (sigma < 0 || sigma >= static_cast<int>(shapes.size()))
    throw std::invalid_argument("sigma out of range for m=" + std::to_string(m));
  return shapes[static_cast<size_t>(sigma)];
}

// Collects manifest data while a subcommand runs, then writes the primary
// output plus its manifest (or stdout when no --out was given). Relative
// --out paths resolve against ISELAB_OUT_DIR when that variable is set.
struct Emitter {
  std::string subcommand;
  std::string out_path;
  RunManifest manifest;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  explicit Emitter(std::string sub, std::string out)
      : subcommand(std::move(sub)), out_path(std::move(out)) {
    manifest.subcommand = subcommand;
  }
  void flag(const std::string& name, const std::string& value) {
    manifest.flags.emplace_back(name, value);
  }
  void flag(const std::string& name, long value) {
    flag(name, std::to_string(value));
  }
  void flag(const std::string& name, int value) {
    flag(name, std::to_string(value));
  }
  void flag(const std::string& name, double value) {
    flag(name, format_double(value));
  }
  void seed(std::uint64_t s) { manifest.seeds.push_back(s); }

  std::string resolved_path() const {
    if (out_path.empty()) return {};
    const char* dir = std::getenv("ISELAB_OUT_DIR");
    if (dir != nullptr && *dir != '\0' && out_path.front() != '/')
      return std::string(dir) + "/" + out_path;
    return out_path;
  }
  void emit(const std::string& content) {
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const std::string path = resolved_path();
    if (path.empty()) {
      std::fwrite(content.data(), 1, content.size(), stdout);
      return;
    }
    write_output(path, content, manifest);
  }
};

// ---------------------------------------------------------------- shapes --

struct ShapesOpts {
  int m = 4;
  std::string out;
};

void run_shapes(const ShapesOpts& o) {
  Emitter em("shapes", o.out);
  em.flag("m", o.m);
  auto shapes = enumerate_shapes(o.m);
  nlohmann::json doc;
  doc["m"] = o.m;
  doc["count"] = shapes.size();
  doc["shapes"] = nlohmann::json::array();
  for (const auto& s : shapes) doc["shapes"].push_back(s.to_json());
  em.emit(doc.dump(2) + "\n");
}

// ------------------------------------------------------------------- ise --

struct IseOpts {
  int m = 2;
  int d = 1;
  int sigma = 0;
  bool mass = false;
  std::vector<std::string> k_rows;
  std::vector<std::string> x_rows;
  std::string out;
};

void run_ise(const IseOpts& o) {
  Emitter em("ise", o.out);
  em.flag("m", o.m);
  em.flag("d", o.d);
  em.flag("sigma", o.sigma);
  const Shape shape = select_shape(o.m, o.sigma);
  const int edges = shape.edge_count();
  const int marks = o.m - 1;
  const int modes = (o.mass ? 1 : 0) + (o.k_rows.empty() ? 0 : 1) +
                    (o.x_rows.empty() ? 0 : 1);
  if (modes != 1)
    throw std::invalid_argument("pick exactly one of --mass, --k, --x");

  std::vector<std::string> cols = {"m", "sigma_index"};
  if (!o.k_rows.empty())
    for (int i = 1; i <= marks * o.d; ++i) cols.push_back("k" + std::to_string(i));
  if (!o.x_rows.empty())
    for (int i = 1; i <= edges * o.d; ++i) cols.push_back("x" + std::to_string(i));
  cols.push_back("value");
  cols.push_back("error_estimate");
  CsvTable table(cols);

  const auto base = [&] {
    return std::vector<std::string>{std::to_string(o.m), std::to_string(o.sigma)};
  };
  if (o.mass) {
    em.flag("mass", "1");
    auto r = am_spatial_mass(shape, o.d);
    auto row = base();
    row.push_back(format_double(r.value));
    row.push_back(format_double(r.error_estimate));
    table.add_row(row);
  }
  for (const auto& text : o.k_rows) {
    em.flag("k", text);
    auto vals = parse_doubles(text);
    if (static_cast<int>(vals.size()) != marks * o.d)
      throw std::invalid_argument("--k needs (m-1)*d values, got " +
                                  std::to_string(vals.size()));
    VecList ktilde(marks, Vec(o.d));
    for (int i = 0; i < marks; ++i)
      for (int j = 0; j < o.d; ++j) ktilde[i][j] = vals[i * o.d + j];
    auto r = Am_hat(shape, routed_frequencies(shape, ktilde));
    auto row = base();
    for (double v : vals) row.push_back(format_double(v));
    row.push_back(format_double(r.value));
    row.push_back(format_double(r.error_estimate));
    table.add_row(row);
  }
  for (const auto& text : o.x_rows) {
    em.flag("x", text);
    auto vals = parse_doubles(text);
    if (static_cast<int>(vals.size()) != edges * o.d)
      throw std::invalid_argument("--x needs (2m-3)*d values, got " +
                                  std::to_string(vals.size()));
    VecList y(edges, Vec(o.d));
    for (int i = 0; i < edges; ++i)
      for (int j = 0; j < o.d; ++j) y[i][j] = vals[i * o.d + j];
    auto r = Am(shape, y, o.d);
    auto row = base();
    for (double v : vals) row.push_back(format_double(v));
    row.push_back(format_double(r.value));
    row.push_back(format_double(r.error_estimate));
    table.add_row(row);
  }
  em.emit(table.to_string());
}

// ---------------------------------------------------------------- genfun --

struct GenfunOpts {
  int m = 2;
  int sigma = 0;
  long n_max = 100;
  std::string k2 = "0";
  double t = 1.0;
  std::string emit = "coeffs";
  std::string out;
};

std::vector<long> doubling_list(long n_max) {
  std::vector<long> out;
  for (long v = std::max<long>(1, n_max / 16); v < n_max; v *= 2)
    out.push_back(v);
  out.push_back(n_max);
  return out;
}

void run_genfun(const GenfunOpts& o) {
  Emitter em("genfun", o.out);
  em.flag("m", o.m);
  em.flag("sigma", o.sigma);
  em.flag("n-max", o.n_max);
  em.flag("k2", o.k2);
  em.flag("emit", o.emit);
  const Shape shape = select_shape(o.m, o.sigma);
  const int edges = shape.edge_count();
  const Rational k2 = parse_rational(o.k2);
  if (k2 < 0) throw std::invalid_argument("--k2 must be nonnegative");

  if (o.emit == "coeffs") {
    std::vector<Rational> k2_edges(edges, k2);
    auto series = product_marginal_series(k2_edges, static_cast<int>(o.n_max));
    nlohmann::json doc;
    doc["m"] = o.m;
    doc["sigma_index"] = o.sigma;
    doc["k2"] = format_rational(k2);
    doc["n_max"] = o.n_max;
    doc["coefficients"] = nlohmann::json::array();
    for (long n = 0; n < static_cast<long>(series.size()); ++n) {
      nlohmann::json c;
      c["n"] = n;
      c["rational_part"] = format_rational(series[n].rational_part());
      c["sqrt2_part"] = format_rational(series[n].sqrt2_part());
      c["value"] = series[n].to_double();
      doc["coefficients"].push_back(c);
    }
    em.emit(doc.dump(2) + "\n");
    return;
  }

  std::vector<RatioRow> rows;
  if (o.emit == "mass-ratio") {
    std::vector<double> k2_edges(edges, k2.get_d());
    rows = mass_growth_table(shape, k2_edges, doubling_list(o.n_max));
  } else if (o.emit == "joint-ratio") {
    if (o.m != 2)
      throw std::invalid_argument("--emit joint-ratio supports m=2 only");
    em.flag("t", o.t);
    rows = joint_growth_table(shape, {k2.get_d()}, {o.t}, doubling_list(o.n_max));
  } else {
    throw std::invalid_argument("--emit must be coeffs, mass-ratio or joint-ratio");
  }
  CsvTable table({"n", "ratio", "abs_err"});
  for (const auto& r : rows)
    table.add_row({std::to_string(r.n), format_double(r.ratio),
                   format_double(std::abs(r.ratio - 1.0))});
  em.emit(table.to_string());
}

// ----------------------------------------------------------------- trees --

struct TreesOpts {
  int d = 2;
  std::string flavor = "nn";
  int L = 1;
  long n = 0;
  int m = 2;
  int l = 1;
  std::string op = "count";
  std::string tree_file;
  int threads = 1;
  std::string out;
};

void run_trees(const TreesOpts& o) {
  Emitter em("trees", o.out);
  em.flag("d", o.d);
  em.flag("flavor", o.flavor);
  em.flag("L", o.L);
  em.flag("n", o.n);
  em.flag("op", o.op);
  LatticeModel model{o.d, parse_flavor(o.flavor), o.L};
  EnumerationBudget budget;
  budget.threads = o.threads;

  if (o.op == "count") {
    CsvTable table({"n", "count"});
    table.add_row({std::to_string(o.n),
                   std::to_string(one_point(model, static_cast<int>(o.n), budget))});
    em.emit(table.to_string());
    return;
  }
  if (o.op == "joint" || o.op == "spatial") {
    em.flag("m", o.m);
    const Shape probe = select_shape(o.m, 0);
    const int edges = probe.edge_count();
    auto counts = count_tm(model, static_cast<int>(o.n), o.m, budget);
    std::vector<std::string> cols = {"sigma_index"};
    for (int i = 1; i <= edges * o.d; ++i) cols.push_back("y" + std::to_string(i));
    if (o.op == "joint")
      for (int i = 1; i <= edges; ++i) cols.push_back("s" + std::to_string(i));
    cols.push_back("count");
    CsvTable table(cols);
    const auto& source = o.op == "joint" ? counts.joint : counts.spatial;
    for (const auto& [key, count] : source) {
      std::vector<std::string> row;
      row.reserve(key.size() + 1);
      for (long v : key) row.push_back(std::to_string(v));
      row.push_back(std::to_string(count));
      table.add_row(row);
    }
    em.emit(table.to_string());
    return;
  }
  if (o.op == "sue") {
    em.flag("l", o.l);
    auto tables = s_u_e_decompose(model, static_cast<int>(o.n), o.l, budget);
    std::vector<std::string> cols;
    for (int i = 1; i <= o.l * o.d; ++i) cols.push_back("x" + std::to_string(i));
    cols.push_back("s");
    cols.push_back("u");
    cols.push_back("e");
    CsvTable table(cols);
    for (const auto& [key, sue] : tables.sorted()) {
      std::vector<std::string> row;
      for (long v : key) row.push_back(std::to_string(v));
      for (long v : sue) row.push_back(std::to_string(v));
      table.add_row(row);
    }
    em.emit(table.to_string());
    return;
  }
  if (o.op == "overcount") {
    em.flag("l", o.l);
    auto r = verify_overcount_bound(model, static_cast<int>(o.n), o.l, budget);
    CsvTable table({"n", "l", "shat0", "sum_sigma_that0", "uhat0", "ehat0",
                    "bound_factor", "lhs", "rhs", "slack", "holds"});
    table.add_row({std::to_string(r.n), std::to_string(r.l),
                   std::to_string(r.shat0), std::to_string(r.sum_sigma_that0),
                   std::to_string(r.uhat0), std::to_string(r.ehat0),
                   std::to_string(r.bound_factor), std::to_string(r.lhs),
                   std::to_string(r.rhs), std::to_string(r.slack),
                   r.holds ? "1" : "0"});
    em.emit(table.to_string());
    return;
  }
  if (o.op == "zc") {
    auto est = estimate_zc(model, static_cast<int>(o.n), budget);
    CsvTable table({"n", "ratio", "estimate", "band"});
    for (size_t i = 0; i < est.ratios.size(); ++i)
      table.add_row({std::to_string(i + 1), format_double(est.ratios[i]),
                     format_double(est.value), format_double(est.band)});
    em.emit(table.to_string());
    return;
  }
  if (o.op == "backbone") {
    if (o.tree_file.empty())
      throw std::invalid_argument("--op backbone needs --tree FILE");
    em.flag("tree", o.tree_file);
    std::ifstream in(o.tree_file, std::ios::binary);
    if (!in.good())
      throw std::invalid_argument("cannot read tree file: " + o.tree_file);
    std::stringstream buf;
    buf << in.rdbuf();
    auto marked = marked_tree_from_json(buf.str());
    auto record = backbone(marked.tree, marked.marks);
    const int l = static_cast<int>(marked.marks.size());
    const int edges = 2 * l - 1;
    const int dd = static_cast<int>(marked.tree.sites.at(0).size());
    std::vector<std::string> cols = {"sigma_index"};
    for (int i = 1; i <= edges * dd; ++i) cols.push_back("y" + std::to_string(i));
    for (int i = 1; i <= edges; ++i) cols.push_back("s" + std::to_string(i));
    CsvTable table(cols);
    for (const auto& real : record.compatible) {
      std::vector<std::string> row = {std::to_string(real.shape_index)};
      for (const auto& site : real.displacements)
        for (int v : site) row.push_back(std::to_string(v));
      for (long v : real.path_lengths) row.push_back(std::to_string(v));
      table.add_row(row);
    }
    em.emit(table.to_string());
    return;
  }
  throw std::invalid_argument("unknown --op: " + o.op);
}

// ------------------------------------------------------------------- brw --

struct BrwOpts {
  int d = 2;
  long n = 1;
  long samples = 1000;
  std::uint64_t seed = 0;
  std::string k_grid = "0.5,1,2";
  double scale = 1.0;
  bool fit = false;
  double fit_ref = 1.0;
  int threads = 1;
  std::string out;
};

Vec axis_vec(double k, int d) {
  Vec v(d, 0.0);
  v[0] = k;
  return v;
}

std::string char_ci(const CharEstimate& e) {
  return format_double(1.96 * std::max(e.se_re, e.se_im));
}

void run_brw(const BrwOpts& o) {
  Emitter em("brw", o.out);
  em.flag("d", o.d);
  em.flag("n", o.n);
  em.flag("samples", o.samples);
  em.flag("k-grid", o.k_grid);
  em.flag("scale", o.scale);
  em.seed(o.seed);
  BrwConfig config;
  config.d = o.d;
  config.n = o.n;
  config.seed = o.seed;
  config.samples = o.samples;
  config.scale = o.scale;
  config.threads = o.threads;
  config.validate();
  auto measures = sample_measures(config);

  double k_factor = 1.0;
  if (o.fit) {
    em.flag("fit-ref", o.fit_ref);
    auto target = moment_characteristic(1, {axis_vec(o.fit_ref, o.d)});
    auto fitted = fit_scale(measures, o.fit_ref, target.value);
    k_factor = fitted.scale;
    std::fprintf(stderr, "fitted scale %s at reference k %s\n",
                 format_double(fitted.scale).c_str(),
                 format_double(o.fit_ref).c_str());
  }

  std::vector<std::string> cols;
  for (int i = 1; i <= o.d; ++i) cols.push_back("k" + std::to_string(i));
  cols.insert(cols.end(), {"re", "im", "ci"});
  CsvTable table(cols);
  for (double k : parse_doubles(o.k_grid)) {
    auto est = empirical_char(measures, {axis_vec(k * k_factor, o.d)});
    Vec shown = axis_vec(k, o.d);
    std::vector<std::string> row;
    for (double v : shown) row.push_back(format_double(v));
    row.push_back(format_double(est.value.real()));
    row.push_back(format_double(est.value.imag()));
    row.push_back(char_ci(est));
    table.add_row(row);
  }
  em.emit(table.to_string());
}

// ------------------------------------------------------------------ perc --

struct PercOpts {
  int d = 2;
  std::string flavor = "nn";
  int L = 1;
  std::string p = "1/2";
  long n = 1;
  long samples = 1000;
  std::uint64_t seed = 0;
  std::string op = "tau2";
  std::string x;
  std::string y;
  std::string k_grid = "0.5,1,2";
  double scale = 1.0;
  long max_sites = 1'000'000;
  long max_attempts = 100'000'000;
  std::string out;
};

void run_perc(const PercOpts& o) {
  Emitter em("perc", o.out);
  em.flag("d", o.d);
  em.flag("flavor", o.flavor);
  em.flag("L", o.L);
  em.flag("p", o.p);
  em.flag("n", o.n);
  em.flag("op", o.op);
  PercModel model{{o.d, parse_flavor(o.flavor), o.L}, parse_rational(o.p)};
  model.validate();

  const auto site_cols = [&](const std::string& prefix) {
    std::vector<std::string> cols;
    for (int i = 1; i <= o.d; ++i) cols.push_back(prefix + std::to_string(i));
    return cols;
  };

  if (o.op == "tau2") {
    auto cols = site_cols("x");
    cols.insert(cols.end(), {"n", "probability"});
    CsvTable table(cols);
    for (const auto& [site, prob] : exact_tau2_table(model, static_cast<int>(o.n))) {
      std::vector<std::string> row;
      for (int v : site) row.push_back(std::to_string(v));
      row.push_back(std::to_string(o.n));
      row.push_back(format_rational(prob));
      table.add_row(row);
    }
    em.emit(table.to_string());
    return;
  }
  if (o.op == "tau3") {
    if (o.x.empty() || o.y.empty())
      throw std::invalid_argument("--op tau3 needs --x and --y sites");
    em.flag("x", o.x);
    em.flag("y", o.y);
    Site x = parse_ints(o.x);
    Site y = parse_ints(o.y);
    if (static_cast<int>(x.size()) != o.d || static_cast<int>(y.size()) != o.d)
      throw std::invalid_argument("--x and --y need d coordinates");
    auto cols = site_cols("x");
    auto ycols = site_cols("y");
    cols.insert(cols.end(), ycols.begin(), ycols.end());
    cols.insert(cols.end(), {"n", "probability"});
    CsvTable table(cols);
    std::vector<std::string> row;
    for (int v : x) row.push_back(std::to_string(v));
    for (int v : y) row.push_back(std::to_string(v));
    row.push_back(std::to_string(o.n));
    row.push_back(format_rational(exact_tau3(model, x, y, static_cast<int>(o.n))));
    table.add_row(row);
    em.emit(table.to_string());
    return;
  }
  if (o.op == "sizes") {
    CsvTable table({"n", "probability"});
    for (long nn = 1; nn <= o.n; ++nn)
      table.add_row({std::to_string(nn),
                     format_rational(exact_cluster_size_prob(model, static_cast<int>(nn)))});
    em.emit(table.to_string());
    return;
  }
  if (o.op == "gw") {
    auto law = gw_cluster_law(o.n);
    CsvTable table({"n", "probability"});
    for (long nn = 1; nn <= o.n; ++nn)
      table.add_row({std::to_string(nn), format_rational(law[static_cast<size_t>(nn)])});
    em.emit(table.to_string());
    return;
  }

  McConfig mc;
  mc.n_target = o.n;
  mc.samples = o.samples;
  mc.seed = o.seed;
  mc.max_sites = o.max_sites;
  mc.max_attempts = o.max_attempts;
  em.flag("samples", o.samples);
  em.seed(o.seed);

  if (o.op == "mc") {
    auto clusters = mc_clusters(model, mc);
    std::map<Site, long> hits;
    for (const auto& c : clusters)
      for (const auto& site : c.sites) hits[site] += 1;
    auto cols = site_cols("x");
    cols.insert(cols.end(), {"n", "probability"});
    CsvTable table(cols);
    for (const auto& [site, count] : hits) {
      std::vector<std::string> row;
      for (int v : site) row.push_back(std::to_string(v));
      row.push_back(std::to_string(o.n));
      row.push_back(format_double(static_cast<double>(count) /
                                  static_cast<double>(clusters.size())));
      table.add_row(row);
    }
    em.emit(table.to_string());
    return;
  }
  if (o.op == "char") {
    if (o.n <= 0)
      throw std::invalid_argument("--op char needs a conditioned size --n >= 1");
    em.flag("k-grid", o.k_grid);
    em.flag("scale", o.scale);
    auto clusters = mc_clusters(model, mc);
    std::vector<std::string> cols;
    for (int i = 1; i <= o.d; ++i) cols.push_back("k" + std::to_string(i));
    cols.insert(cols.end(), {"re", "im", "ci"});
    CsvTable table(cols);
    for (double k : parse_doubles(o.k_grid)) {
      auto est = nu_moment_char(clusters, {axis_vec(k, o.d)}, o.scale);
      std::vector<std::string> row;
      for (double v : axis_vec(k, o.d)) row.push_back(format_double(v));
      row.push_back(format_double(est.value.real()));
      row.push_back(format_double(est.value.imag()));
      row.push_back(char_ci(est));
      table.add_row(row);
    }
    em.emit(table.to_string());
    return;
  }
  throw std::invalid_argument("unknown --op: " + o.op);
}

// ---------------------------------------------------------------- verify --

struct VerifyOpts {
  std::string suite = "all";
  int m = 2;
  long n = 0;
  long samples = 0;
  std::uint64_t seed = 20260815;
  int threads = 1;
  std::string out_dir;
};

int run_verify(const VerifyOpts& o) {
  SuiteOptions options;
  options.m = o.m;
  options.n = o.n;
  options.samples = o.samples;
  options.seed = o.seed;
  options.threads = o.threads;

  std::vector<std::string> selected;
  if (o.suite == "all")
    selected = suite_names();
  else
    selected.push_back(o.suite);

  bool all_passed = true;
  for (const auto& name : selected) {
    std::optional<Emitter> em;
    if (!o.out_dir.empty()) {
      em.emplace("verify", o.out_dir + "/" + name + ".csv");
      em->flag("suite", name);
      em->flag("m", o.m);
      em->flag("n", o.n);
      em->flag("samples", o.samples);
      em->flag("threads", o.threads);
      em->seed(o.seed);
    }
    auto result = run_suite(name, options);
    std::printf("== suite %s%s ==\n", result.name.c_str(),
                result.report_only ? " (report only)" : "");
    for (const auto& check : result.checks)
      std::printf("[%s] %s: %s\n", check.passed ? "PASS" : "FAIL",
                  check.label.c_str(), check.detail.c_str());
    if (result.report_only) std::fputs(result.csv.c_str(), stdout);
    std::printf("suite %s: %s\n", result.name.c_str(),
                result.passed() ? "PASS" : "FAIL");
    all_passed = all_passed && result.passed();
    if (em) em->emit(result.csv);
  }
  std::printf("verify: %s\n", all_passed ? "PASS" : "FAIL");
  return all_passed ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iselab: exact and Monte Carlo checks of tree, cluster and "
               "measure scaling laws"};
  app.require_subcommand(1);
  int rc = 0;

  ShapesOpts shapes_opts;
  auto* shapes_cmd =
      app.add_subcommand("shapes", "enumerate shapes on m external vertices");
  shapes_cmd->add_option("--m", shapes_opts.m, "external vertex count")
      ->required();
  shapes_cmd->add_option("--out", shapes_opts.out, "output file (JSON)");
  shapes_cmd->callback([&] { run_shapes(shapes_opts); });

  IseOpts ise_opts;
  auto* ise_cmd = app.add_subcommand(
      "ise", "random-measure densities and characteristics by quadrature");
  ise_cmd->add_option("--m", ise_opts.m, "external vertex count");
  ise_cmd->add_option("--d", ise_opts.d, "space dimension");
  ise_cmd->add_option("--sigma", ise_opts.sigma, "shape index");
  ise_cmd->add_flag("--mass", ise_opts.mass, "spatial mass of the density");
  ise_cmd->add_option("--k", ise_opts.k_rows,
                      "(m-1)*d comma-separated mark frequencies, repeatable");
  ise_cmd->add_option("--x", ise_opts.x_rows,
                      "(2m-3)*d comma-separated edge displacements, repeatable");
  ise_cmd->add_option("--out", ise_opts.out, "output file (CSV)");
  ise_cmd->callback([&] { run_ise(ise_opts); });

  GenfunOpts genfun_opts;
  auto* genfun_cmd = app.add_subcommand(
      "genfun", "edge generating-function coefficients and growth ratios");
  genfun_cmd->add_option("--m", genfun_opts.m, "external vertex count");
  genfun_cmd->add_option("--sigma", genfun_opts.sigma, "shape index");
  genfun_cmd->add_option("--n-max", genfun_opts.n_max, "top coefficient order");
  genfun_cmd->add_option("--k2", genfun_opts.k2,
                         "squared frequency per edge, rational p/q");
  genfun_cmd->add_option("--t", genfun_opts.t,
                         "scaled backbone time for joint-ratio");
  genfun_cmd->add_option("--emit", genfun_opts.emit,
                         "coeffs | mass-ratio | joint-ratio");
  genfun_cmd->add_option("--out", genfun_opts.out, "output file");
  genfun_cmd->callback([&] { run_genfun(genfun_opts); });

  TreesOpts trees_opts;
  auto* trees_cmd =
      app.add_subcommand("trees", "exact lattice-tree count tables");
  trees_cmd->add_option("--d", trees_opts.d, "space dimension");
  trees_cmd->add_option("--flavor", trees_opts.flavor, "nn | spread");
  trees_cmd->add_option("--L", trees_opts.L, "spread-out bond range");
  trees_cmd->add_option("--n", trees_opts.n, "bond count")->required();
  trees_cmd->add_option("--m", trees_opts.m, "marks + 1 for joint/spatial");
  trees_cmd->add_option("--l", trees_opts.l, "mark count for sue/overcount");
  trees_cmd->add_option("--op", trees_opts.op,
                        "count | joint | spatial | sue | overcount | zc | backbone");
  trees_cmd->add_option("--tree", trees_opts.tree_file,
                        "marked-tree JSON file for --op backbone");
  trees_cmd->add_option("--threads", trees_opts.threads, "enumeration shards");
  trees_cmd->add_option("--out", trees_opts.out, "output file (CSV)");
  trees_cmd->callback([&] { run_trees(trees_opts); });

  BrwOpts brw_opts;
  auto* brw_cmd = app.add_subcommand(
      "brw", "conditioned branching random walk moment characteristics");
  brw_cmd->add_option("--d", brw_opts.d, "space dimension");
  brw_cmd->add_option("--n", brw_opts.n, "family tree size")->required();
  brw_cmd->add_option("--samples", brw_opts.samples, "Monte Carlo samples");
  brw_cmd->add_option("--seed", brw_opts.seed, "RNG seed");
  brw_cmd->add_option("--k-grid", brw_opts.k_grid,
                      "comma-separated first-axis frequencies");
  brw_cmd->add_option("--scale", brw_opts.scale, "extra rescaling factor");
  brw_cmd->add_flag("--fit", brw_opts.fit,
                    "fit the diffusive scale to the limit characteristic");
  brw_cmd->add_option("--fit-ref", brw_opts.fit_ref, "reference frequency");
  brw_cmd->add_option("--threads", brw_opts.threads, "sampling threads");
  brw_cmd->add_option("--out", brw_opts.out, "output file (CSV)");
  brw_cmd->callback([&] { run_brw(brw_opts); });

  PercOpts perc_opts;
  auto* perc_cmd = app.add_subcommand(
      "perc", "bond percolation cluster laws, exact and Monte Carlo");
  perc_cmd->add_option("--d", perc_opts.d, "space dimension");
  perc_cmd->add_option("--flavor", perc_opts.flavor, "nn | spread");
  perc_cmd->add_option("--L", perc_opts.L, "spread-out bond range");
  perc_cmd->add_option("--p", perc_opts.p, "bond probability, rational p/q");
  perc_cmd->add_option("--n", perc_opts.n, "cluster size")->required();
  perc_cmd->add_option("--samples", perc_opts.samples, "Monte Carlo samples");
  perc_cmd->add_option("--seed", perc_opts.seed, "RNG seed");
  perc_cmd->add_option("--op", perc_opts.op,
                       "tau2 | tau3 | sizes | gw | mc | char");
  perc_cmd->add_option("--x", perc_opts.x, "first marked site, d integers");
  perc_cmd->add_option("--y", perc_opts.y, "second marked site, d integers");
  perc_cmd->add_option("--k-grid", perc_opts.k_grid,
                       "comma-separated first-axis frequencies for --op char");
  perc_cmd->add_option("--scale", perc_opts.scale, "frequency scale for char");
  perc_cmd->add_option("--max-sites", perc_opts.max_sites, "exploration cap");
  perc_cmd->add_option("--max-attempts", perc_opts.max_attempts,
                       "conditioned rejection cap");
  perc_cmd->add_option("--out", perc_opts.out, "output file (CSV)");
  perc_cmd->callback([&] { run_perc(perc_opts); });

  VerifyOpts verify_opts;
  auto* verify_cmd = app.add_subcommand(
      "verify", "cross-module consistency suites with hard pass/fail checks");
  verify_cmd->add_option("--suite", verify_opts.suite,
                         "suite name or all (mass-growth, joint-growth, "
                         "backbone-limit, brw-ise, mc-exact, gw-tail, d7-trend)");
  verify_cmd->add_option("--m", verify_opts.m, "shape size for growth suites");
  verify_cmd->add_option("--n", verify_opts.n, "size override, 0 = default");
  verify_cmd->add_option("--samples", verify_opts.samples,
                         "sample override, 0 = default");
  verify_cmd->add_option("--seed", verify_opts.seed, "RNG seed");
  verify_cmd->add_option("--threads", verify_opts.threads, "worker threads");
  verify_cmd->add_option("--out-dir", verify_opts.out_dir,
                         "directory for per-suite CSV artifacts");
  verify_cmd->callback([&] { rc = run_verify(verify_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const iselab::numerical_failure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const iselab::resource_limit& e) {
    std::fprintf(stderr, "resource limit: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
