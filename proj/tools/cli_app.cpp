#include "cli_app.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "simop/io.hpp"
#include "simop/splitting.hpp"
#include "simop/verify.hpp"

namespace simop::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& why) {
  throw Error(ErrorKind::parse_error, "config " + where + ": " + why);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) bad(where, "unknown key '" + it.key() + "'");
}

double get_num(const json& j, const std::string& key, const std::string& where, double def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number()) bad(where + "." + key, "expected a number");
  return v.get<double>();
}

long get_int(const json& j, const std::string& key, const std::string& where, long def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
  return v.get<long>();
}

std::string get_str(const json& j, const std::string& key, const std::string& where, const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_string()) bad(where + "." + key, "expected a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const std::string& key, const std::string& where, bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) bad(where + "." + key, "expected true or false");
  return v.get<bool>();
}

int as_index(const json& v, const std::string& where) {
  if (!v.is_number_integer()) bad(where, "index must be an integer");
  long k = v.get<long>();
  if (k < -1000000 || k > 1000000) bad(where, "index out of range");
  return static_cast<int>(k);
}

double as_real(const json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  return v.get<double>();
}

models::Coeffs inline_coeffs(const json& a, const std::string& where) {
  if (!a.is_array()) bad(where, "expected an array of [k, re, im]");
  models::Coeffs c;
  for (size_t i = 0; i < a.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!a[i].is_array() || a[i].size() != 3) bad(w, "expected [k, re, im]");
    int k = as_index(a[i][0], w);
    if (!c.emplace(k, cd(as_real(a[i][1], w), as_real(a[i][2], w))).second)
      bad(w, "duplicate coefficient index " + std::to_string(k));
  }
  return c;
}

models::Coeffs2 inline_coeffs2(const json& a, const std::string& where) {
  if (!a.is_array()) bad(where, "expected an array of [m, n, re, im]");
  models::Coeffs2 c;
  for (size_t i = 0; i < a.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!a[i].is_array() || a[i].size() != 4) bad(w, "expected [m, n, re, im]");
    int m = as_index(a[i][0], w), n = as_index(a[i][1], w);
    if (!c.emplace(std::make_pair(m, n), cd(as_real(a[i][2], w), as_real(a[i][3], w))).second)
      bad(w, "duplicate coefficient index (" + std::to_string(m) + "," + std::to_string(n) + ")");
  }
  return c;
}

std::ifstream open_input(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw Error(ErrorKind::parse_error, "cannot read " + p.string());
  return f;
}

// One-index function data: exactly one of coefficients / coefficients_file / random.
models::Coeffs coeff_source(const json& j, const std::string& where, const fs::path& base, json& echo) {
  int given = j.contains("coefficients") + j.contains("coefficients_file") + j.contains("random");
  if (given != 1) bad(where, "give exactly one of coefficients, coefficients_file, random");
  if (j.contains("coefficients")) {
    echo["coefficients"] = j.at("coefficients");
    return inline_coeffs(j.at("coefficients"), where + ".coefficients");
  }
  if (j.contains("coefficients_file")) {
    std::string f = get_str(j, "coefficients_file", where, "");
    echo["coefficients_file"] = f;
    fs::path p = fs::path(f).is_absolute() ? fs::path(f) : base / f;
    auto in = open_input(p);
    return io::parse_coeffs_csv(in, f);
  }
  const json& r = j.at("random");
  check_keys(r, where + ".random", {"degree", "seed", "scale"});
  long deg = get_int(r, "degree", where + ".random", 8);
  long seed = get_int(r, "seed", where + ".random", 1);
  double scale = get_num(r, "scale", where + ".random", 1.0);
  if (deg < 0 || deg > 10000) bad(where + ".random.degree", "must lie in [0, 10000]");
  if (seed < 0) bad(where + ".random.seed", "must be non-negative");
  if (!(scale > 0)) bad(where + ".random.scale", "must be positive");
  echo["random"] = {{"degree", deg}, {"seed", seed}, {"scale", scale}};
  return models::random_real_trig(static_cast<int>(deg), static_cast<std::uint64_t>(seed), scale);
}

ModelConfig parse_model(const json& j, const fs::path& base, json& echo) {
  ModelConfig m;
  if (!j.is_object()) bad("model", "expected an object");
  m.family = get_str(j, "family", "model", "");
  echo["family"] = m.family;
  if (m.family == "first_derivative_integral") {
    check_keys(j, "model", {"family", "theta", "kernel", "coefficients", "coefficients_file"});
    m.theta = get_num(j, "theta", "model", 0.0);
    echo["theta"] = m.theta;
    int given = j.contains("kernel") + j.contains("coefficients") + j.contains("coefficients_file");
    if (given != 1) bad("model", "give exactly one of kernel, coefficients, coefficients_file");
    if (j.contains("kernel")) {
      m.kernel_name = get_str(j, "kernel", "model", "");
      if (m.kernel_name != "sum") bad("model.kernel", "unknown built-in kernel '" + m.kernel_name + "'");
      echo["kernel"] = m.kernel_name;
    } else if (j.contains("coefficients")) {
      echo["coefficients"] = j.at("coefficients");
      m.kernel = inline_coeffs2(j.at("coefficients"), "model.coefficients");
    } else {
      std::string f = get_str(j, "coefficients_file", "model", "");
      echo["coefficients_file"] = f;
      fs::path p = fs::path(f).is_absolute() ? fs::path(f) : base / f;
      auto in = open_input(p);
      m.kernel = io::parse_coeffs2_csv(in, f);
    }
  } else if (m.family == "involution" || m.family == "hill") {
    check_keys(j, "model", {"family", "theta", "coefficients", "coefficients_file", "random"});
    m.theta = get_num(j, "theta", "model", m.family == "hill" ? 0.5 : 0.0);
    echo["theta"] = m.theta;
    m.v = coeff_source(j, "model", base, echo);
  } else if (m.family == "dirac") {
    check_keys(j, "model", {"family", "v1", "v2", "v3", "v4", "grid_points"});
    long g = get_int(j, "grid_points", "model", 0);
    if (g < 0 || g > (1L << 24)) bad("model.grid_points", "out of range");
    m.grid_points = static_cast<int>(g);
    echo["grid_points"] = g;
    models::Coeffs* dst[4] = {&m.v1, &m.v2, &m.v3, &m.v4};
    const char* names[4] = {"v1", "v2", "v3", "v4"};
    for (int i = 0; i < 4; ++i) {
      json e = json::object();
      if (j.contains(names[i])) {
        const json& s = j.at(names[i]);
        const std::string w = std::string("model.") + names[i];
        check_keys(s, w, {"coefficients", "coefficients_file", "random"});
        *dst[i] = coeff_source(s, w, base, e);
      } else {
        e["coefficients"] = json::array();
      }
      echo[names[i]] = e;
    }
  } else {
    bad("model.family", "unknown family '" + m.family + "'");
  }
  return m;
}

json cplx(cd z) { return json::array({z.real(), z.imag()}); }

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

class Timer {
 public:
  explicit Timer(bool on) : on_(on), t0_(std::chrono::steady_clock::now()) {}
  void mark(const std::string& name) {
    if (!on_) return;
    auto now = std::chrono::steady_clock::now();
    t_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  json to_json() const {
    if (!on_) return json{{"recorded", false}};
    json j = t_;
    j["total"] = seconds_since(t0_);
    j["recorded"] = true;
    return j;
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point t0_;
  std::chrono::steady_clock::time_point last_ = t0_;
  json t_ = json::object();
};

// Gate list; oracle gates decide exit 4, the rest exit 5.
class Gates {
 public:
  void add(const std::string& name, const std::string& module, double value, double threshold, bool oracle = false) {
    bool pass = std::isfinite(value) && value <= threshold;
    list_.push_back({{"name", name},
                     {"module", module},
                     {"kind", oracle ? "oracle" : "invariant"},
                     {"value", value},
                     {"threshold", threshold},
                     {"pass", pass}});
    if (!pass) (oracle ? oracle_fail_ : inv_fail_) = true;
  }
  void skip(const std::string& name, const std::string& module, const std::string& why) {
    list_.push_back({{"name", name}, {"module", module}, {"kind", "invariant"}, {"pass", nullptr}, {"note", why}});
  }
  int exit_code() const { return oracle_fail_ ? exit_oracle : inv_fail_ ? exit_invariant : exit_pass; }
  std::vector<std::string> failed() const {
    std::vector<std::string> f;
    for (const auto& g : list_)
      if (g["pass"].is_boolean() && !g["pass"].get<bool>()) f.push_back(g["name"].get<std::string>());
    return f;
  }
  const json& list() const { return list_; }

 private:
  json list_ = json::array();
  bool oracle_fail_ = false, inv_fail_ = false;
};

json error_json(const Error& e) {
  json d = json::object();
  for (const auto& [k, v] : e.data()) d[k] = v;
  return {{"kind", to_string(e.kind())}, {"message", e.what()}, {"data", d}};
}

json skeleton(const RunConfig& cfg) {
  json r;
  r["config_echo"] = cfg.echo;
  r["pipeline"] = nullptr;
  r["stages"] = json::array();
  r["spectrum_report"] = nullptr;
  r["certificates"] = json::object();
  r["invariant_gates"] = json::array();
  r["timings"] = json::object();
  return r;
}

Outcome fail_with(json report, const Error& e, const Timer& timer) {
  report["timings"] = timer.to_json();
  report["error"] = error_json(e);
  return {exit_code_for(e.kind()), std::move(report)};
}

json stage_json(const StageReport& s) {
  return {{"name", s.name},
          {"space", s.space},
          {"coarsening", s.coarsening},
          {"gamma", s.gamma},
          {"b_norm", s.b_norm},
          {"certificate", s.certificate},
          {"contraction_q", s.contraction_q},
          {"iterations", s.iterations},
          {"ball_ratio", s.ball_ratio},
          {"diag_identity_residual", s.diag_identity_residual},
          {"fixed_point_residual", s.residual},
          {"note", s.note}};
}

bool simple_spectrum(const Spectrum<cd>& spec) {
  for (const auto& e : spec.entries())
    if (e.mult != 1) return false;
  return true;
}

double eig_tolerance(double scale) { return 1e-8 * std::max(1.0, 1e-3 * scale); }

SimilarityResult run_pipeline(const std::string& name, const std::string& family, const Instance& inst,
                              const PipelineOptions& opt) {
  if (name == "mt1") return pipeline_mt1(inst.spec, inst.b_pipeline, opt);
  if (name == "mt2") return pipeline_mt2(inst.spec, inst.b_pipeline, opt);
  if (name == "mt3") return pipeline_mt3(inst.spec, inst.b_pipeline, opt);
  if (name == "mt4") return pipeline_mt4(inst.spec, inst.b_pipeline, opt);
  if (family == "dirac") return pipeline_mt4(inst.spec, inst.b_pipeline, opt);
  return pipeline_auto(inst.spec, inst.b_pipeline, opt);
}

std::optional<WeightSequence<double>> weights_of(const Instance& inst) {
  try {
    auto ctx = TransformContext<cd>::from(inst.spec, trivial_partition(inst.spec));
    auto w = alpha_sequence(inst.b_pipeline, ctx);
    if (w.finite_support) return std::nullopt;
    return w;
  } catch (const Error&) {
    return std::nullopt;
  }
}

json certificates_of(const RunConfig& cfg, const Instance& inst, const std::optional<WeightSequence<double>>& w,
                     double tol_margin) {
  const auto& b = inst.b_pipeline;
  auto ctx = TransformContext<cd>::from(inst.spec, trivial_partition(inst.spec));
  auto nr = norms(b);
  double g_hs = gamma_hs_bound(ctx);
  auto [sqrt_eta, inv_delta] = gamma_norm_certificates(ctx);
  json c;
  c["separation_delta"] = separation_delta(inst.spec);
  c["sqrt_eta"] = sqrt_eta;
  c["gamma_hs"] = g_hs;
  c["b_hs"] = nr.hs;
  c["b_sigma"] = nr.hs_sigma;
  c["b_op"] = nr.op;
  c["hs_space"] = {{"product", 4 * g_hs * nr.hs}, {"holds", 4 * g_hs * nr.hs < 1}};
  c["sigma_space"] = {{"product", 4 * sqrt_eta * nr.hs_sigma}, {"holds", 4 * sqrt_eta * nr.hs_sigma < 1}};
  if (w) {
    try {
      auto ch = select_coarsening(b, *w, tol_margin, 0, inst.spec.window().interior());
      c["weighted_space"] = {{"m", ch.m}, {"product", ch.product}, {"b_weighted", ch.b_weighted}};
    } catch (const Error& e) {
      c["weighted_space"] = {{"unavailable", to_string(e.kind())}};
    }
  } else {
    c["weighted_space"] = {{"unavailable", "degenerate_weight"}};
  }
  // finite window surrogates of the regularity assumptions
  const Mat<cd>& bd = b.dense();
  double row_max = 0;
  for (Index i = 0; i < bd.rows(); ++i) row_max = std::max(row_max, bd.row(i).squaredNorm());
  c["regularity"] = {{"max_row_square_sum", row_max},
                     {"b_gamma_b_hs", hs_norm(b * apply_Gamma(ctx, b))},
                     {"diag_hs", hs_norm(apply_J(ctx, b))}};
  if (cfg.model.family == "involution") {
    auto q = models::involution_inequality(cfg.model.v, cfg.window.N);
    c["involution_inequality"] = {{"lhs", q.lhs}, {"rhs", q.rhs}, {"slack", q.slack}, {"holds", q.ok}};
  }
  return c;
}

// p_n, q_n expanded to one slot per spectrum entry (zero off the interior).
void pq_per_entry(const Instance& inst, std::vector<cd>& p, std::vector<cd>& q) {
  auto as = asymptotic_sequences(inst.spec, inst.b_pipeline);
  p.assign(static_cast<size_t>(inst.spec.size()), cd(0));
  q = p;
  for (size_t i = 0; i < as.n.size(); ++i) {
    auto e = static_cast<size_t>(inst.spec.position(as.n[i]));
    p[e] = as.p[i];
    q[e] = as.q[i];
  }
}

json spectrum_json(const SpectrumReport& r, double distance) {
  json rows = json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"n", x.n},
                    {"lambda", cplx(x.lambda)},
                    {"estimate", cplx(x.estimate)},
                    {"oracle", cplx(x.oracle)},
                    {"p", cplx(x.p)},
                    {"q", cplx(x.q)},
                    {"b", cplx(x.b)},
                    {"c", cplx(x.b - x.p - x.q)},
                    {"residual", x.residual},
                    {"ambiguous", x.ambiguous}});
  return {{"multiset_distance", distance},
          {"matching_quality", r.matching_quality},
          {"weighted_tail", r.weighted_tail},
          {"plain_tail", r.plain_tail},
          {"rows", rows}};
}

fs::path out_base(const RunOptions& opt) { return opt.out ? *opt.out : fs::current_path(); }

void write_report(const RunConfig& cfg, const RunOptions& opt, const json& report) {
  if (!opt.write_files) return;
  fs::path base = out_base(opt);
  fs::path p = fs::path(cfg.report).is_absolute() ? fs::path(cfg.report) : base / cfg.report;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw Error(ErrorKind::invalid_input, "cannot write " + p.string());
  f << report.dump(2) << '\n';
}

fs::path csv_path(const RunConfig& cfg, const RunOptions& opt) {
  fs::path d = fs::path(cfg.csv_dir).is_absolute() ? fs::path(cfg.csv_dir) : out_base(opt) / cfg.csv_dir;
  fs::create_directories(d);
  return d;
}

struct AnalyzeState {
  json report;
  Gates gates;
  std::optional<SimilarityResult> result;
  std::vector<cd> oracle;
};

// The analyze run without file output; shared with verify.
int analyze_into(const RunConfig& cfg, const Instance& inst, const RunOptions& opt, AnalyzeState& st, Timer& timer,
                 std::optional<SpectrumReport>& spectrum, std::optional<WeightSequence<double>>& w) {
  SimilarityResult res = run_pipeline(cfg.pipeline, cfg.model.family, inst, cfg.tol);
  timer.mark("pipeline");
  if (opt.corrupt_v && res.V.dim() > 1) res.V.dense()(0, 1) += 1e-3 * (1 + hs_norm(res.V));

  const double hs_v = hs_norm(res.V);
  auto sim = similarity_residual(inst.spec, inst.b_pipeline, res.U, res.V);
  const double offd = offdiag_residual(res.V);
  st.report["pipeline"] = {{"name", res.pipeline},
                           {"m", res.m},
                           {"k", res.k},
                           {"iterations", res.iterations},
                           {"contraction_q", res.contraction_q},
                           {"scale", res.scale},
                           {"residual_similarity", sim.full},
                           {"residual_similarity_interior", sim.interior},
                           {"residual_offdiag_V", offd},
                           {"hs_U", hs_norm(res.U)},
                           {"hs_V", hs_v}};
  json stages = json::array();
  for (const auto& s : res.stages) stages.push_back(stage_json(s));
  st.report["stages"] = stages;

  Gates& g = st.gates;
  g.add("similarity_residual", "similarity", sim.full, 1e-9 * res.scale);
  g.add("offdiag_V", "similarity", offd, 1e-10 * hs_v);
  for (size_t i = 0; i < res.stages.size(); ++i) {
    const auto& s = res.stages[i];
    const std::string pre = s.name + ".";
    if (s.name == "stage1") {
      // preliminary transform: no fixed point, only the conjugation defect and ||Gamma_m B||_op < 1
      g.add(pre + "transform_residual", "similarity", s.residual, 1e-9 * res.scale);
      g.add(pre + "gamma_b_op", "similarity", s.certificate, std::nextafter(1.0, 0.0));
      continue;
    }
    g.add(pre + "fixed_point_residual", "similarity", s.residual, cfg.tol.tol * s.b_norm);
    g.add(pre + "ball", "similarity", s.ball_ratio, 1.0);
    g.add(pre + "contraction_ratio", "similarity", s.contraction_q, s.certificate + 0.05);
    g.add(pre + "diag_identity", "similarity", s.diag_identity_residual, 1e-9 * std::max(1.0, s.b_norm));
  }
  try {
    auto inv = solve_shift(res.U);
    g.add("invertible_I_plus_U", "opmatrix", 0.0, 0.0);
    (void)inv;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::not_invertible) throw;
    g.add("invertible_I_plus_U", "opmatrix", std::numeric_limits<double>::infinity(), 0.0);
  }

  w = weights_of(inst);
  st.report["certificates"] = certificates_of(cfg, inst, w, cfg.tol.contraction_margin);
  if (cfg.model.family == "dirac") {
    st.report["certificates"]["gauge_reduction"] = {{"grid_points", cfg.model.grid_points}};
  }
  timer.mark("certificates");

  if (cfg.oracle) {
    st.oracle = oracle_eigs(inst.spec.dense() - inst.b_pipeline.dense());
    auto est = block_eigenvalues(inst.spec, res.V);
    double dist = multiset_distance(st.oracle, est);
    std::vector<cd> p, q;
    if (simple_spectrum(inst.spec)) pq_per_entry(inst, p, q);
    spectrum = build_spectrum_report(inst.spec, est, st.oracle, p, q, w ? &*w : nullptr);
    st.report["spectrum_report"] = spectrum_json(*spectrum, dist);
    g.add("eigenvalue_agreement", "verify", dist, eig_tolerance(res.scale), true);
    if (cfg.model.family == "dirac") {
      // the reduction is exact only away from the window edge
      auto raw = oracle_eigs(inst.spec.dense() - inst.b.dense());
      const double cut = 2 * std::acos(-1.0) * inst.spec.window().interior();
      std::vector<cd> a, b;
      for (auto z : raw)
        if (std::abs(z.real()) < cut) a.push_back(z);
      for (auto z : st.oracle)
        if (std::abs(z.real()) < cut) b.push_back(z);
      json gr = st.report["certificates"]["gauge_reduction"];
      gr["interior_count_raw"] = a.size();
      gr["interior_count_reduced"] = b.size();
      if (a.size() == b.size()) gr["interior_distance"] = multiset_distance(a, b);
      st.report["certificates"]["gauge_reduction"] = gr;
    }
    timer.mark("oracle");
  }

  const int nint = inst.spec.window().interior();
  if (w && res.U.partition().groups() == res.U.partition().dim() && nint >= 2) {
    std::vector<Index> sigma;
    for (Index e = 0; e < inst.spec.size(); ++e)
      if (std::abs(inst.spec.entry(e).index) > nint / 2)
        for (int j = 0; j < inst.spec.entry(e).mult; ++j) sigma.push_back(inst.spec.offset(e) + j);
    try {
      auto pc = projection_compare(res.U, sigma, *w);
      st.report["certificates"]["projection"] = {{"tail_from", nint / 2 + 1}, {"lhs", pc.lhs},
                                                 {"rhs", pc.rhs},           {"lemma_lhs", pc.lemma_lhs},
                                                 {"lemma_rhs", pc.lemma_rhs}, {"holds", pc.ok}};
      g.add("projection_lemma", "verify", pc.lemma_lhs, pc.lemma_rhs * (1 + 1e-12) + 1e-15);
      g.add("projection_bound", "verify", pc.lhs, pc.rhs * (1 + 1e-12) + 1e-15);
    } catch (const Error& e) {
      g.skip("projection_lemma", "verify", std::string("weights unusable: ") + to_string(e.kind()));
    }
  } else {
    g.skip("projection_lemma", "verify", "U is not on the base partition or weights are degenerate");
  }
  st.result = std::move(res);
  return g.exit_code();
}

void write_csv(const RunConfig& cfg, const RunOptions& opt, const std::optional<SpectrumReport>& spectrum,
               const std::optional<WeightSequence<double>>& w) {
  if (!opt.write_files) return;
  fs::path d = csv_path(cfg, opt);
  if (spectrum) {
    std::ofstream f(d / "spectrum.csv");
    io::write_spectrum_csv(f, *spectrum);
    if (cfg.svg) {
      std::ofstream s(d / "spectrum.svg");
      io::write_spectrum_svg(s, *spectrum);
    }
  }
  if (w) {
    std::ofstream f(d / "weights.csv");
    io::write_weights_csv(f, *w);
  }
}

void say(const RunOptions& opt, const std::string& line) {
  if (!opt.quiet) std::cout << line << '\n';
}

void announce_failures(const Gates& g) {
  for (const auto& n : g.failed()) std::cerr << "gate failed: " << n << '\n';
}

void announce_error(const Error& e) {
  std::cerr << to_string(e.kind()) << ": " << e.what();
  for (const auto& [k, v] : e.data()) std::cerr << ' ' << k << '=' << io::format_double(v);
  std::cerr << '\n';
}

}  // namespace

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::parse_error:
    case ErrorKind::invalid_input:
      return exit_parse;
    case ErrorKind::contraction_violation:
    case ErrorKind::non_convergence:
    case ErrorKind::window_too_small:
    case ErrorKind::condition_violation:
    case ErrorKind::not_supported:
    case ErrorKind::degenerate_weight:
    case ErrorKind::separation_violation:
      return exit_condition;
    case ErrorKind::oracle_failure:
      return exit_oracle;
    case ErrorKind::partition_mismatch:
    case ErrorKind::not_invertible:
    case ErrorKind::invariant_breach:
      return exit_invariant;
  }
  return exit_invariant;
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  check_keys(j, "root",
             {"schema_version", "model", "truncation", "tolerances", "pipeline", "split_k", "oracle", "output"});
  if (!j.contains("schema_version")) bad("root", "missing schema_version");
  long ver = get_int(j, "schema_version", "root", 0);
  if (ver != kSchemaVersion) bad("schema_version", "unsupported version " + std::to_string(ver));
  if (!j.contains("model")) bad("root", "missing model");

  RunConfig c;
  json echo;
  echo["schema_version"] = ver;
  json me = json::object();
  c.model = parse_model(j.at("model"), base_dir, me);

  json t = j.value("truncation", json::object());
  check_keys(t, "truncation", {"N", "interior_fraction"});
  long N = get_int(t, "N", "truncation", 64);
  if (N < 1 || N > 2048) bad("truncation.N", "must lie in [1, 2048]");
  c.window.N = static_cast<int>(N);
  c.window.interior_fraction = get_num(t, "interior_fraction", "truncation", 0.5);
  if (!(c.window.interior_fraction > 0 && c.window.interior_fraction <= 1))
    bad("truncation.interior_fraction", "must lie in (0, 1]");
  if (c.window.interior() < 1) bad("truncation", "interior window is empty");

  json tol = j.value("tolerances", json::object());
  check_keys(tol, "tolerances", {"tol", "max_iter", "contraction_margin"});
  c.tol.tol = get_num(tol, "tol", "tolerances", 1e-12);
  long mi = get_int(tol, "max_iter", "tolerances", 200);
  c.tol.contraction_margin = get_num(tol, "contraction_margin", "tolerances", 0.99);
  if (!(c.tol.tol > 0)) bad("tolerances.tol", "must be positive");
  if (mi < 1 || mi > 100000) bad("tolerances.max_iter", "must lie in [1, 100000]");
  if (!(c.tol.contraction_margin > 0 && c.tol.contraction_margin < 1))
    bad("tolerances.contraction_margin", "must lie in (0, 1)");
  c.tol.max_iter = static_cast<int>(mi);

  c.pipeline = get_str(j, "pipeline", "root", "auto");
  static const std::set<std::string> pipelines{"auto", "mt1", "mt2", "mt3", "mt4", "split"};
  if (!pipelines.count(c.pipeline)) bad("pipeline", "unknown pipeline '" + c.pipeline + "'");
  if (c.model.family == "dirac" && c.pipeline != "auto" && c.pipeline != "mt4")
    bad("pipeline", "the dirac family runs with mt4 (or auto)");
  long sk = get_int(j, "split_k", "root", 0);
  if (std::abs(sk) > N) bad("split_k", "outside the window");
  c.split_k = static_cast<int>(sk);
  c.oracle = get_bool(j, "oracle", "root", true);

  json o = j.value("output", json::object());
  check_keys(o, "output", {"report", "csv_dir", "svg"});
  c.report = get_str(o, "report", "output", "report.json");
  c.csv_dir = get_str(o, "csv_dir", "output", "csv");
  c.svg = get_bool(o, "svg", "output", false);

  if (c.model.family == "dirac" && c.model.grid_points == 0) {
    int g = 1;
    while (g < 4 * c.window.N) g *= 2;
    c.model.grid_points = g;
    me["grid_points"] = g;
  }

  echo["model"] = me;
  echo["truncation"] = {{"N", N}, {"interior_fraction", c.window.interior_fraction}};
  echo["tolerances"] = {{"tol", c.tol.tol}, {"max_iter", mi}, {"contraction_margin", c.tol.contraction_margin}};
  echo["pipeline"] = c.pipeline;
  echo["split_k"] = sk;
  echo["oracle"] = c.oracle;
  echo["output"] = {{"report", c.report}, {"csv_dir", c.csv_dir}, {"svg", c.svg}};
  c.echo = std::move(echo);
  return c;
}

RunConfig load_config(const fs::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse_error, path.string() + ": " + e.what(), {{"byte", static_cast<double>(e.byte)}});
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Instance build_instance(const RunConfig& cfg) {
  const auto& m = cfg.model;
  Instance inst;
  if (m.family == "first_derivative_integral") {
    inst.spec = models::first_derivative_spectrum(m.theta, cfg.window);
    inst.b = models::integral_perturbation(
        inst.spec, m.kernel_name == "sum" ? models::kernel_sum_coefficients(cfg.window.N) : m.kernel);
    inst.b_pipeline = inst.b;
  } else if (m.family == "involution") {
    inst.spec = models::first_derivative_spectrum(m.theta, cfg.window);
    inst.b = models::involution_perturbation(inst.spec, m.v, m.theta);
    inst.b_pipeline = inst.b;
  } else if (m.family == "hill") {
    inst.spec = models::hill_spectrum(m.theta, cfg.window);
    inst.b = models::hill_perturbation(inst.spec, m.v);
    inst.b_pipeline = inst.b;
  } else {
    auto d = models::build_dirac(m.v1, m.v2, m.v3, m.v4, cfg.window, m.grid_points);
    inst.spec = std::move(d.spec);
    inst.b = std::move(d.b);
    inst.b_pipeline = std::move(d.b_tilde);
  }
  return inst;
}

Outcome cmd_analyze(const RunConfig& cfg, const RunOptions& opt) {
  if (cfg.pipeline == "split") return cmd_split(cfg, opt);
  Timer timer(opt.timings);
  AnalyzeState st;
  st.report = skeleton(cfg);
  std::optional<SpectrumReport> spectrum;
  std::optional<WeightSequence<double>> w;
  Outcome out;
  try {
    Instance inst = build_instance(cfg);
    timer.mark("build");
    out.exit_code = analyze_into(cfg, inst, opt, st, timer, spectrum, w);
    st.report["invariant_gates"] = st.gates.list();
    st.report["timings"] = timer.to_json();
    out.report = std::move(st.report);
  } catch (const Error& e) {
    st.report["invariant_gates"] = st.gates.list();
    out = fail_with(std::move(st.report), e, timer);
    announce_error(e);
  }
  write_report(cfg, opt, out.report);
  write_csv(cfg, opt, spectrum, w);
  announce_failures(st.gates);
  if (out.report.contains("pipeline") && out.report["pipeline"].is_object())
    say(opt, "analyze: " + out.report["pipeline"]["name"].get<std::string>() + " exit " +
                 std::to_string(out.exit_code));
  return out;
}

Outcome cmd_split(const RunConfig& cfg, const RunOptions& opt) {
  Timer timer(opt.timings);
  json report = skeleton(cfg);
  Gates g;
  Outcome out;
  try {
    Instance inst = build_instance(cfg);
    if (!simple_spectrum(inst.spec)) throw Error(ErrorKind::invalid_input, "splitting needs a simple eigenvalue");
    timer.mark("build");
    const int k = cfg.split_k;
    json certs;
    if (cfg.model.family == "first_derivative_integral" && cfg.model.kernel_name == "sum" && cfg.model.theta == 0) {
      auto d = models::kernel_split_display(k);
      certs["display"] = {{"bound_e", d.bound_e}, {"bound_b2", d.bound_b2}};
    }
    Mt6Certificate c = mt6_certificate(inst.spec, inst.b, k);
    certs["splitting"] = {{"s", c.s},           {"b21", c.b21},
                          {"b12s", c.b12s},     {"m", c.m},
                          {"n", c.n},           {"lhs", c.lhs},
                          {"rhs", 1.0},         {"holds", c.ok},
                          {"strict", c.strict}, {"r", c.r},
                          {"bound_e", c.bound_e}, {"bound_b2", c.bound_b2},
                          {"taylor_e", c.taylor_e}, {"taylor_b2", c.taylor_b2}};
    report["certificates"] = certs;
    if (!c.ok) {
      std::cerr << "splitting condition fails: m + 2 sqrt(n) = " << io::format_double(c.lhs) << " > 1\n";
      throw Error(ErrorKind::condition_violation, "splitting condition fails",
                  {{"lhs", c.lhs}, {"rhs", 1.0}, {"m", c.m}, {"n", c.n}});
    }
    SplittingResult s = split(inst.spec, inst.b, k);
    timer.mark("split");
    report["pipeline"] = {{"name", "split"},
                          {"k", k},
                          {"lambda", cplx(s.lambda)},
                          {"b1", cplx(s.b1)},
                          {"b2", cplx(s.b2)},
                          {"lambda_prime", cplx(s.lambda_prime)},
                          {"e_distance", s.e_distance},
                          {"eigen_residual", s.eigen_residual},
                          {"residual_scale", s.residual_scale},
                          {"iterations", s.iterations}};
    report["stages"] = json::array({{{"name", "psi"}, {"space", "op"}, {"iterations", s.iterations},
                                     {"certificate", c.lhs}, {"note", ""}}});
    g.add("eigen_residual", "splitting", s.eigen_residual, 1e-9 * std::max(1.0, s.residual_scale));
    g.add("eigenvector_bound", "splitting", s.e_distance, c.bound_e * (1 + 1e-12) + 1e-15);
    g.add("b2_bound", "splitting", std::abs(s.b2), c.bound_b2 * (1 + 1e-12) + 1e-15);
    if (cfg.oracle) {
      auto oracle = oracle_eigs(inst.spec.dense() - inst.b.dense());
      const cd target = s.lambda - s.b1;
      cd best = oracle.front();
      for (auto z : oracle)
        if (std::abs(z - target) < std::abs(best - target)) best = z;
      const double scale = std::abs(s.lambda) + norms(inst.b).hs + 1;
      report["spectrum_report"] = {{"target", cplx(target)},
                                   {"oracle_nearest", cplx(best)},
                                   {"distance_to_lambda_prime", std::abs(best - s.lambda_prime)},
                                   {"distance_to_target", std::abs(best - target)}};
      g.add("oracle_containment", "verify", std::abs(best - s.lambda_prime), c.bound_b2 + 1e-3, true);
      g.add("oracle_agreement", "verify", std::abs(best - s.lambda_prime), eig_tolerance(scale), true);
      timer.mark("oracle");
    }
    report["invariant_gates"] = g.list();
    report["timings"] = timer.to_json();
    out = {g.exit_code(), std::move(report)};
    say(opt, "split: k=" + std::to_string(k) + " lambda'=" + io::format_double(s.lambda_prime.real()) + "+" +
                 io::format_double(s.lambda_prime.imag()) + "i exit " + std::to_string(out.exit_code));
  } catch (const Error& e) {
    report["invariant_gates"] = g.list();
    out = fail_with(std::move(report), e, timer);
    announce_error(e);
  }
  write_report(cfg, opt, out.report);
  announce_failures(g);
  return out;
}

namespace {

Mat<cd> random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> nd;
  Mat<cd> m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = cd(nd(rng), nd(rng));
  return m;
}

void property_gates(const RunConfig& cfg, const Instance& inst, const RunOptions& opt, Gates& g, json& extra) {
  std::mt19937_64 rng(opt.seed);
  const auto& spec = inst.spec;
  auto triv = trivial_partition(spec);
  auto ctx = TransformContext<cd>::from(spec, triv);
  BlockMatrix<cd> x(triv, random_matrix(rng, spec.dim(), spec.dim()));

  // transforms
  const double lam = spec.diagonal().cwiseAbs().maxCoeff();
  const double xs = hs_norm(x);
  g.add("commutator_identity", "transforms", commutator_residual(ctx, x), 1e-13 * xs * std::max(1.0, lam));
  auto jx = apply_J(ctx, x);
  g.add("J_idempotent", "transforms", hs_norm(apply_J(ctx, jx) - jx), 0.0);
  g.add("J_of_Gamma_zero", "transforms", hs_norm(apply_J(ctx, apply_Gamma(ctx, x))), 0.0);
  const int nint = spec.window().interior();
  auto coarse = coarse_partition(spec, nint / 2);
  auto cctx = TransformContext<cd>::from(spec, coarse);
  auto xc = coarsen(x, coarse);
  g.add("coarsen_refine_roundtrip", "opmatrix", hs_norm(refine(xc, triv) - x), 0.0);
  g.add("coarse_commutator_identity", "transforms", commutator_residual(cctx, xc), 1e-13 * xs * std::max(1.0, lam));
  auto nr = norms(inst.b_pipeline);
  g.add("norm_order", "opmatrix", nr.op - nr.hs, 1e-12 * nr.hs);

  // serialization
  std::stringstream ss;
  io::write_block_matrix_csv(ss, inst.b_pipeline);
  auto back = io::read_block_matrix_csv(ss, inst.b_pipeline.partition_ptr());
  g.add("csv_roundtrip", "io", hs_norm(back - inst.b_pipeline), 0.0);

  // oracle self-checks
  double dual = 0;
  for (int t = 0; t < 20; ++t) {
    Index d = 2 + static_cast<Index>(rng() % 7);
    Mat<cd> m = random_matrix(rng, d, d);
    dual = std::max(dual, multiset_distance(oracle_eigs(m), poly_oracle_eigs(m)));
  }
  g.add("dual_oracle", "verify", dual, 1e-10, true);
  Mat<cd> full = spec.dense() - inst.b_pipeline.dense();
  auto ev = oracle_eigs(full);
  double worst = 0;
  const double fn = full.norm();
  for (size_t i = 0; i < ev.size(); i += std::max<size_t>(1, ev.size() / 8)) {
    Vec<cd> v = oracle_eigvec(full, ev[i]);
    worst = std::max(worst, (full * v - ev[i] * v).norm() / v.norm());
  }
  g.add("oracle_eigvec_residual", "verify", worst, 1e-10 * fn, true);
  double tr = std::abs(full.trace() - std::accumulate(ev.begin(), ev.end(), cd(0)));
  g.add("oracle_trace", "verify", tr, 1e-10 * fn * std::sqrt(static_cast<double>(full.rows())), true);

  // weights
  if (auto w = weights_of(inst)) {
    double rise = 0;
    for (int n = 1; n <= w->L; ++n) rise = std::max(rise, w->a(n) - w->a(n - 1));
    g.add("alpha_nonincreasing", "weighted", rise, 0.0);
  } else {
    g.skip("alpha_nonincreasing", "weighted", "weights degenerate on this window");
  }

  // splitting at split_k
  if (simple_spectrum(spec)) {
    try {
      auto s = split(spec, inst.b, cfg.split_k);
      g.add("split_eigen_residual", "splitting", s.eigen_residual, 1e-9 * std::max(1.0, s.residual_scale));
      g.add("split_eigenvector_bound", "splitting", s.e_distance, s.cert.bound_e * (1 + 1e-12) + 1e-15);
      g.add("split_b2_bound", "splitting", std::abs(s.b2), s.cert.bound_b2 * (1 + 1e-12) + 1e-15);
    } catch (const Error& e) {
      if (exit_code_for(e.kind()) != exit_condition) throw;
      g.skip("split", "splitting", std::string("condition does not hold: ") + to_string(e.kind()));
    }
    try {
      auto sys = split_system_solve(spec, inst.b, cfg.split_k);
      double eq = *std::max_element(sys.equation_residuals.begin(), sys.equation_residuals.end());
      g.add("split_system_equations", "splitting", eq, 1e-9 * std::max(1.0, norms(inst.b).hs));
    } catch (const Error& e) {
      if (exit_code_for(e.kind()) != exit_condition) throw;
      g.skip("split_system", "splitting", std::string("condition does not hold: ") + to_string(e.kind()));
    }
  } else {
    g.skip("split", "splitting", "spectrum is not simple");
  }
  extra["seed"] = opt.seed;
}

}  // namespace

Outcome cmd_verify(const RunConfig& cfg, const RunOptions& opt) {
  Timer timer(opt.timings);
  AnalyzeState st;
  st.report = skeleton(cfg);
  Outcome out;
  if (!cfg.oracle) {
    Error e(ErrorKind::invalid_input, "verify needs the oracle enabled");
    announce_error(e);
    out = fail_with(std::move(st.report), e, timer);
    write_report(cfg, opt, out.report);
    return out;
  }
  std::optional<SpectrumReport> spectrum;
  std::optional<WeightSequence<double>> w;
  try {
    Instance inst = build_instance(cfg);
    timer.mark("build");
    RunConfig c2 = cfg;
    if (c2.pipeline == "split") c2.pipeline = "auto";
    analyze_into(c2, inst, opt, st, timer, spectrum, w);
    json extra = json::object();
    property_gates(cfg, inst, opt, st.gates, extra);
    timer.mark("properties");
    st.report["certificates"]["verify"] = extra;
    st.report["invariant_gates"] = st.gates.list();
    st.report["timings"] = timer.to_json();
    out = {st.gates.exit_code(), std::move(st.report)};
  } catch (const Error& e) {
    st.report["invariant_gates"] = st.gates.list();
    out = fail_with(std::move(st.report), e, timer);
    announce_error(e);
  }
  write_report(cfg, opt, out.report);
  write_csv(cfg, opt, spectrum, w);
  announce_failures(st.gates);
  say(opt, "verify: " + std::to_string(st.gates.list().size()) + " gates, exit " + std::to_string(out.exit_code));
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Spectral analysis of perturbed operators by similar operators"};
  app.require_subcommand(1);
  std::string config;
  std::string out;
  std::uint64_t seed = 1;
  bool quiet = false, timings = false, corrupt = false;
  std::vector<CLI::App*> subs;
  const std::pair<const char*, const char*> cmds[] = {
      {"analyze", "similarity pipeline, spectrum report and certificates"},
      {"split", "isolate one eigenvalue with certified bounds"},
      {"verify", "analyze plus oracle and property gates"}};
  for (const auto& [name, desc] : cmds) {
    auto* s = app.add_subcommand(name, desc);
    s->add_option("--config", config, "config JSON")->required();
    s->add_option("--out", out, "output directory");
    s->add_option("--seed", seed, "seed for randomized property gates");
    s->add_flag("--quiet", quiet, "no summary on stdout");
    s->add_flag("--timings", timings, "record wall-clock timings in the report");
    s->add_flag("--corrupt-v", corrupt)->group("");
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? exit_pass : exit_usage;
  }
  RunOptions opt;
  if (!out.empty()) opt.out = fs::path(out);
  opt.seed = seed;
  opt.quiet = quiet;
  opt.timings = timings;
  opt.corrupt_v = corrupt;

  RunConfig cfg;
  try {
    cfg = load_config(config);
  } catch (const Error& e) {
    announce_error(e);
    if (opt.out) {
      fs::create_directories(*opt.out);
      std::ofstream f(*opt.out / "report.json");
      f << json{{"error", error_json(e)}}.dump(2) << '\n';
    }
    return exit_code_for(e.kind());
  }
  try {
    if (subs[0]->parsed()) return cmd_analyze(cfg, opt).exit_code;
    if (subs[1]->parsed()) return cmd_split(cfg, opt).exit_code;
    return cmd_verify(cfg, opt).exit_code;
  } catch (const Error& e) {
    announce_error(e);
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return exit_invariant;
  }
}

}  // namespace simop::cli
