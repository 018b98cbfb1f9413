#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qmix/classical_em.hpp"
#include "qmix/color.hpp"
#include "qmix/experiments.hpp"
#include "qmix/format.hpp"
#include "qmix/json_io.hpp"
#include "qmix/png_io.hpp"
#include "qmix/quantum_em.hpp"
#include "qmix/rng.hpp"

namespace qmix::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "qmix 1.0.0";

// Read-only view of one config node that reports errors by field path.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Node operator[](const std::string& key) const {
    if (!has(key)) fail(path_ + "." + key, "required field is missing");
    return {j_.at(key), path_ + "." + key};
  }
  Node at(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }
  std::size_t size() const { return j_.size(); }

  double number() const {
    if (!j_.is_number()) fail(path_, "expected a number");
    return j_.get<double>();
  }
  long integer(long lo) const {
    if (!j_.is_number_integer() && !(j_.is_number_unsigned())) fail(path_, "expected an integer");
    const long v = j_.get<long>();
    if (v < lo) fail(path_, "must be at least " + std::to_string(lo));
    return v;
  }
  std::uint64_t seed() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<long long>() >= 0))
      fail(path_, "expected a non-negative integer");
    return j_.get<std::uint64_t>();
  }
  std::string string() const {
    if (!j_.is_string()) fail(path_, "expected a string");
    return j_.get<std::string>();
  }
  std::vector<double> numbers() const {
    if (!j_.is_array()) fail(path_, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j_.size(); ++i) out.push_back(at(i).number());
    return out;
  }
  Eigen::VectorXd vector(std::size_t dim) const {
    std::vector<double> v = numbers();
    if (v.size() != dim) fail(path_, "expected " + std::to_string(dim) + " numbers");
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  // A scalar broadcast to every axis, or one value per axis.
  Eigen::VectorXd per_axis(std::size_t dim) const {
    if (j_.is_number()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), number());
    return vector(dim);
  }

  double number_or(const std::string& key, double def) const { return has(key) ? (*this)[key].number() : def; }
  long integer_or(const std::string& key, long def, long lo) const { return has(key) ? (*this)[key].integer(lo) : def; }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw UsageError(path + ": " + what);
  }

 private:
  const Json& j_;
  std::string path_;
};

struct Context {
  Options opt;
  Json config;
  fs::path config_dir;
  std::uint64_t seed = 0;
  Json manifest_results = Json::object();
  std::vector<std::string> outputs;

  Node root() const { return {config, "config"}; }

  fs::path out(const std::string& name) {
    outputs.push_back(name);
    return fs::path(opt.out_dir) / name;
  }
  std::string stem(const std::string& command, const std::string& engine) const {
    return command + "_" + engine + "_" + std::to_string(seed);
  }
  fs::path input(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : config_dir / path;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IO, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IO, "failed writing " + path.string());
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

ConvergenceConfig convergence(const Node& root) {
  ConvergenceConfig c;
  if (!root.has("convergence")) return c;
  Node n = root["convergence"];
  c.tol = n.number_or("tol", c.tol);
  c.max_iter = static_cast<int>(n.integer_or("max_iter", c.max_iter, 1));
  if (!(c.tol > 0.0)) Node::fail(n.path() + ".tol", "must be positive");
  return c;
}

std::vector<Engine> engines(const Node& root, const char* def = "both") {
  const std::string e = root.has("engine") ? root["engine"].string() : def;
  if (e == "both") return {Engine::Classical, Engine::Quantum};
  try {
    return {parse_engine(e)};
  } catch (const Error&) {
    Node::fail("config.engine", "expected classical, quantum or both");
  }
}

ScenarioSpec scenario(const Node& root) {
  Node s = root["scenario"];
  Node cls = s["classes"];
  if (cls.size() < 2) Node::fail(cls.path(), "at least two classes required");
  ScenarioSpec spec;
  const std::size_t dim = cls.at(0)["center"].numbers().size();
  if (dim != 2 && dim != 3) Node::fail(cls.at(0)["center"].path(), "expected 2 or 3 coordinates");
  for (std::size_t k = 0; k < cls.size(); ++k) {
    Node c = cls.at(k);
    ClassSpec cs{c["center"].vector(dim), c["sigma"].per_axis(dim), static_cast<int>(c["count"].integer(10))};
    if (!((cs.sigma.array() > 0.0).all())) Node::fail(c["sigma"].path(), "must be positive");
    spec.classes.push_back(std::move(cs));
  }
  spec.theta = s.number_or("theta", 0.0);
  spec.epsilon = s.number_or("epsilon", 0.0);
  if (spec.epsilon < 0.0) Node::fail(s.path() + ".epsilon", "must be non-negative");
  try {
    spec.validate();
  } catch (const Error& e) {
    Node::fail(s.path(), e.what());
  }
  return spec;
}

ScenarioSpec two_class(const Node& root) {
  ScenarioSpec s = scenario(root);
  if (s.classes.size() != 2) Node::fail("config.scenario.classes", "exactly two classes required");
  return s;
}

TrialConfig trial_config(const Context& ctx) {
  Node root = ctx.root();
  TrialConfig c;
  c.trials = static_cast<int>(root.integer_or("trials", c.trials, 2));
  c.restarts = static_cast<int>(root.integer_or("restarts", c.restarts, 1));
  c.jobs = ctx.opt.jobs;
  c.convergence = convergence(root);
  return c;
}

// ---- generate ---------------------------------------------------------------

int cmd_generate(Context& ctx) {
  ScenarioSpec spec = scenario(ctx.root());
  spec.seed = ctx.seed;
  LabeledDataset d = generate(spec);
  write_csv(ctx.out(ctx.stem("generate", "data") + ".csv").string(), d.data, &d.labels);
  ctx.manifest_results = {{"points", d.data.n()}, {"dim", d.data.d()}};
  return kExitOk;
}

// ---- fit --------------------------------------------------------------------

int cmd_fit(Context& ctx) {
  Node root = ctx.root();
  const fs::path data_path = ctx.input(root["data"].string());
  if (!fs::exists(data_path)) Node::fail("config.data", "file not found: " + data_path.string());
  LabeledDataset ld = [&] {
    try {
      return read_csv(data_path.string());
    } catch (const Error& e) {
      throw UsageError("config.data: " + std::string(e.what()));
    }
  }();
  const Dataset& data = ld.data;
  const ConvergenceConfig conv = convergence(root);
  const std::string init = root.has("init") ? root["init"].string() : "random";
  if (init != "random" && init != "classical_limit") Node::fail("config.init", "expected random or classical_limit");
  const int k = static_cast<int>(root.integer_or("classes", 2, 2));

  bool all_converged = true;
  for (Engine e : engines(root)) {
    std::mt19937_64 rng = make_rng(ctx.seed, 0);
    Json report;
    if (e == Engine::Classical) {
      auto r = classical_fit(data, random_classical_init(data, k, rng), conv);
      all_converged = all_converged && r.converged;
      report = to_json(r);
    } else {
      if (k != 2) Node::fail("config.classes", "the quantum engine fits exactly two classes");
      QuantumMixture2 start = random_quantum_init(data, rng);
      if (init == "classical_limit") {
        std::mt19937_64 crng = make_rng(ctx.seed, 0);
        auto c = classical_fit(data, random_classical_init(data, 2, crng), conv);
        const ClassicalMixture& m = c.params_final;
        start = QuantumMixture2::build(data, m.classes[0], m.classes[1], std::sqrt(m.priors(0)),
                                       std::sqrt(m.priors(1)));
      }
      QuantumFitConfig qc;
      qc.convergence = conv;
      auto r = quantum_fit(data, start, qc);
      all_converged = all_converged && r.converged;
      report = to_json(r);
    }
    report["seed"] = ctx.seed;
    report["init"] = init;
    write_text(ctx.out(ctx.stem("fit", to_string(e)) + ".json"), dump(report));
  }
  ctx.manifest_results = {{"converged", all_converged}};
  return all_converged ? kExitOk : kExitNotConverged;
}

// ---- trials / deform ----------------------------------------------------------

std::vector<std::string> stats_header(const std::vector<std::string>& names) {
  std::vector<std::string> h{"trials", "successes", "failures", "converged"};
  for (const auto& n : names) {
    h.push_back(n + "_truth");
    h.push_back(n + "_mean");
    h.push_back(n + "_error");
    h.push_back(n + "_fluctuation");
  }
  return h;
}

std::vector<std::string> stats_cells(const TrialStats& s) {
  std::vector<std::string> c{std::to_string(s.trials), std::to_string(s.estimates.size()),
                             std::to_string(s.failures.size()), std::to_string(s.converged)};
  for (const auto& p : s.params) {
    c.push_back(fmt_num(p.truth));
    c.push_back(fmt_num(p.mean));
    c.push_back(fmt_num(p.error));
    c.push_back(fmt_num(p.fluctuation));
  }
  return c;
}

Json failures_json(const TrialStats& s) {
  Json f = Json::array();
  for (const auto& m : s.failures) f.push_back(m);
  return f;
}

int cmd_trials(Context& ctx) {
  Node root = ctx.root();
  const ScenarioSpec spec = two_class(root);
  const TrialConfig tc = trial_config(ctx);
  for (Engine e : engines(root)) {
    TrialStats s = run_trials(spec, e, tc, ctx.seed);
    const std::string stem = ctx.stem("trials", to_string(e));
    write_text(ctx.out(stem + ".csv"), csv_line(stats_header(s.names)) + csv_line(stats_cells(s)));
    std::string raw = csv_line(s.names);
    for (const auto& row : s.estimates) {
      std::vector<std::string> cells;
      for (double v : row) cells.push_back(fmt_num(v));
      raw += csv_line(cells);
    }
    write_text(ctx.out(stem + "_estimates.csv"), raw);
    ctx.manifest_results[to_string(e)] = {{"failures", failures_json(s)}};
  }
  return kExitOk;
}

int cmd_deform(Context& ctx) {
  Node root = ctx.root();
  const ScenarioSpec base = two_class(root);
  const TrialConfig tc = trial_config(ctx);
  std::vector<double> eps = {0.0, 0.75, 1.5, 3.0, 3.75, 4.5, 5.25, 6.0};
  if (root.has("epsilons")) eps = root["epsilons"].numbers();
  if (eps.empty()) Node::fail("config.epsilons", "at least one value required");
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (!(eps[i] >= 0.0)) Node::fail("config.epsilons[" + std::to_string(i) + "]", "must be non-negative");
  for (Engine e : engines(root)) {
    std::string text;
    Json fails = Json::array();
    for (std::size_t i = 0; i < eps.size(); ++i) {
      ScenarioSpec s = base;
      s.epsilon = eps[i];
      // Same seed at every epsilon: the sweep shares its Gaussian draws.
      TrialStats st = run_trials(s, e, tc, ctx.seed);
      if (i == 0) {
        std::vector<std::string> h{"epsilon"};
        for (auto& c : stats_header(st.names)) h.push_back(c);
        text += csv_line(h);
      }
      std::vector<std::string> row{fmt_num(eps[i])};
      for (auto& c : stats_cells(st)) row.push_back(c);
      text += csv_line(row);
      fails.push_back(failures_json(st));
    }
    write_text(ctx.out(ctx.stem("deform", to_string(e)) + ".csv"), text);
    ctx.manifest_results[to_string(e)] = {{"failures", fails}};
  }
  return kExitOk;
}

// ---- overlap ----------------------------------------------------------------

int cmd_overlap(Context& ctx) {
  Node root = ctx.root();
  const ScenarioSpec base = two_class(root);
  std::vector<double> seps = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  if (root.has("separations")) seps = root["separations"].numbers();
  if (seps.size() < 2) Node::fail("config.separations", "at least two separations required");
  const bool fit = root.has("fit_phase") ? [&] {
    const Json& j = ctx.config.at("fit_phase");
    if (!j.is_boolean()) Node::fail("config.fit_phase", "expected true or false");
    return j.get<bool>();
  }()
                                         : true;
  auto rows = overlap_sweep(base, seps, ctx.seed, convergence(root), fit);
  std::string text = csv_line({"separation", "overlap", "cos_phi", "alpha1", "alpha2", "converged"});
  for (const auto& r : rows) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    text += csv_line({fmt_num(r.separation), fmt_num(r.overlap), fmt_num(r.fitted ? r.cos_phi : nan),
                      fmt_num(r.fitted ? r.alpha1 : nan), fmt_num(r.fitted ? r.alpha2 : nan),
                      r.fitted ? (r.converged ? "1" : "0") : ""});
  }
  write_text(ctx.out(ctx.stem("overlap", "quantum") + ".csv"), text);
  return kExitOk;
}

// ---- landscape --------------------------------------------------------------

int cmd_landscape(Context& ctx) {
  Node root = ctx.root();
  ScenarioSpec spec = two_class(root);
  spec.seed = ctx.seed;
  LandscapeConfig lc;
  lc.init_mu1x = root.number_or("init_mu1x", lc.init_mu1x);
  lc.mu_step = root.number_or("mu_step", lc.mu_step);
  lc.alpha_step = root.number_or("alpha_step", lc.alpha_step);
  lc.true_alpha_step = root.number_or("true_alpha_step", lc.true_alpha_step);
  lc.convergence = convergence(root);
  for (auto [key, v] : {std::pair{"mu_step", lc.mu_step}, {"alpha_step", lc.alpha_step},
                        {"true_alpha_step", lc.true_alpha_step}})
    if (!(v > 0.0 && v < 1.0)) Node::fail(std::string("config.") + key, "must lie in (0, 1)");
  const LabeledDataset data = generate(spec);
  for (Engine e : engines(root)) {
    LandscapeGrid g = landscape_scan(data.data, spec, e, lc);
    std::vector<std::string> head{"mu1x"};
    for (double a : g.axis2) head.push_back(fmt_num(a));
    std::string text = csv_line(head);
    for (std::size_t i = 0; i < g.axis1.size(); ++i) {
      std::vector<std::string> row{fmt_num(g.axis1[i])};
      for (std::size_t j = 0; j < g.axis2.size(); ++j)
        row.push_back(fmt_num(g.objective(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
      text += csv_line(row);
    }
    const std::string stem = ctx.stem("landscape", to_string(e));
    write_text(ctx.out(stem + ".csv"), text);
    std::string axis = csv_line({"alpha1", "cos_phi"});
    for (std::size_t j = 0; j < g.axis2.size(); ++j) axis += csv_line({fmt_num(g.axis2[j]), fmt_num(g.axis2_cos[j])});
    write_text(ctx.out(stem + "_alpha.csv"), axis);
    ctx.manifest_results[to_string(e)] = {{"initial_objective", num(g.initial)},
                                          {"final_objective", num(g.final_value)},
                                          {"true_objective", num(g.truth)},
                                          {"final_mu1x", num(g.final_mu1x)},
                                          {"final_alpha1", num(g.final_alpha1)},
                                          {"converged", g.converged}};
  }
  return kExitOk;
}

// ---- segment ----------------------------------------------------------------

GaussianClass color_class(const Node& n) {
  const Eigen::VectorXd mu = n["mu"].per_axis(3);
  const Eigen::VectorXd sigma = n["sigma"].per_axis(3);
  if (!((sigma.array() > 0.0).all())) Node::fail(n.path() + ".sigma", "must be positive");
  return {mu, Eigen::MatrixXd(sigma.array().square().matrix().asDiagonal())};
}

Json estimate_json(const ClassEstimate& c) {
  return {{"mu", vec_json(c.mu)}, {"var", vec_json(c.var)}, {"count", num(c.count)}};
}

int cmd_segment(Context& ctx) {
  Node root = ctx.root();
  const GaussianClass black = color_class(root["black"]);
  const GaussianClass white = color_class(root["white"]);
  BinaryMask mask;
  Json source;
  if (root.has("image")) {
    const fs::path p = ctx.input(root["image"].string());
    const int threshold = static_cast<int>(root.integer_or("threshold", 100, 0));
    try {
      mask = binarize(read_png(p.string()), threshold);
    } catch (const Error& e) {
      throw UsageError("config.image: " + std::string(e.what()));
    }
    source = {{"image", root["image"].string()}, {"threshold", threshold}};
  } else {
    Node m = root["mask"];
    const int w = static_cast<int>(m["width"].integer(1)), h = static_cast<int>(m["height"].integer(1));
    const long nb = m["n_black"].integer(0);
    if (nb > static_cast<long>(w) * h) Node::fail(m.path() + ".n_black", "exceeds the pixel count");
    mask = skyline_mask(w, h, nb, derive_seed(ctx.seed, 0));
    source = {{"skyline", {{"width", w}, {"height", h}, {"n_black", nb}}}};
  }
  ColoredImage ci = colorize(mask, black, white, derive_seed(ctx.seed, 1));
  ColorTruth truth{black, white, ci.truth, ci.n_white, ci.n_black};

  RgbImage rgb{ci.image.width(), ci.image.height(), 8, std::vector<std::uint8_t>(3 * ci.image.pixels())};
  for (long i = 0; i < ci.image.pixels(); ++i) {
    const auto& l = ci.image.lab();
    SrgbResult c = lab_to_srgb({l[3 * i], l[3 * i + 1], l[3 * i + 2]});
    for (int k = 0; k < 3; ++k) rgb.data[3 * i + k] = c.rgb[k];
  }
  write_png(ctx.out("segment_input_" + std::to_string(ctx.seed) + ".png").string(), rgb);

  SegmentConfig sc;
  sc.trials = static_cast<int>(root.integer_or("trials", 1, 1));
  sc.convergence = convergence(root);
  std::map<std::string, SegmentationResult> results;
  Json per_engine = Json::object();
  for (Engine e : engines(root)) {
    SegmentationResult r = segment(ci.image, e, derive_seed(ctx.seed, 2), &truth, sc);
    write_mask_png(ctx.out(ctx.stem("segment", to_string(e)) + ".png").string(), r.mask);
    per_engine[to_string(e)] = {{"black", estimate_json(r.black)},
                                {"white", estimate_json(r.white)},
                                {"objective", num(r.objective)},
                                {"converged", r.converged},
                                {"misassigned", r.misassigned}};
    results.emplace(to_string(e), std::move(r));
  }

  Json table = Json::array();
  if (results.size() == 2) {
    const SegmentationResult& c = results.at("classical");
    const SegmentationResult& q = results.at("quantum");
    auto row = [&](const char* name, double ce, double qe) {
      table.push_back({{"parameter", name},
                       {"classical_error", num(ce)},
                       {"quantum_error", num(qe)},
                       {"relative_error", num(qe / ce)}});
    };
    row("mu_black", c.err_mu_black, q.err_mu_black);
    row("mu_white", c.err_mu_white, q.err_mu_white);
    row("var_black", c.err_var_black, q.err_var_black);
    row("var_white", c.err_var_white, q.err_var_white);
    row("n_black", c.err_n_black, q.err_n_black);
    row("n_white", c.err_n_white, q.err_n_white);
    row("misassigned", static_cast<double>(c.misassigned), static_cast<double>(q.misassigned));
  }
  Json out = {{"seed", ctx.seed},
              {"source", source},
              {"ground_truth",
               {{"black", to_json(black)},
                {"white", to_json(white)},
                {"n_black", truth.n_black},
                {"n_white", truth.n_white}}},
              {"engines", per_engine},
              {"errors", table}};
  write_text(ctx.out(ctx.stem("segment", "table") + ".json"), dump(out));
  return kExitOk;
}

}  // namespace

int run(const Options& opt) {
  static const std::map<std::string, std::function<int(Context&)>> commands = {
      {"generate", cmd_generate}, {"fit", cmd_fit},           {"trials", cmd_trials},  {"overlap", cmd_overlap},
      {"landscape", cmd_landscape}, {"deform", cmd_deform}, {"segment", cmd_segment}};
  auto it = commands.find(opt.command);
  if (it == commands.end()) throw UsageError("unknown command '" + opt.command + "'");

  Context ctx;
  ctx.opt = opt;
  std::ifstream f(opt.config_path);
  if (!f) throw UsageError("--config: cannot read " + opt.config_path);
  try {
    ctx.config = Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw UsageError("--config: invalid JSON: " + std::string(e.what()));
  }
  if (!ctx.config.is_object()) Node::fail("config", "expected a JSON object");
  ctx.config_dir = fs::absolute(opt.config_path).parent_path();
  if (opt.seed) ctx.seed = *opt.seed;
  else if (ctx.config.contains("seed")) ctx.seed = ctx.root()["seed"].seed();
  else Node::fail("config.seed", "required (or pass --seed)");

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec || !fs::is_directory(opt.out_dir)) throw UsageError("--out: cannot create " + opt.out_dir);

  const int code = it->second(ctx);
  Json manifest = {{"command", opt.command}, {"version", kVersion}, {"seed", ctx.seed}, {"config", ctx.config},
                   {"outputs", ctx.outputs}, {"results", ctx.manifest_results}};
  write_text(fs::path(opt.out_dir) / (opt.command + "_manifest_" + std::to_string(ctx.seed) + ".json"), dump(manifest));
  return code;
}

}  // namespace qmix::cli
