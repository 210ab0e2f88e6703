#include "elfdesign/config.hpp"

#include "elfdesign/error.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace elfdesign {
namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ValidationError(path + ": " + msg);
}

// View of one JSON object that remembers its path and the set of keys it
// accepts.
class Obj {
 public:
  Obj(const Json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!allowed.count(key)) fail(sub(key), "unknown key");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  const Json& at(const std::string& key) const {
    if (!has(key)) fail(sub(key), "missing");
    return j_.at(key);
  }

  double number(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number()) fail(sub(key), "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) fail(sub(key), "expected a finite number");
    return d;
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  long long integer(const std::string& key, long long lo, long long hi) const {
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(sub(key), "expected an integer");
    long long i = v.get<long long>();
    if (i < lo || i > hi)
      fail(sub(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return i;
  }
  int integer(const std::string& key, int fallback, int lo, int hi) const {
    return has(key) ? static_cast<int>(integer(key, lo, hi)) : fallback;
  }
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    fail(sub(key), "expected a non-negative integer");
  }

  std::string string(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) fail(sub(key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) fail(sub(key), "expected true or false");
    return v.get<bool>();
  }

  Eigen::VectorXd vector(const std::string& key) const {
    const Json& v = at(key);
    const std::string p = sub(key);
    if (!v.is_array()) fail(p, "expected an array of numbers");
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(p + "[" + std::to_string(i) + "]", "expected a number");
      out[i] = v[i].get<double>();
      if (!std::isfinite(out[i]))
        fail(p + "[" + std::to_string(i) + "]", "expected a finite number");
    }
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& key) const {
    const Json& v = at(key);
    const std::string p = sub(key);
    if (!v.is_array() || v.empty()) fail(p, "expected a non-empty array of rows");
    const std::size_t n = v.size();
    Eigen::MatrixXd out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string rp = p + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != n)
        fail(rp, "expected a row of " + std::to_string(n) + " numbers");
      for (std::size_t j = 0; j < n; ++j) {
        if (!v[i][j].is_number()) fail(rp + "[" + std::to_string(j) + "]", "expected a number");
        out(i, j) = v[i][j].get<double>();
      }
    }
    return out;
  }

  Obj object(const std::string& key, std::set<std::string> allowed) const {
    return Obj(at(key), sub(key), std::move(allowed));
  }

  const std::string& path() const { return path_; }

 private:
  const Json& j_;
  std::string path_;
};

void forbid(const Obj& o, const std::set<std::string>& keys, const std::string& family) {
  for (const auto& k : keys)
    if (o.has(k)) fail(o.sub(k), "not used by the " + family + " family");
}

ModelDescription parse_model(const Obj& o) {
  ModelDescription d;
  d.family = o.string("family");
  d.mean = o.string("mean");
  if (d.family == "heteroscedastic") {
    d.variance = o.string("variance");
    forbid(o, {"omega", "sigma2", "link", "reduced"}, d.family);
  } else if (d.family == "random_effects") {
    d.omega = o.matrix("omega");
    d.sigma2 = o.number("sigma2");
    forbid(o, {"variance", "link", "reduced"}, d.family);
  } else if (d.family == "link") {
    Obj l = o.object("link", {"kind", "q", "value", "derivative"});
    d.link.kind = l.string("kind");
    if (d.link.kind == "power" || d.link.kind == "exponential") {
      d.link.q = l.number("q");
      for (const char* k : {"value", "derivative"})
        if (l.has(k)) fail(l.sub(k), "only used by custom links");
    } else if (d.link.kind == "custom") {
      d.link.value = l.string("value");
      d.link.derivative = l.string("derivative");
      if (l.has("q")) fail(l.sub("q"), "not used by custom links");
    } else {
      fail(l.sub("kind"), "expected power, exponential or custom, got '" + d.link.kind + "'");
    }
    d.reduced = o.boolean("reduced", false);
    forbid(o, {"variance", "omega", "sigma2"}, d.family);
  } else {
    fail(o.sub("family"),
         "expected heteroscedastic, random_effects or link, got '" + d.family + "'");
  }
  d.theta0 = o.vector("theta0");
  Eigen::VectorXd ds = o.vector("design_space");
  if (ds.size() != 2) fail(o.sub("design_space"), "expected [a, b]");
  if (!(ds[0] < ds[1])) fail(o.sub("design_space"), "requires a < b");
  d.design_space = {ds[0], ds[1]};
  if (o.has("p")) d.p = static_cast<int>(o.integer("p", 1, kMaxParameters));
  return d;
}

TargetSpec parse_target(const Obj& o) {
  const bool preset = o.has("preset");
  const bool explicit_c = o.has("c");
  if (preset && explicit_c) fail(o.path(), "give either a preset or an explicit c, not both");
  if (!preset && !explicit_c) fail(o.path(), "expected a preset or an explicit c");
  if (explicit_c) {
    for (const char* k : {"E", "index", "v"})
      if (o.has(k)) fail(o.sub(k), "only used with a preset");
    return o.vector("c");
  }
  const std::string name = o.string("preset");
  auto only = [&](std::set<std::string> keys) {
    for (const char* k : {"E", "index", "v"})
      if (o.has(k) && !keys.count(k)) fail(o.sub(k), "not used by preset '" + name + "'");
  };
  if (name == "med") {
    only({"E"});
    return TargetPreset::med(o.number("E"));
  }
  if (name == "auc") {
    only({});
    return TargetPreset::auc();
  }
  if (name == "single") {
    only({"index"});
    return TargetPreset::single(static_cast<int>(o.integer("index", 1, kMaxParameters)));
  }
  if (name == "linear") {
    only({"v"});
    return TargetPreset::linear(o.vector("v"));
  }
  fail(o.sub("preset"), "expected med, auc, single or linear, got '" + name + "'");
}

constexpr int kBig = std::numeric_limits<int>::max();

}  // namespace

Config parse_config(const Json& j) {
  Obj root(j, "", {"model", "target", "solve", "verify", "simulate", "elfving", "gradcheck"});
  Config c;
  c.model = parse_model(root.object("model", {"family", "mean", "variance", "omega", "sigma2",
                                              "link", "reduced", "theta0", "design_space", "p"}));
  if (root.has("target")) c.target = parse_target(root.object("target", {"preset", "E", "index", "v", "c"}));

  if (root.has("solve")) {
    Obj o = root.object("solve", {"n_x", "n_eps", "max_rounds", "tol", "merge_tol", "seed",
                                  "verify_grid"});
    c.solve.n_x = o.integer("n_x", c.solve.n_x, 2, kBig);
    c.solve.n_eps = o.integer("n_eps", c.solve.n_eps, 2, kBig);
    c.solve.max_rounds = o.integer("max_rounds", c.solve.max_rounds, 1, kBig);
    c.solve.tol = o.number("tol", c.solve.tol);
    if (!(c.solve.tol > 0.0)) fail(o.sub("tol"), "must be positive");
    c.solve.merge_tol = o.number("merge_tol", c.solve.merge_tol);
    if (c.solve.merge_tol < 0.0) fail(o.sub("merge_tol"), "must be non-negative");
    c.solve.seed = o.seed("seed", c.solve.seed);
    c.solve.verify_grid = o.integer("verify_grid", c.solve.verify_grid, 2, kBig);
  }
  if (root.has("verify")) {
    Obj o = root.object("verify", {"grid_n", "tol"});
    c.verify.grid_n = o.integer("grid_n", c.verify.grid_n, 2, kBig);
    c.verify.tol = o.number("tol", c.verify.tol);
    if (!(c.verify.tol > 0.0)) fail(o.sub("tol"), "must be positive");
  }
  if (root.has("simulate")) {
    Obj o = root.object("simulate", {"N", "reps", "seed", "starts"});
    c.simulate.n = o.integer("N", c.simulate.n, 1, kBig);
    c.simulate.reps = o.integer("reps", c.simulate.reps, 100, kBig);
    c.simulate.seed = o.seed("seed", c.simulate.seed);
    c.simulate.starts = o.integer("starts", c.simulate.starts, 1, 1000);
  }
  if (root.has("elfving")) {
    Obj o = root.object("elfving", {"dims", "n_x", "n_eps", "seed"});
    if (o.has("dims")) {
      Eigen::VectorXd dims = o.vector("dims");
      if (dims.size() != 2 && dims.size() != 3) fail(o.sub("dims"), "expected 2 or 3 coordinates");
      c.elfving.dims.clear();
      for (Eigen::Index i = 0; i < dims.size(); ++i) {
        if (dims[i] != std::floor(dims[i]) || dims[i] < 1)
          fail(o.sub("dims") + "[" + std::to_string(i) + "]", "expected a 1-based coordinate");
        c.elfving.dims.push_back(static_cast<int>(dims[i]) - 1);
      }
    }
    c.elfving.n_x = o.integer("n_x", c.elfving.n_x, 2, kBig);
    c.elfving.n_eps = o.integer("n_eps", c.elfving.n_eps, 2, kBig);
    c.elfving.seed = o.seed("seed", c.elfving.seed);
  }
  if (root.has("gradcheck")) {
    Obj o = root.object("gradcheck", {"draws", "seed", "h"});
    c.gradcheck.draws = o.integer("draws", c.gradcheck.draws, 1, kBig);
    c.gradcheck.seed = o.seed("seed", c.gradcheck.seed);
    c.gradcheck.h = o.number("h", c.gradcheck.h);
    if (!(c.gradcheck.h > 0.0)) fail(o.sub("h"), "must be positive");
  }
  return c;
}

Config load_config(const std::string& path) { return parse_config(read_json_file(path)); }

TargetVector resolve_target(const Config& config, const ModelSpec& m) {
  if (!config.target) fail("target", "missing");
  if (const auto* c = std::get_if<Eigen::VectorXd>(&*config.target)) {
    if (c->size() != m.p())
      fail("target.c", "expected " + std::to_string(m.p()) + " entries, got " +
                           std::to_string(c->size()));
    try {
      return TargetVector(*c);
    } catch (const ValidationError& e) {
      fail("target.c", e.what());
    }
  }
  return target_from_preset(m, std::get<TargetPreset>(*config.target));
}

}  // namespace elfdesign
