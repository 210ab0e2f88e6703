#include "elfdesign/json_io.hpp"

#include "elfdesign/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace elfdesign {
namespace {

std::vector<double> number_array(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ValidationError(where + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

}  // namespace

Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i))));
  return a;
}

Json to_json(const Design& d) {
  return Json{{"points", d.points()}, {"weights", d.weights()}};
}

Json to_json(const HyperplaneCheck& h) {
  return Json{{"pass", h.pass},
              {"gamma_c_d", h.gamma_c_d},
              {"max_value", h.max_value},
              {"argmax_x", h.argmax_x}};
}

Json to_json(const OptimalityCertificate& c) {
  Json j{{"criterion", c.criterion},
         {"max_sensitivity", c.max_sensitivity},
         {"argmax_x", c.argmax_x},
         {"support_residuals", c.support_residuals},
         {"efficiency_lower_bound", c.efficiency_lower_bound},
         {"duality_gap", c.duality_gap ? Json(*c.duality_gap) : Json(nullptr)},
         {"grid_size", c.grid_size},
         {"tol", c.tol},
         {"pass", c.pass}};
  if (c.hyperplane) j["hyperplane"] = to_json(*c.hyperplane);
  j["optimal"] = c.optimal;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

Json to_json(const ElfvingRepresentation& r) {
  Json terms = Json::array();
  for (const auto& t : r.terms)
    terms.push_back(Json{{"x", t.generator.x},
                         {"eps", to_json(t.generator.eps)},
                         {"lambda", t.lambda}});
  return Json{{"gamma", r.gamma},
              {"d", to_json(r.d)},
              {"lp_iterations", r.lp_iterations},
              {"terms", terms}};
}

Json to_json(const SolveResult& r) {
  Json j = to_json(r.design);
  Json eps = Json::array();
  for (const auto& e : r.eps) eps.push_back(to_json(e));
  j["eps"] = eps;
  j["criterion"] = r.criterion_value;
  j["gamma"] = r.gamma;
  j["rounds_used"] = r.rounds_used;
  j["converged"] = r.converged;
  j["certificate"] = to_json(r.certificate);
  j["representation"] = to_json(r.representation);
  j["dual_source"] = r.dual_source;
  return j;
}

Json to_json(const CovarianceReport& r) {
  return Json{{"N", r.n},
              {"reps", r.reps},
              {"seed", r.seed},
              {"failures", r.failures},
              {"empirical_mean", r.empirical_mean},
              {"empirical_var", r.empirical_var},
              {"asymptotic_var", r.asymptotic_var},
              {"ratio", r.ratio}};
}

Json to_json(const ModelGradientCheck& g) {
  Json entries = Json::array();
  for (const auto& e : g.entries)
    entries.push_back(
        Json{{"expression", e.name}, {"grad_error", e.grad_error}, {"hess_error", e.hess_error}});
  return Json{{"draws", g.draws},
              {"skipped", g.skipped},
              {"expressions", entries},
              {"grad_error", g.grad_error},
              {"hess_error", g.hess_error},
              {"pass", g.pass()}};
}

Design design_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  if (!j.contains("points")) throw ValidationError(where + ".points: missing");
  if (!j.contains("weights")) throw ValidationError(where + ".weights: missing");
  auto points = number_array(j["points"], where + ".points");
  auto weights = number_array(j["weights"], where + ".weights");
  if (points.size() != weights.size())
    throw ValidationError(where + ".weights: expected " + std::to_string(points.size()) +
                          " entries, got " + std::to_string(weights.size()));
  if (points.empty()) throw ValidationError(where + ".points: design has no support points");
  try {
    return Design(std::move(points), std::move(weights));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
}

Design load_design(const std::string& path) {
  return design_from_json(read_json_file(path), path);
}

}  // namespace elfdesign
