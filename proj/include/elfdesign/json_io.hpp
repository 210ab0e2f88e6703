#pragma once

#include "elfdesign/design.hpp"
#include "elfdesign/model.hpp"
#include "elfdesign/simulate.hpp"
#include "elfdesign/solver.hpp"
#include "elfdesign/verify.hpp"

#include <json.hpp>

#include <string>

namespace elfdesign {

using Json = nlohmann::ordered_json;

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);

/// {"points": [...], "weights": [...]}
Json to_json(const Design& d);
Json to_json(const HyperplaneCheck& h);
Json to_json(const OptimalityCertificate& c);
Json to_json(const ElfvingRepresentation& r);
/// Design fields at the top level followed by the remaining solve output, so
/// the document is itself a valid design file.
Json to_json(const SolveResult& r);
Json to_json(const CovarianceReport& r);
Json to_json(const ModelGradientCheck& g);

/// Reads {"points", "weights"}; extra keys are ignored so solve output is
/// accepted as is. `where` prefixes error messages.
Design design_from_json(const Json& j, const std::string& where = "design");

/// Parses a design file.
Design load_design(const std::string& path);

/// Reads and parses a JSON file; I/O and syntax errors become ValidationError
/// naming the file.
Json read_json_file(const std::string& path);

}  // namespace elfdesign
