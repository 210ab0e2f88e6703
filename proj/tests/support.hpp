#pragma once

#include "elfdesign/model.hpp"

#include <Eigen/Dense>

#include <string>

namespace testing {

inline std::string fixture(const std::string& name) {
  return std::string(ELFDESIGN_FIXTURE_DIR) + "/" + name;
}

inline elfdesign::ModelDescription mm41_desc() {
  elfdesign::ModelDescription d;
  d.family = "heteroscedastic";
  d.mean = "t1*x/(t2+x)";
  d.variance = "exp(-t3*x)";
  d.theta0 = Eigen::Vector3d(3, 1.7, 0.1);
  d.design_space = {0, 10};
  return d;
}

inline elfdesign::ModelDescription re42_desc() {
  elfdesign::ModelDescription d;
  d.family = "random_effects";
  d.mean = "t1*exp(-t2*x)";
  d.omega = Eigen::Vector2d(1, 0.1).asDiagonal();
  d.sigma2 = 0.04;
  d.theta0 = Eigen::Vector2d(30, 1.7);
  d.design_space = {0, 10};
  return d;
}

inline elfdesign::ModelDescription linear_desc() {
  elfdesign::ModelDescription d;
  d.family = "heteroscedastic";
  d.mean = "t1 + t2*x";
  d.variance = "1";
  d.theta0 = Eigen::Vector2d(0, 1);
  d.design_space = {-1, 1};
  return d;
}

inline elfdesign::ModelDescription link_desc(bool reduced) {
  elfdesign::ModelDescription d;
  d.family = "link";
  d.mean = "t1*exp(-t2*x)";
  d.link.kind = "power";
  d.link.q = 2;
  d.reduced = reduced;
  d.theta0 = Eigen::Vector2d(2, 1);
  d.design_space = {0, 5};
  return d;
}

inline elfdesign::ModelSpec mm41() { return elfdesign::build_model(mm41_desc()); }
inline elfdesign::ModelSpec re42() { return elfdesign::build_model(re42_desc()); }
inline elfdesign::ModelSpec linear() { return elfdesign::build_model(linear_desc()); }
inline elfdesign::ModelSpec link(bool reduced) { return elfdesign::build_model(link_desc(reduced)); }

}  // namespace testing
