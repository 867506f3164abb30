#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltra/problems.hpp"
#include "voltra/trajectory.hpp"
#include "voltra/verify.hpp"

namespace voltra {

/// Insertion-ordered JSON so identical inputs serialize byte-identically.
using Json = nlohmann::ordered_json;

/// Shortest exact decimal form of a double, stable across runs.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << content;
}

/// Node table of a trajectory. Interval-first nodes are the right limits of
/// their starting boundary, interval-last nodes the left limits of their
/// ending one; everything else is interior.
inline std::string trajectory_csv(const Trajectory& x) {
  const TimeMesh& mesh = *x.mesh;
  const int n = static_cast<int>(x.values.cols());
  std::string out = "interval_index,t,side";
  for (int c = 1; c <= n; ++c) out += ",x_" + std::to_string(c);
  out += "\n";
  for (int u = 0; u < mesh.size(); ++u) {
    const int k = mesh.node_in_interval(u);
    const char* side = (k == 0) ? "right"
                     : (k == mesh.points_per_interval() - 1) ? "left"
                                                             : "interior";
    out += std::to_string(mesh.interval(u));
    out += ',';
    out += fmt17(mesh.time(u));
    out += ',';
    out += side;
    for (int c = 0; c < n; ++c) {
      out += ',';
      out += fmt17(x.values(u, c));
    }
    out += '\n';
  }
  return out;
}

inline Json to_json(const VectorXd& v) {
  Json a = Json::array();
  for (int c = 0; c < v.size(); ++c) a.push_back(v[c]);
  return a;
}

inline Json to_json(const RowVectorXd& v) {
  Json a = Json::array();
  for (int c = 0; c < v.size(); ++c) a.push_back(v[c]);
  return a;
}

inline Json to_json(const ControlPolicy& p) {
  Json a = Json::array();
  for (const auto& ai : p.a) a.push_back(to_json(ai));
  return a;
}

inline Json to_json(const VerificationReport& rep) {
  Json checks = Json::array();
  for (const auto& c : rep.checks)
    checks.push_back(Json{{"name", c.name},
                          {"value", c.value},
                          {"threshold", c.threshold},
                          {"pass", c.pass}});
  Json failures = Json::array();
  for (const auto& c : rep.checks)
    if (!c.pass) failures.push_back(c.name);
  return Json{{"all_pass", rep.all_pass()}, {"failures", failures}, {"checks", checks}};
}

namespace detail {

inline std::vector<double> number_list(const Json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument("config: '" + what + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number())
      throw std::invalid_argument("config: '" + what + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

/// Load a run description: a built-in problem name, parameter overrides, and
/// optional overrides of the horizon, switching times, mesh density, control
/// box, and starting policy. Shape errors throw invalid_argument.
inline BuiltinProblem load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("problem") || !j["problem"].is_string())
    throw std::invalid_argument("config: missing 'problem' name");

  Params params;
  if (j.contains("params")) {
    if (!j["params"].is_object())
      throw std::invalid_argument("config: 'params' must be an object");
    for (const auto& [k, v] : j["params"].items()) {
      if (!v.is_number())
        throw std::invalid_argument("config: parameter '" + k + "' must be a number");
      params[k] = v.get<double>();
    }
  }

  BuiltinProblem b = make_builtin(j["problem"].get<std::string>(), params);

  if (j.contains("T")) {
    if (!j["T"].is_number()) throw std::invalid_argument("config: 'T' must be a number");
    b.T = j["T"].get<double>();
  }
  if (j.contains("tau")) b.tau = detail::number_list(j["tau"], "tau");
  if (j.contains("points_per_interval")) {
    if (!j["points_per_interval"].is_number_integer())
      throw std::invalid_argument("config: 'points_per_interval' must be an integer");
    b.ppi = j["points_per_interval"].get<int>();
  }
  if (j.contains("control_box")) {
    const Json& cb = j["control_box"];
    if (!cb.is_object() || !cb.contains("lo") || !cb.contains("hi"))
      throw std::invalid_argument("config: 'control_box' needs 'lo' and 'hi'");
    auto bound = [&](const char* key) {
      if (cb[key].is_number())
        return VectorXd::Constant(b.spec.m, cb[key].get<double>()).eval();
      auto vals = detail::number_list(cb[key], std::string("control_box.") + key);
      if (static_cast<int>(vals.size()) != b.spec.m)
        throw std::invalid_argument("config: control_box bound length must equal m");
      return Eigen::Map<const VectorXd>(vals.data(), vals.size()).eval();
    };
    b.box = ControlBox(bound("lo"), bound("hi"));
  }

  const int P = static_cast<int>(b.tau.size()) + 1;
  if (j.contains("policy")) {
    const Json& pj = j["policy"];
    if (!pj.is_array()) throw std::invalid_argument("config: 'policy' must be an array");
    ControlPolicy pol;
    for (const auto& entry : pj) {
      if (entry.is_number()) {
        if (b.spec.m != 1)
          throw std::invalid_argument("config: scalar policy entries need m = 1");
        pol.a.push_back(VectorXd::Constant(1, entry.get<double>()));
      } else {
        auto vals = detail::number_list(entry, "policy entry");
        if (static_cast<int>(vals.size()) != b.spec.m)
          throw std::invalid_argument("config: policy entry length must equal m");
        pol.a.push_back(Eigen::Map<const VectorXd>(vals.data(), vals.size()));
      }
    }
    if (static_cast<int>(pol.a.size()) != P)
      throw std::invalid_argument("config: policy needs one entry per interval");
    b.policy = pol;
  } else if (static_cast<int>(b.policy.a.size()) != P) {
    // switching times were overridden: restart from the box center
    ControlPolicy pol;
    for (int i = 0; i < P; ++i) pol.a.push_back(0.5 * (b.box.lo + b.box.hi));
    b.policy = pol;
  }
  return b;
}

}  // namespace voltra
