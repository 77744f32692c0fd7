#pragma once

// JSON forms of the core value types.
//
// Scalar field: {"cell": {"L1","L2","N1","N2"}, "kind": "scalar",
//                "data": [ ... N1*N2 numbers, row-major ... ]}
// Vector field: kind "vector", data holds N1*N2 [x,y,z] triples.
// Surface:      {"cell", "p1", "p2", "xtilde": <vector field>}

#include <isoshell/cellgrid.hpp>
#include <isoshell/surface.hpp>

#include <json.hpp>

namespace isoshell {

inline nlohmann::ordered_json to_json(const UnitCell& c) {
  return {{"L1", c.L1}, {"L2", c.L2}, {"N1", c.N1}, {"N2", c.N2}};
}

inline UnitCell cell_from_json(const nlohmann::json& j) {
  return UnitCell(j.at("L1").get<double>(), j.at("L2").get<double>(), j.at("N1").get<int>(),
                  j.at("N2").get<int>());
}

inline nlohmann::ordered_json to_json(const ScalarField& f) {
  nlohmann::ordered_json j;
  j["cell"] = to_json(f.cell());
  j["kind"] = "scalar";
  auto data = nlohmann::ordered_json::array();
  for (int i = 0; i < f.cell().N1; ++i)
    for (int k = 0; k < f.cell().N2; ++k) data.push_back(f(i, k));
  j["data"] = std::move(data);
  return j;
}

inline nlohmann::ordered_json to_json(const VectorField& f) {
  nlohmann::ordered_json j;
  j["cell"] = to_json(f.cell());
  j["kind"] = "vector";
  auto data = nlohmann::ordered_json::array();
  for (int i = 0; i < f.cell().N1; ++i)
    for (int k = 0; k < f.cell().N2; ++k) {
      const Eigen::Vector3d v = f.at(i, k);
      data.push_back({v.x(), v.y(), v.z()});
    }
  j["data"] = std::move(data);
  return j;
}

inline ScalarField scalar_field_from_json(const nlohmann::json& j) {
  const UnitCell cell = cell_from_json(j.at("cell"));
  if (j.at("kind").get<std::string>() != "scalar")
    throw ValidationError("expected a scalar field");
  const auto& data = j.at("data");
  if (static_cast<int>(data.size()) != cell.samples())
    throw ValidationError("field data length does not match the cell resolution");
  Eigen::MatrixXd s(cell.N1, cell.N2);
  int idx = 0;
  for (int i = 0; i < cell.N1; ++i)
    for (int k = 0; k < cell.N2; ++k) s(i, k) = data.at(idx++).get<double>();
  return ScalarField(cell, std::move(s));
}

inline VectorField vector_field_from_json(const nlohmann::json& j) {
  const UnitCell cell = cell_from_json(j.at("cell"));
  if (j.at("kind").get<std::string>() != "vector")
    throw ValidationError("expected a vector field");
  const auto& data = j.at("data");
  if (static_cast<int>(data.size()) != cell.samples())
    throw ValidationError("field data length does not match the cell resolution");
  VectorField f = VectorField::zero(cell);
  int idx = 0;
  for (int i = 0; i < cell.N1; ++i)
    for (int k = 0; k < cell.N2; ++k) {
      const auto& t = data.at(idx++);
      for (int c = 0; c < 3; ++c) f.comp(c)(i, k) = t.at(c).get<double>();
    }
  return f;
}

inline nlohmann::ordered_json to_json(const PeriodicSurface& x) {
  nlohmann::ordered_json j;
  j["cell"] = to_json(x.cell());
  j["p1"] = {x.p1().x(), x.p1().y(), x.p1().z()};
  j["p2"] = {x.p2().x(), x.p2().y(), x.p2().z()};
  j["xtilde"] = to_json(x.corrugation());
  return j;
}

inline PeriodicSurface surface_from_json(const nlohmann::json& j) {
  auto vec3 = [](const nlohmann::json& a) {
    return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
  };
  return PeriodicSurface(vec3(j.at("p1")), vec3(j.at("p2")),
                         vector_field_from_json(j.at("xtilde")));
}

}  // namespace isoshell
