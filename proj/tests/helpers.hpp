#pragma once

#include "tignn/fem.hpp"
#include "tignn/graph.hpp"
#include "tignn/mesh.hpp"
#include "tignn/model.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(TIGNN_TEST_DATA) + "/" + name; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tignn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random state on a mesh: rest plus small perturbations.
inline tignn::StateField random_state(const tignn::SolidMesh& mesh, std::mt19937_64& rng, double amp = 0.1) {
  std::normal_distribution<double> n(0, 1);
  auto s = tignn::StateField::rest(mesh);
  for (int i = 0; i < s.z.rows(); ++i)
    for (int c = 0; c < tignn::kStateDim; ++c) s.z(i, c) += amp * n(rng);
  return s;
}

// One short loaded trajectory on a small beam.
inline tignn::Trajectory short_trajectory(const tignn::SolidMesh& mesh, int node, int nt = 4, double f = 1e5) {
  tignn::LoadCase lc;
  lc.loaded_nodes = {node};
  lc.force_per_node = tignn::Vec3(-f, 0, 0);
  lc.first_step = 0;
  lc.last_step = nt;
  return tignn::fem::simulate(mesh, lc, nt, 5e-2, {tignn::fem::substeps_for(mesh, 5e-2), {}});
}

}  // namespace testing
