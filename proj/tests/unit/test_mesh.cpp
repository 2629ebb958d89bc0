#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pmgp/error.hpp"
#include "pmgp/mesh.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace pmgp;
using Eigen::Index;

namespace {

std::filesystem::path write_text(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / "pmgp_test_mesh";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / name) << text;
  return dir / name;
}

const char* kTetra = R"(OFF
4 4 6
1 1 1
1 -1 -1
-1 1 -1
-1 -1 1
3 0 1 2
3 0 3 1
3 0 2 3
3 1 3 2
)";

TriMesh tetrahedron() { return load_mesh(write_text("tetra.off", kTetra)); }

std::string parse_error(const std::string& text) {
  try {
    load_mesh(write_text("bad.off", text));
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

double max_row_sum(const Eigen::SparseMatrix<double>& w) {
  return (w * Eigen::VectorXd::Ones(w.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("a regular tetrahedron loads with 4 vertices and 4 faces") {
  const TriMesh m = tetrahedron();
  CHECK(m.n_vertices() == 4);
  CHECK(m.n_faces() == 4);
  CHECK_NOTHROW(validate_mesh(m));
}

TEST_CASE("OFF parse errors carry line numbers") {
  CHECK(parse_error("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n").find("non-triangular face") != std::string::npos);
  CHECK(parse_error("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n").find(":6:") != std::string::npos);
  CHECK(parse_error("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n").find(":6:") != std::string::npos);
  CHECK(parse_error("OFF\n3 1 0\n0 0 0\n1 x 0\n").find(":4:") != std::string::npos);
  CHECK(parse_error("PLY\n").find(":1:") != std::string::npos);
}

TEST_CASE("OFF save and load round-trip") {
  const TriMesh m = make_icosphere(1, 2.0);
  const auto dir = std::filesystem::temp_directory_path() / "pmgp_test_mesh";
  save_off(dir / "ico.off", m);
  const TriMesh back = load_mesh(dir / "ico.off");
  CHECK(back.faces == m.faces);
  CHECK((back.vertices - m.vertices).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("CSV mesh pair loads") {
  const auto v = write_text("v.csv", "x,y,z\n0,0,0\n1,0,0\n0,1,0\n0,0,1\n");
  const auto f = write_text("f.csv", "a,b,c\n0,2,1\n0,1,3\n0,3,2\n1,2,3\n");
  const TriMesh m = load_mesh_csv(v, f);
  CHECK(m.n_vertices() == 4);
  CHECK(m.n_faces() == 4);
}

TEST_CASE("validation rejects degenerate and dangling geometry") {
  TriMesh m = tetrahedron();
  m.vertices.row(3) = m.vertices.row(0);
  CHECK_THROWS_AS(validate_mesh(m), Error);

  TriMesh d = tetrahedron();
  d.vertices.conservativeResize(5, 3);
  d.vertices.row(4) << 5, 5, 5;
  CHECK_THROWS_WITH_AS(validate_mesh(d), doctest::Contains("not referenced"), Error);
}

TEST_CASE("cotangent weights on the two-triangle unit square") {
  TriMesh sq;
  sq.vertices.resize(4, 3);
  sq.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
  sq.faces.resize(2, 3);
  sq.faces << 0, 1, 2, 0, 2, 3;
  const CotanLaplacian lap = cotangent_laplacian(sq);
  const Eigen::MatrixXd w(lap.stiffness);
  CHECK(std::abs(w(0, 2)) <= 1e-15);
  CHECK(w(0, 1) == doctest::Approx(0.5));
  CHECK(w(1, 2) == doctest::Approx(0.5));
  CHECK(w(2, 3) == doctest::Approx(0.5));
  CHECK(w(3, 0) == doctest::Approx(0.5));
  CHECK(max_row_sum(lap.stiffness) <= 1e-12);
  CHECK(lap.mass.sum() == doctest::Approx(1.0));
}

TEST_CASE("cotangent stiffness is symmetric with zero row sums") {
  for (const TriMesh& m : {tetrahedron(), make_icosphere(2, 1.0)}) {
    const CotanLaplacian lap = cotangent_laplacian(m);
    const Eigen::MatrixXd w(lap.stiffness);
    CHECK((w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(max_row_sum(lap.stiffness) <= 1e-12);
    CHECK((lap.mass.array() > 0).all());
  }
}

TEST_CASE("full tetrahedron spectrum is mass-orthonormal with a constant null mode") {
  const TriMesh m = tetrahedron();
  const CotanLaplacian lap = cotangent_laplacian(m);
  const LaplacianSpectrum s = eigen_spectrum(lap.stiffness, lap.mass, 4);
  const Eigen::MatrixXd gram = s.eigenvectors.transpose() * s.mass.asDiagonal() * s.eigenvectors;
  CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(s.eigenvalues[0] == 0.0);
  const Eigen::VectorXd phi1 = s.eigenvectors.col(0);
  CHECK(phi1.maxCoeff() - phi1.minCoeff() <= 1e-10);
  for (Index j = 1; j < 4; ++j) CHECK(s.eigenvalues[j] >= s.eigenvalues[j - 1]);
}

TEST_CASE("unit icosphere eigenvalues cluster at l(l+1)") {
  const TriMesh m = make_icosphere(3, 1.0);
  REQUIRE(m.n_vertices() == 642);
  const CotanLaplacian lap = cotangent_laplacian(m);
  const LaplacianSpectrum s = eigen_spectrum(lap.stiffness, lap.mass, 10);
  const double expect[] = {0, 2, 2, 2, 6, 6, 6, 6, 6, 12};
  CHECK(s.eigenvalues[0] == 0.0);
  for (int j = 1; j < 10; ++j) CHECK(std::abs(s.eigenvalues[j] - expect[j]) / expect[j] <= 0.05);
}

TEST_CASE("mode count bounds and truncation") {
  const TriMesh m = tetrahedron();
  const CotanLaplacian lap = cotangent_laplacian(m);
  CHECK_THROWS_AS(eigen_spectrum(lap.stiffness, lap.mass, 0), Error);
  CHECK_THROWS_AS(eigen_spectrum(lap.stiffness, lap.mass, 5), Error);
  const LaplacianSpectrum s = eigen_spectrum(lap.stiffness, lap.mass, 4);
  const LaplacianSpectrum t = truncate(s, 2);
  CHECK(t.n_modes() == 2);
  CHECK(t.eigenvalues == s.eigenvalues.head(2));
  CHECK(default_mode_count(300) == 300);
  CHECK(default_mode_count(1094) == 200);
}

TEST_CASE("edge geodesics on the icosphere grow away from the source") {
  const TriMesh m = make_icosphere(2, 1.0);
  const Eigen::VectorXd d = edge_geodesic_distances(m, 0);
  CHECK(d[0] == 0.0);
  CHECK(d.maxCoeff() >= 3.0);          // at least half a great circle, pi
  CHECK(d.maxCoeff() <= 3.14159 * 1.2);  // edge paths overshoot the geodesic only modestly
  const auto nbrs = vertex_neighbors(m);
  for (int nb : nbrs[0]) CHECK(d[nb] == doctest::Approx((m.vertices.row(nb) - m.vertices.row(0)).norm()));
}
