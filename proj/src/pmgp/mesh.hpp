#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <vector>

namespace pmgp {

struct TriMesh {
  Eigen::MatrixX3d vertices;
  Eigen::MatrixX3i faces;

  Eigen::Index n_vertices() const { return vertices.rows(); }
  Eigen::Index n_faces() const { return faces.rows(); }
};

// Throws unless every face references three distinct valid vertices, has
// positive area, and every vertex is used by some face.
void validate_mesh(const TriMesh& mesh);

// Reads an ASCII OFF file, or a directory holding vertices.csv and faces.csv.
TriMesh load_mesh(const std::filesystem::path& path);
TriMesh load_mesh_csv(const std::filesystem::path& vertices_csv, const std::filesystem::path& faces_csv);
void save_off(const std::filesystem::path& path, const TriMesh& mesh);

// Loop-style subdivided icosahedron projected onto a sphere of the given radius.
// Level 3 has 642 vertices.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);

struct CotanLaplacian {
  // W_ij = (cot a_ij + cot b_ij) / 2 off the diagonal, W_ii = -sum_j W_ij.
  Eigen::SparseMatrix<double> stiffness;
  // Mixed Voronoi cell areas.
  Eigen::VectorXd mass;
};

CotanLaplacian cotangent_laplacian(const TriMesh& mesh);

// Eigenpairs of L = -diag(mass)^{-1} W, ascending, mass-orthonormal.
struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // N x k
  Eigen::VectorXd mass;

  Eigen::Index n_vertices() const { return eigenvectors.rows(); }
  Eigen::Index n_modes() const { return eigenvectors.cols(); }
};

LaplacianSpectrum eigen_spectrum(const Eigen::SparseMatrix<double>& stiffness, const Eigen::VectorXd& mass,
                                 Eigen::Index k);

// 200 modes, or all of them for meshes with at most 400 vertices.
Eigen::Index default_mode_count(Eigen::Index n_vertices);

// Keeps the k lowest modes.
LaplacianSpectrum truncate(const LaplacianSpectrum& spectrum, Eigen::Index k);

double bounding_diagonal(const TriMesh& mesh);

// Undirected adjacency lists from the face list.
std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh);

// Shortest path lengths along mesh edges from one vertex.
Eigen::VectorXd edge_geodesic_distances(const TriMesh& mesh, int source);

}  // namespace pmgp
