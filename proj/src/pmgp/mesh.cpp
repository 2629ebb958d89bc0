#include "pmgp/mesh.hpp"

#include "pmgp/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <string>

namespace pmgp {

namespace {

double face_double_area(const TriMesh& mesh, Eigen::Index f) {
  const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
  const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
  const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
  return (b - a).cross(c - a).norm();
}

double max_edge_squared(const TriMesh& mesh, Eigen::Index f) {
  double m = 0.0;
  for (int e = 0; e < 3; ++e) {
    const Eigen::Vector3d p = mesh.vertices.row(mesh.faces(f, e));
    const Eigen::Vector3d q = mesh.vertices.row(mesh.faces(f, (e + 1) % 3));
    m = std::max(m, (p - q).squaredNorm());
  }
  return m;
}

bool degenerate(const TriMesh& mesh, Eigen::Index f) {
  const double scale = max_edge_squared(mesh, f);
  return !(face_double_area(mesh, f) > 1e-12 * scale) || scale == 0.0;
}

// Next non-empty, non-comment line; tracks the 1-based line number.
bool next_content_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, int line_no, const std::string& what) {
  fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + what);
}

TriMesh load_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open mesh " + path.string());
  std::string line;
  int line_no = 0;
  if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "empty file");

  std::istringstream head(line);
  std::string magic;
  head >> magic;
  if (magic != "OFF") parse_error(path, line_no, "expected OFF header");
  long nv = -1, nf = -1, ne = 0;
  if (!(head >> nv)) {
    if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "missing counts line");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) parse_error(path, line_no, "malformed counts line");
    counts >> ne;
  } else if (!(head >> nf)) {
    parse_error(path, line_no, "malformed counts line");
  }
  if (nv <= 0 || nf <= 0) parse_error(path, line_no, "vertex and face counts must be positive");

  TriMesh mesh;
  mesh.vertices.resize(nv, 3);
  mesh.faces.resize(nf, 3);
  for (long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "unexpected end of vertex list");
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) parse_error(path, line_no, "malformed vertex");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) parse_error(path, line_no, "non-finite vertex");
    mesh.vertices.row(i) << x, y, z;
  }
  for (long f = 0; f < nf; ++f) {
    if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "unexpected end of face list");
    std::istringstream ls(line);
    long count = 0;
    if (!(ls >> count)) parse_error(path, line_no, "malformed face");
    if (count != 3) parse_error(path, line_no, "non-triangular face (" + std::to_string(count) + " vertices)");
    long idx[3];
    if (!(ls >> idx[0] >> idx[1] >> idx[2])) parse_error(path, line_no, "malformed face");
    for (long id : idx) {
      if (id < 0 || id >= nv) parse_error(path, line_no, "vertex index " + std::to_string(id) + " out of range");
    }
    mesh.faces.row(f) << static_cast<int>(idx[0]), static_cast<int>(idx[1]), static_cast<int>(idx[2]);
  }
  return mesh;
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path, std::size_t width,
                                               std::vector<int>& line_numbers) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != width) parse_error(path, line_no, "expected " + std::to_string(width) + " columns");
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (c.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_numbers.empty()) {
        line_numbers.push_back(0);  // header row consumed
        continue;
      }
      parse_error(path, line_no, "non-numeric value");
    }
    rows.push_back(std::move(row));
    line_numbers.push_back(line_no);
  }
  if (!line_numbers.empty() && line_numbers.front() == 0) line_numbers.erase(line_numbers.begin());
  return rows;
}

}  // namespace

void validate_mesh(const TriMesh& mesh) {
  const auto n = mesh.n_vertices();
  if (n == 0 || mesh.n_faces() == 0) fail(ErrorKind::InvalidArgument, "mesh: no vertices or faces");
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int id = mesh.faces(f, c);
      if (id < 0 || id >= n) fail(ErrorKind::InvalidArgument, "mesh: face " + std::to_string(f) + " index out of range");
      used[static_cast<std::size_t>(id)] = 1;
    }
    if (mesh.faces(f, 0) == mesh.faces(f, 1) || mesh.faces(f, 1) == mesh.faces(f, 2) ||
        mesh.faces(f, 0) == mesh.faces(f, 2)) {
      fail(ErrorKind::InvalidArgument, "mesh: face " + std::to_string(f) + " repeats a vertex");
    }
    if (degenerate(mesh, f)) fail(ErrorKind::InvalidArgument, "mesh: face " + std::to_string(f) + " has zero area");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)]) {
      fail(ErrorKind::InvalidArgument, "mesh: vertex " + std::to_string(i) + " is not referenced by any face");
    }
  }
}

TriMesh load_mesh(const std::filesystem::path& path) {
  TriMesh mesh;
  if (std::filesystem::is_directory(path)) {
    mesh = load_mesh_csv(path / "vertices.csv", path / "faces.csv");
  } else {
    mesh = load_off(path);
  }
  validate_mesh(mesh);
  return mesh;
}

TriMesh load_mesh_csv(const std::filesystem::path& vertices_csv, const std::filesystem::path& faces_csv) {
  std::vector<int> vlines, flines;
  auto vrows = read_csv_rows(vertices_csv, 3, vlines);
  auto frows = read_csv_rows(faces_csv, 3, flines);
  if (vrows.empty()) fail(ErrorKind::Parse, vertices_csv.string() + ": no vertices");
  if (frows.empty()) fail(ErrorKind::Parse, faces_csv.string() + ": no faces");
  TriMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(vrows.size()), 3);
  for (std::size_t i = 0; i < vrows.size(); ++i) {
    mesh.vertices.row(static_cast<Eigen::Index>(i)) << vrows[i][0], vrows[i][1], vrows[i][2];
  }
  mesh.faces.resize(static_cast<Eigen::Index>(frows.size()), 3);
  for (std::size_t f = 0; f < frows.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const double v = frows[f][static_cast<std::size_t>(c)];
      if (v != std::floor(v) || v < 0 || v >= static_cast<double>(vrows.size())) {
        parse_error(faces_csv, flines[f], "vertex index out of range");
      }
      mesh.faces(static_cast<Eigen::Index>(f), c) = static_cast<int>(v);
    }
  }
  validate_mesh(mesh);
  return mesh;
}

void save_off(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  out << "OFF\n" << mesh.n_vertices() << ' ' << mesh.n_faces() << " 0\n";
  for (Eigen::Index i = 0; i < mesh.n_vertices(); ++i) {
    out << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) {
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  }
}

TriMesh make_icosphere(int subdivisions, double radius) {
  require(subdivisions >= 0, "icosphere: subdivisions must be >= 0");
  require(radius > 0, "icosphere: radius must be positive");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  TriMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = radius * verts[i];
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    mesh.faces.row(static_cast<Eigen::Index>(f)) << faces[f][0], faces[f][1], faces[f][2];
  }
  return mesh;
}

CotanLaplacian cotangent_laplacian(const TriMesh& mesh) {
  const auto n = mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.n_faces() * 12));
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);

  for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) {
    if (degenerate(mesh, f)) fail(ErrorKind::InvalidArgument, "cotangent_laplacian: face " + std::to_string(f) + " is degenerate");
    const int id[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    const Eigen::Vector3d p[3] = {mesh.vertices.row(id[0]), mesh.vertices.row(id[1]), mesh.vertices.row(id[2])};
    const double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();

    double cot[3];
    bool obtuse_at[3];
    for (int c = 0; c < 3; ++c) {
      const Eigen::Vector3d e1 = p[(c + 1) % 3] - p[c];
      const Eigen::Vector3d e2 = p[(c + 2) % 3] - p[c];
      const double dot = e1.dot(e2);
      cot[c] = dot / e1.cross(e2).norm();
      obtuse_at[c] = dot < 0.0;
    }
    // Corner c is opposite the edge (c+1, c+2).
    for (int c = 0; c < 3; ++c) {
      const int a = id[(c + 1) % 3], b = id[(c + 2) % 3];
      const double w = 0.5 * cot[c];
      triplets.emplace_back(a, b, w);
      triplets.emplace_back(b, a, w);
      triplets.emplace_back(a, a, -w);
      triplets.emplace_back(b, b, -w);
    }

    const bool obtuse = obtuse_at[0] || obtuse_at[1] || obtuse_at[2];
    for (int c = 0; c < 3; ++c) {
      double share;
      if (!obtuse) {
        const int j = (c + 1) % 3, k = (c + 2) % 3;
        share = ((p[j] - p[c]).squaredNorm() * cot[k] + (p[k] - p[c]).squaredNorm() * cot[j]) / 8.0;
      } else {
        share = obtuse_at[c] ? area / 2.0 : area / 4.0;
      }
      mass[id[c]] += share;
    }
  }

  CotanLaplacian out;
  out.stiffness.resize(n, n);
  out.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  out.stiffness.makeCompressed();
  out.mass = std::move(mass);
  return out;
}

LaplacianSpectrum eigen_spectrum(const Eigen::SparseMatrix<double>& stiffness, const Eigen::VectorXd& mass,
                                 Eigen::Index k) {
  const auto n = stiffness.rows();
  if (stiffness.cols() != n || mass.size() != n) fail(ErrorKind::InvalidArgument, "eigen_spectrum: dimension mismatch");
  if (k < 1 || k > n) fail(ErrorKind::InvalidArgument, "eigen_spectrum: mode count out of range");
  if ((mass.array() <= 0.0).any()) fail(ErrorKind::InvalidArgument, "eigen_spectrum: mass must be positive");

  const Eigen::VectorXd inv_sqrt_mass = mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd a = -(inv_sqrt_mass.asDiagonal() * Eigen::MatrixXd(stiffness) * inv_sqrt_mass.asDiagonal());
  a = 0.5 * (a + a.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) fail(ErrorKind::IllConditioned, "eigen_spectrum: eigensolver did not converge");

  LaplacianSpectrum spec;
  spec.mass = mass;
  spec.eigenvalues = solver.eigenvalues().head(k);
  spec.eigenvectors = inv_sqrt_mass.asDiagonal() * solver.eigenvectors().leftCols(k);

  const double top = std::max(1.0, std::abs(solver.eigenvalues()(n - 1)));
  for (Eigen::Index j = 0; j < k; ++j) {
    double& lam = spec.eigenvalues(j);
    if (std::abs(lam) < 1e-10 * top) lam = 0.0;
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    spec.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (spec.eigenvectors(arg, j) < 0) spec.eigenvectors.col(j) *= -1.0;
  }
  return spec;
}

Eigen::Index default_mode_count(Eigen::Index n_vertices) { return n_vertices <= 400 ? n_vertices : 200; }

LaplacianSpectrum truncate(const LaplacianSpectrum& spectrum, Eigen::Index k) {
  require(k >= 1 && k <= spectrum.n_modes(), "truncate: mode count out of range");
  LaplacianSpectrum out;
  out.eigenvalues = spectrum.eigenvalues.head(k);
  out.eigenvectors = spectrum.eigenvectors.leftCols(k);
  out.mass = spectrum.mass;
  return out;
}

double bounding_diagonal(const TriMesh& mesh) {
  return (mesh.vertices.colwise().maxCoeff() - mesh.vertices.colwise().minCoeff()).norm();
}

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(mesh.n_vertices()));
  for (Eigen::Index f = 0; f < mesh.n_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int a = mesh.faces(f, c), b = mesh.faces(f, (c + 1) % 3);
      nbrs[static_cast<std::size_t>(a)].push_back(b);
      nbrs[static_cast<std::size_t>(b)].push_back(a);
    }
  }
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nbrs;
}

Eigen::VectorXd edge_geodesic_distances(const TriMesh& mesh, int source) {
  require(source >= 0 && source < mesh.n_vertices(), "edge_geodesic_distances: source out of range");
  const auto nbrs = vertex_neighbors(mesh);
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(mesh.n_vertices(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (int w : nbrs[static_cast<std::size_t>(v)]) {
      const double nd = d + (mesh.vertices.row(v) - mesh.vertices.row(w)).norm();
      if (nd < dist[w]) {
        dist[w] = nd;
        queue.emplace(nd, w);
      }
    }
  }
  return dist;
}

}  // namespace pmgp
