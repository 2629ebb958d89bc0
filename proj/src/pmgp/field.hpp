#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pmgp {

using Index = Eigen::Index;

// Dense 3-way array with the first mode fastest in memory. A (time, space, task)
// tensor therefore shares its memory layout with the stacked vec(y) used by the
// Kronecker covariance algebra.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index n1, Index n2, Index n3, double fill = 0.0)
      : n1_(n1), n2_(n2), n3_(n3), data_(static_cast<std::size_t>(n1 * n2 * n3), fill) {}

  Index dim1() const { return n1_; }
  Index dim2() const { return n2_; }
  Index dim3() const { return n3_; }
  Index size() const { return n1_ * n2_ * n3_; }

  double& operator()(Index i, Index j, Index k) { return data_[static_cast<std::size_t>(i + n1_ * (j + n2_ * k))]; }
  double operator()(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>(i + n1_ * (j + n2_ * k))];
  }

  // Frontal slice k as an n1 x n2 column-major matrix.
  Eigen::Map<Eigen::MatrixXd> slice(Index k) { return {data_.data() + n1_ * n2_ * k, n1_, n2_}; }
  Eigen::Map<const Eigen::MatrixXd> slice(Index k) const { return {data_.data() + n1_ * n2_ * k, n1_, n2_}; }

  Eigen::Map<Eigen::VectorXd> flat() { return {data_.data(), size()}; }
  Eigen::Map<const Eigen::VectorXd> flat() const { return {data_.data(), size()}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  Index n1_ = 0, n2_ = 0, n3_ = 0;
  std::vector<double> data_;
};

// result(a,b,c) = sum_{i,j,k} m1(a,i) m2(b,j) m3(c,k) core(i,j,k), i.e. the
// mode-1, mode-2 and mode-3 products in sequence. Equivalent to applying
// (m3 kron m2 kron m1) to the flattened core.
Tensor3 mode_n_contract(const Tensor3& core, const Eigen::MatrixXd& m1, const Eigen::MatrixXd& m2,
                        const Eigen::MatrixXd& m3);

// Field values over (task, vertex, time). Storage is a (time, space, task)
// Tensor3, so time is fastest, then space, then task.
struct FieldTensor {
  Tensor3 values;
  std::vector<std::string> tasks;
  std::vector<int> space_ids;
  std::vector<double> times;

  FieldTensor() = default;
  FieldTensor(std::vector<std::string> task_labels, std::vector<int> ids, std::vector<double> stamps);

  Index n_tasks() const { return static_cast<Index>(tasks.size()); }
  Index n_space() const { return static_cast<Index>(space_ids.size()); }
  Index n_time() const { return static_cast<Index>(times.size()); }

  double& at(Index task, Index space, Index time) { return values(time, space, task); }
  double at(Index task, Index space, Index time) const { return values(time, space, task); }

  // n_time x n_space block of one task.
  Eigen::Map<Eigen::MatrixXd> task_block(Index task) { return values.slice(task); }
  Eigen::Map<const Eigen::MatrixXd> task_block(Index task) const { return values.slice(task); }

  // Throws when dimensions disagree with the index sets or a value is not finite.
  void validate() const;
};

std::vector<std::string> default_task_labels();

// Metadata stored alongside a field in the binary container.
struct FieldHeader {
  std::int64_t vertex_count = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void write_field(const std::filesystem::path& path, const FieldTensor& field, const FieldHeader& header);
FieldTensor read_field(const std::filesystem::path& path, FieldHeader* header = nullptr);
void write_field_csv(const std::filesystem::path& path, const FieldTensor& field);

// 64-bit FNV-1a, used for config hashes and file digests.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t h);
std::string file_digest(const std::filesystem::path& path);

}  // namespace pmgp
