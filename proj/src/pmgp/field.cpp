#include "pmgp/field.hpp"

#include "pmgp/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pmgp {

using json = nlohmann::json;

Tensor3 mode_n_contract(const Tensor3& core, const Eigen::MatrixXd& m1, const Eigen::MatrixXd& m2,
                        const Eigen::MatrixXd& m3) {
  if (m1.cols() != core.dim1() || m2.cols() != core.dim2() || m3.cols() != core.dim3()) {
    fail(ErrorKind::InvalidArgument, "mode_n_contract: dimension mismatch");
  }
  // Modes 1 and 2 per frontal slice, then mode 3 as a linear combination of slices.
  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(core.dim3()));
  for (Index k = 0; k < core.dim3(); ++k) {
    partial[static_cast<std::size_t>(k)] = m1 * core.slice(k) * m2.transpose();
  }
  Tensor3 out(m1.rows(), m2.rows(), m3.rows());
  for (Index c = 0; c < m3.rows(); ++c) {
    auto dst = out.slice(c);
    dst.setZero();
    for (Index k = 0; k < core.dim3(); ++k) {
      const double w = m3(c, k);
      if (w != 0.0) dst += w * partial[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

FieldTensor::FieldTensor(std::vector<std::string> task_labels, std::vector<int> ids, std::vector<double> stamps)
    : values(static_cast<Index>(stamps.size()), static_cast<Index>(ids.size()),
             static_cast<Index>(task_labels.size())),
      tasks(std::move(task_labels)),
      space_ids(std::move(ids)),
      times(std::move(stamps)) {}

void FieldTensor::validate() const {
  if (values.dim1() != n_time() || values.dim2() != n_space() || values.dim3() != n_tasks()) {
    fail(ErrorKind::InvalidArgument, "field tensor: value dimensions do not match index sets");
  }
  for (double x : values.data()) {
    if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, "field tensor: non-finite value");
  }
}

std::vector<std::string> default_task_labels() { return {"u", "v"}; }

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex_digest(fnv1a(bytes.data(), bytes.size()));
}

namespace {

std::uint64_t to_little_endian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((x >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
}

template <typename T>
T header_field(const json& h, const char* name) {
  if (!h.contains(name)) fail(ErrorKind::Parse, std::string("field header: missing '") + name + "'");
  try {
    return h.at(name).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Parse, std::string("field header: malformed '") + name + "'");
  }
}

}  // namespace

void write_field(const std::filesystem::path& path, const FieldTensor& field, const FieldHeader& header) {
  field.validate();
  json h;
  h["format"] = "pmgp-field";
  h["dims"] = {field.n_tasks(), field.n_space(), field.n_time()};
  h["tasks"] = field.tasks;
  h["vertex_count"] = header.vertex_count;
  h["space_ids"] = field.space_ids;
  h["times"] = field.times;
  h["seed"] = header.seed;
  h["config_hash"] = header.config_hash;

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << h.dump() << '\n';
  for (double x : field.values.data()) {
    std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(x));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

FieldTensor read_field(const std::filesystem::path& path, FieldHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "field header: empty file " + path.string());
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception&) {
    fail(ErrorKind::Parse, "field header: not valid JSON in " + path.string());
  }
  if (!h.is_object()) fail(ErrorKind::Parse, "field header: not a JSON object");

  auto dims = header_field<std::vector<std::int64_t>>(h, "dims");
  auto tasks = header_field<std::vector<std::string>>(h, "tasks");
  auto ids = header_field<std::vector<int>>(h, "space_ids");
  auto times = header_field<std::vector<double>>(h, "times");
  auto vertex_count = header_field<std::int64_t>(h, "vertex_count");
  if (dims.size() != 3) fail(ErrorKind::Parse, "field header: 'dims' must have 3 entries");
  if (dims[0] != static_cast<std::int64_t>(tasks.size())) {
    fail(ErrorKind::Parse, "field header: 'tasks' does not match dims[0]");
  }
  if (dims[1] != static_cast<std::int64_t>(ids.size())) {
    fail(ErrorKind::Parse, "field header: 'space_ids' does not match dims[1]");
  }
  if (dims[2] != static_cast<std::int64_t>(times.size())) {
    fail(ErrorKind::Parse, "field header: 'times' does not match dims[2]");
  }
  if (header) {
    header->vertex_count = vertex_count;
    header->seed = h.contains("seed") ? header_field<std::uint64_t>(h, "seed") : 0;
    header->config_hash = h.contains("config_hash") ? header_field<std::string>(h, "config_hash") : "";
  }

  FieldTensor field(std::move(tasks), std::move(ids), std::move(times));
  for (double& x : field.values.data()) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      fail(ErrorKind::Parse, "field payload: truncated data in " + path.string());
    }
    x = std::bit_cast<double>(to_little_endian(bits));
  }
  field.validate();
  return field;
}

void write_field_csv(const std::filesystem::path& path, const FieldTensor& field) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "task,vertex,time,value\n";
  out << std::setprecision(17);
  for (Index f = 0; f < field.n_tasks(); ++f) {
    for (Index s = 0; s < field.n_space(); ++s) {
      for (Index t = 0; t < field.n_time(); ++t) {
        out << field.tasks[static_cast<std::size_t>(f)] << ',' << field.space_ids[static_cast<std::size_t>(s)]
            << ',' << field.times[static_cast<std::size_t>(t)] << ',' << field.at(f, s, t) << '\n';
      }
    }
  }
}

}  // namespace pmgp
