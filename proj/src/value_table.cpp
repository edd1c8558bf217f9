#include "hgp/value_table.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hgp/errors.hpp"
#include "hgp/text_io.hpp"

namespace hgp {

static_assert(std::endian::native == std::endian::little,
              "value-table files are written in host order, which must be little-endian");

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::k3d: return "3d";
    case ModelTag::k4d: return "4d";
    case ModelTag::kGeneric: return "generic";
  }
  return "unknown";
}

ModelTag model_tag_from_string(const std::string& name) {
  if (name == "3d") return ModelTag::k3d;
  if (name == "4d") return ModelTag::k4d;
  if (name == "generic") return ModelTag::kGeneric;
  throw ConfigError("model: expected 3d or 4d, got '" + name + "'");
}

void ValueTable::check_query(std::size_t dims, int k) const {
  if (static_cast<int>(dims) != grid.dims()) {
    throw DimensionError("value table (" + to_string(model) + ", " +
                         std::to_string(grid.dims()) + " dims) queried with a " +
                         std::to_string(dims) + "-dimensional state");
  }
  if (k < 0 || k > grid.K + 1) {
    throw DimensionError("value table: stage " + std::to_string(k) +
                         " outside [0, " + std::to_string(grid.K + 1) + "]");
  }
}

namespace {

std::span<const double> column(const Eigen::MatrixXd& m, int k) {
  return {m.data() + static_cast<std::size_t>(k) * m.rows(),
          static_cast<std::size_t>(m.rows())};
}

}  // namespace

double ValueTable::lookup(std::span<const double> s, int k, Player p) const {
  check_query(s.size(), k);
  if (k == grid.K + 1) return 0.0;
  return interpolate(grid, column(p == Player::kA ? value_A : value_H, k), s);
}

double ValueTable::lookup(const Strat3State& s, int k, Player p) const {
  if (model == ModelTag::k4d) {
    throw DimensionError("value table is 4d; a 3d state cannot be looked up");
  }
  const Eigen::Vector3d v = s.vector();
  return lookup(std::span<const double>(v.data(), 3), k, p);
}

double ValueTable::lookup(const Strat4State& s, int k, Player p) const {
  if (model == ModelTag::k3d) {
    throw DimensionError("value table is 3d; a 4d state cannot be looked up");
  }
  const Eigen::Vector4d v = s.vector();
  return lookup(std::span<const double>(v.data(), 4), k, p);
}

double ValueTable::lookup_with_gradient(std::span<const double> s, int k, Player p,
                                        Eigen::VectorXd& gradient) const {
  check_query(s.size(), k);
  if (k == grid.K + 1) {
    gradient.setZero(grid.dims());
    return 0.0;
  }
  return interpolate(grid, column(p == Player::kA ? value_A : value_H, k), s,
                     &gradient);
}

Eigen::VectorXd ValueTable::value_gradient(std::span<const double> s, int k,
                                           Player p) const {
  check_query(s.size(), k);
  const int dims = grid.dims();
  Eigen::VectorXd g(dims);
  std::vector<double> lo(s.begin(), s.end());
  std::vector<double> hi(s.begin(), s.end());
  for (int d = 0; d < dims; ++d) {
    const Axis& axis = grid.axes[d];
    const double h = axis.spacing();
    const double c = std::clamp(s[d], axis.min, axis.max);
    double a = c - h;
    double b = c + h;
    if (a < axis.min) a = c;
    if (b > axis.max) b = c;
    lo[d] = a;
    hi[d] = b;
    g[d] = b > a ? (lookup(hi, k, p) - lookup(lo, k, p)) / (b - a) : 0.0;
    lo[d] = s[d];
    hi[d] = s[d];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[4] = {'S', 'G', 'V', 'T'};

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T v;
    get_raw(&v, sizeof(T), what);
    return v;
  }
  void get_raw(void* out, std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string("value table truncated while reading ") + what);
    }
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_actions(ByteWriter& w, const ActionTuples& a) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.width));
  w.put_raw(a.values.data(), a.values.size() * sizeof(double));
}

ActionTuples get_actions(ByteReader& r) {
  ActionTuples a;
  const auto count = r.get<std::uint32_t>("action count");
  a.width = static_cast<int>(r.get<std::uint32_t>("action width"));
  if (count > 65535 || a.width > 16) throw FormatError("value table: bad action list");
  a.values.resize(static_cast<std::size_t>(count) * a.width);
  r.get_raw(a.values.data(), a.values.size() * sizeof(double), "action list");
  return a;
}

std::vector<std::string> axis_names(ModelTag model, std::size_t dims) {
  if (model == ModelTag::k3d) return {"x_rel", "y_A", "v_rel"};
  if (model == ModelTag::k4d) return {"x_rel", "y_A", "y_H", "v_rel"};
  std::vector<std::string> names;
  for (std::size_t d = 0; d < dims; ++d) names.push_back("d" + std::to_string(d));
  return names;
}

}  // namespace

std::vector<std::uint8_t> ValueTable::serialize() const {
  ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model));
  w.put<double>(beta);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(grid.K));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(grid.dims()));
  for (const Axis& a : grid.axes) {
    w.put<double>(a.min);
    w.put<double>(a.max);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.count));
  }
  w.put<double>(grid.dk);
  w.put<double>(alpha);
  put_actions(w, leader_actions);
  put_actions(w, follower_actions);
  w.put_raw(reward_hash.data(), reward_hash.size());
  w.put_raw(value_A.data(), value_A.size() * sizeof(double));
  w.put_raw(value_H.data(), value_H.size() * sizeof(double));
  w.put_raw(policy.data(), policy.size() * sizeof(std::uint16_t));
  std::array<std::uint8_t, 32> digest{};
  SHA256(w.bytes().data(), w.bytes().size(), digest.data());
  w.put_raw(digest.data(), digest.size());
  return std::move(w.bytes());
}

ValueTable ValueTable::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.get_raw(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a value-table file (bad magic; expected SGVT version " +
                      std::to_string(kFormatVersion) + ")");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFormatVersion) {
    throw FormatError("value-table format version " + std::to_string(version) +
                      " unsupported; expected version " +
                      std::to_string(kFormatVersion));
  }
  if (bytes.size() < 32) throw FormatError("value table truncated");
  std::array<std::uint8_t, 32> digest{};
  SHA256(bytes.data(), bytes.size() - 32, digest.data());
  if (std::memcmp(digest.data(), bytes.data() + bytes.size() - 32, 32) != 0) {
    throw FormatError("value-table checksum mismatch (file corrupted; version " +
                      std::to_string(kFormatVersion) + ")");
  }

  ValueTable t;
  const auto tag = r.get<std::uint8_t>("model tag");
  if (tag != 0 && tag != 3 && tag != 4) throw FormatError("value table: bad model tag");
  t.model = static_cast<ModelTag>(tag);
  t.beta = r.get<double>("beta");
  t.grid.K = r.get<std::uint16_t>("K");
  const auto dims = r.get<std::uint8_t>("dimension count");
  const auto names = axis_names(t.model, dims);
  if ((t.model == ModelTag::k3d && dims != 3) || (t.model == ModelTag::k4d && dims != 4)) {
    throw FormatError("value table: dimension count does not match model tag");
  }
  for (std::size_t d = 0; d < dims; ++d) {
    Axis a;
    a.name = names[d];
    a.min = r.get<double>("axis min");
    a.max = r.get<double>("axis max");
    a.count = static_cast<int>(r.get<std::uint32_t>("axis count"));
    t.grid.axes.push_back(a);
  }
  t.grid.dk = r.get<double>("dk");
  t.alpha = r.get<double>("alpha");
  try {
    t.grid.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("value table: ") + e.what());
  }
  t.leader_actions = get_actions(r);
  t.follower_actions = get_actions(r);
  r.get_raw(t.reward_hash.data(), t.reward_hash.size(), "reward hash");

  const auto cells = static_cast<Eigen::Index>(t.grid.cell_count());
  const Eigen::Index stages = t.stages();
  const std::size_t payload = static_cast<std::size_t>(cells * stages) *
                              (2 * sizeof(double) + sizeof(std::uint16_t));
  if (r.position() + payload + 32 != bytes.size()) {
    throw FormatError("value table: payload size does not match header");
  }
  t.value_A.resize(cells, stages);
  t.value_H.resize(cells, stages);
  t.policy.resize(cells, stages);
  r.get_raw(t.value_A.data(), t.value_A.size() * sizeof(double), "V_A");
  r.get_raw(t.value_H.data(), t.value_H.size() * sizeof(double), "V_H");
  r.get_raw(t.policy.data(), t.policy.size() * sizeof(std::uint16_t), "policy");
  return t;
}

void ValueTable::save(const std::filesystem::path& path) const {
  const std::vector<std::uint8_t> bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write value table '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

ValueTable ValueTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open value table '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

bool ValueTable::operator==(const ValueTable& o) const {
  return grid == o.grid && model == o.model &&
         std::memcmp(&beta, &o.beta, sizeof(double)) == 0 &&
         std::memcmp(&alpha, &o.alpha, sizeof(double)) == 0 &&
         leader_actions == o.leader_actions && follower_actions == o.follower_actions &&
         reward_hash == o.reward_hash && value_A.rows() == o.value_A.rows() &&
         value_A.cols() == o.value_A.cols() &&
         std::memcmp(value_A.data(), o.value_A.data(), value_A.size() * sizeof(double)) == 0 &&
         std::memcmp(value_H.data(), o.value_H.data(), value_H.size() * sizeof(double)) == 0 &&
         policy == o.policy;
}

// ---------------------------------------------------------------------------
// Heatmaps

Eigen::MatrixXd export_heatmap_slice(const ValueTable& table, int k,
                                     const std::map<std::string, double>& fixed,
                                     const std::pair<std::string, std::string>& free,
                                     Player p) {
  const GridSpec& g = table.grid;
  const int row_axis = g.axis_index(free.first);
  const int col_axis = g.axis_index(free.second);
  if (row_axis < 0) throw ConfigError("heatmap: unknown dimension '" + free.first + "'");
  if (col_axis < 0) throw ConfigError("heatmap: unknown dimension '" + free.second + "'");
  if (row_axis == col_axis) throw ConfigError("heatmap: free dimensions must differ");
  std::vector<double> point(g.dims(), 0.0);
  for (const auto& [name, value] : fixed) {
    const int d = g.axis_index(name);
    if (d < 0) throw ConfigError("heatmap: unknown dimension '" + name + "'");
    if (d == row_axis || d == col_axis) {
      throw ConfigError("heatmap: dimension '" + name + "' is both fixed and free");
    }
    point[d] = value;
  }
  const Axis& ra = g.axes[row_axis];
  const Axis& ca = g.axes[col_axis];
  Eigen::MatrixXd out(ra.count, ca.count);
  for (int i = 0; i < ra.count; ++i) {
    point[row_axis] = ra.node(i);
    for (int j = 0; j < ca.count; ++j) {
      point[col_axis] = ca.node(j);
      out(i, j) = table.lookup(point, k, p);
    }
  }
  return out;
}

std::string heatmap_csv(const ValueTable& table, const Eigen::MatrixXd& slice,
                        const std::pair<std::string, std::string>& free) {
  const int row_axis = table.grid.axis_index(free.first);
  const int col_axis = table.grid.axis_index(free.second);
  if (row_axis < 0 || col_axis < 0) throw ConfigError("heatmap: unknown dimension");
  const Axis& ra = table.grid.axes[row_axis];
  const Axis& ca = table.grid.axes[col_axis];
  if (slice.rows() != ra.count || slice.cols() != ca.count) {
    throw DimensionError("heatmap: slice does not match the free axes");
  }
  std::ostringstream out;
  out << free.first << "\\" << free.second;
  for (int j = 0; j < ca.count; ++j) out << "," << format_double(ca.node(j));
  out << "\n";
  for (int i = 0; i < ra.count; ++i) {
    out << format_double(ra.node(i));
    for (int j = 0; j < ca.count; ++j) out << "," << format_double(slice(i, j));
    out << "\n";
  }
  return out.str();
}

std::vector<std::uint8_t> heatmap_ppm(const Eigen::MatrixXd& slice) {
  const std::string header = "P6\n" + std::to_string(slice.cols()) + " " +
                             std::to_string(slice.rows()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const double lo = slice.minCoeff();
  const double hi = slice.maxCoeff();
  for (Eigen::Index i = 0; i < slice.rows(); ++i) {
    for (Eigen::Index j = 0; j < slice.cols(); ++j) {
      const double t = hi > lo ? (slice(i, j) - lo) / (hi - lo) : 0.0;
      out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t))));
      out.push_back(0);
      out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * t)));
    }
  }
  return out;
}

}  // namespace hgp
