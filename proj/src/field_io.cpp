#include "gffc/field_io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "gffc/errors.hpp"

namespace gffc {

static_assert(std::endian::native == std::endian::little, "binary format assumes a little-endian host");

namespace {
template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ConfigError("truncated field record");
  return v;
}
}  // namespace

void write_record(std::ostream& os, const FieldState& s) {
  os.write("GFFS", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, std::uint32_t(s.domain->d()));
  put<std::uint32_t>(os, std::uint32_t(s.domain->n()));
  put<std::uint32_t>(os, std::uint32_t(s.params.N));
  put<double>(os, s.params.m2);
  put<double>(os, s.params.g);
  put<std::uint64_t>(os, s.values.size());
  os.write(reinterpret_cast<const char*>(s.values.data()), std::streamsize(s.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed");
}

FieldState read_record(std::istream& is, const Shape& shape) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "GFFS", 4) != 0) throw ConfigError("not a field record");
  if (get<std::uint32_t>(is) != 1) throw ConfigError("unsupported field record version");
  const int d = int(get<std::uint32_t>(is));
  const int n = int(get<std::uint32_t>(is));
  const int N = int(get<std::uint32_t>(is));
  const double m2 = get<double>(is);
  const double g = get<double>(is);
  const auto count = get<std::uint64_t>(is);
  DomainPtr dom = shape.kind == ShapeKind::full ? make_box_domain(d, n) : make_domain(d, n, shape);
  FieldState s = FieldState::zeros(FieldParams::make(N, m2, g), dom);
  if (count != s.values.size()) throw ConfigError("field record size mismatch");
  is.read(reinterpret_cast<char*>(s.values.data()), std::streamsize(count * sizeof(double)));
  if (!is) throw ConfigError("truncated field record body");
  return s;
}

nlohmann::json sidecar_json(const FieldState& s) {
  return {{"format", "GFFS"},
          {"version", 1},
          {"byte_order", "little"},
          {"layout", "site-major, coordinate 0 fastest, N components interleaved"},
          {"d", s.domain->d()},
          {"n", s.domain->n()},
          {"side", s.domain->box.side},
          {"N", s.params.N},
          {"m2", s.params.m2},
          {"g", s.params.g},
          {"shape", s.domain->shape.str()}};
}

void write_field(const std::string& path, const FieldState& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_record(os, s);
  std::ofstream js(path + ".json");
  js << sidecar_json(s).dump(2) << "\n";
}

namespace {
Shape sidecar_shape(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) return Shape{};
  const auto j = nlohmann::json::parse(js);
  return Shape::parse(j.value("shape", std::string("full")));
}
}  // namespace

FieldState read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_record(is, sidecar_shape(path));
}

StreamWriter::StreamWriter(const std::string& path)
    : path_(path), data_(path, std::ios::binary), index_(path + ".idx") {
  if (!data_ || !index_) throw std::runtime_error("cannot open stream " + path);
  index_ << "record,sweep,offset\n";
}

void StreamWriter::append(const FieldState& s, std::uint64_t sweep) {
  if (!sidecar_done_) {
    std::ofstream js(path_ + ".json");
    js << sidecar_json(s).dump(2) << "\n";
    sidecar_done_ = true;
  }
  index_ << count_ << "," << sweep << "," << std::uint64_t(data_.tellp()) << "\n";
  write_record(data_, s);
  ++count_;
}

void StreamWriter::close() {
  data_.close();
  index_.close();
}

std::vector<StreamEntry> read_stream(const std::string& path) {
  const Shape shape = sidecar_shape(path);
  std::ifstream is(path, std::ios::binary), idx(path + ".idx");
  if (!is || !idx) throw ConfigError("cannot open stream " + path);
  std::string line;
  std::getline(idx, line);
  std::vector<StreamEntry> out;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string rec, sweep, off;
    std::getline(ls, rec, ',');
    std::getline(ls, sweep, ',');
    std::getline(ls, off, ',');
    is.seekg(std::streamoff(std::stoull(off)));
    out.push_back({std::stoull(sweep), read_record(is, shape)});
  }
  return out;
}

}  // namespace gffc
