#pragma once
// Binary FieldState records (little-endian):
//   char[4] "GFFS" | u32 version | u32 d | u32 n | u32 N | f64 m2 | f64 g | u64 count | f64[count]
// A single state is written with a JSON sidecar "<path>.json"; streams are
// concatenated records with an index "<path>.idx" (CSV: record,sweep,offset).

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gffc/gaussian_core.hpp"

namespace gffc {

void write_record(std::ostream& os, const FieldState& s);
// Reads one record; the domain is rebuilt from the header with the given shape.
FieldState read_record(std::istream& is, const Shape& shape = Shape{});

nlohmann::json sidecar_json(const FieldState& s);
void write_field(const std::string& path, const FieldState& s);
FieldState read_field(const std::string& path);

class StreamWriter {
 public:
  explicit StreamWriter(const std::string& path);
  void append(const FieldState& s, std::uint64_t sweep);
  void close();
  std::size_t records() const { return count_; }

 private:
  std::string path_;
  std::ofstream data_, index_;
  std::size_t count_ = 0;
  bool sidecar_done_ = false;
};

struct StreamEntry {
  std::uint64_t sweep;
  FieldState state;
};
std::vector<StreamEntry> read_stream(const std::string& path);

}  // namespace gffc
