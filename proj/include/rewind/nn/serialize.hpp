#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "rewind/common.hpp"
#include "rewind/nn/params.hpp"

namespace rewindrl::nn {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}
inline std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw corruption_error(std::string("checkpoint truncated at ") + what);
  return v;
}
inline std::uint64_t read_u64(std::istream& is, const char* what) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw corruption_error(std::string("checkpoint truncated at ") + what);
  return v;
}
inline std::string read_str(std::istream& is, const char* what) {
  const auto n = read_u32(is, what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw corruption_error(std::string("checkpoint truncated at ") + what);
  return s;
}

template <class T>
void write_params(std::ostream& os, const std::vector<Param<T>*>& params) {
  write_u32(os, std::uint32_t(params.size()));
  for (const auto* p : params) {
    write_str(os, p->name);
    write_u32(os, std::uint32_t(p->rows));
    write_u32(os, std::uint32_t(p->cols));
    os.write(reinterpret_cast<const char*>(p->w.data()),
             std::streamsize(p->w.size() * sizeof(T)));
  }
}

template <class T>
void read_params(std::istream& is, const std::vector<Param<T>*>& params) {
  const auto n = read_u32(is, "param count");
  if (n != params.size())
    throw corruption_error("checkpoint: expected " +
                           std::to_string(params.size()) + " params, found " +
                           std::to_string(n));
  for (auto* p : params) {
    const auto name = read_str(is, "param name");
    if (name != p->name)
      throw corruption_error("checkpoint: parameter order mismatch at " + name +
                             " (expected " + p->name + ")");
    const auto rows = read_u32(is, "rows");
    const auto cols = read_u32(is, "cols");
    if (int(rows) != p->rows || int(cols) != p->cols)
      throw corruption_error("checkpoint: shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(p->w.data()),
            std::streamsize(p->w.size() * sizeof(T)));
    if (!is) throw corruption_error("checkpoint truncated in " + name);
  }
}

// key=value map block, used for config payloads inside checkpoints.
inline void write_kv(std::ostream& os, const std::map<std::string, std::string>& kv) {
  std::string blob;
  for (const auto& [k, v] : kv) blob += k + "=" + v + "\n";
  write_str(os, blob);
}

inline std::map<std::string, std::string> read_kv(std::istream& is) {
  const auto blob = read_str(is, "config block");
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < blob.size()) {
    auto nl = blob.find('\n', pos);
    if (nl == std::string::npos) nl = blob.size();
    const auto line = blob.substr(pos, nl - pos);
    pos = nl + 1;
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace rewindrl::nn
