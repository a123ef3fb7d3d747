#pragma once

// Container layout:
//   bytes 0..7   magic "ARRCKPT1"
//   bytes 8..15  manifest length L, uint64 little-endian
//   next L bytes JSON manifest {"metadata": {...}, "tensors": [{name, shape, dtype, offset, nbytes}]}
//   remainder    raw little-endian tensor buffers; offsets are relative to the
//                start of this section

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/tensor.hpp"
#include "json.hpp"

namespace arr {

template <class T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

inline constexpr char kCheckpointMagic[8] = {'A', 'R', 'R', 'C', 'K', 'P', 'T', '1'};

namespace detail {

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<U>(bytes);
  }
}

template <class T>
void append_le(std::vector<unsigned char>& out, const Tensor<T>& t) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const std::size_t start = out.size();
  out.resize(start + t.size() * sizeof(T));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Bits b = to_little(std::bit_cast<Bits>(t[i]));
    std::memcpy(out.data() + start + i * sizeof(T), &b, sizeof(T));
  }
}

template <class Src, class T>
void decode_le(const unsigned char* src, std::size_t n, T* dst) {
  using Bits = std::conditional_t<sizeof(Src) == 4, std::uint32_t, std::uint64_t>;
  for (std::size_t i = 0; i < n; ++i) {
    Bits b;
    std::memcpy(&b, src + i * sizeof(Src), sizeof(Src));
    dst[i] = static_cast<T>(std::bit_cast<Src>(to_little(b)));
  }
}

}  // namespace detail

struct TensorRecord {
  std::string name;
  Shape shape;
  std::string dtype;
  std::vector<unsigned char> bytes;
};

/// In-memory image of a checkpoint container.
class Checkpoint {
 public:
  nlohmann::json metadata = nlohmann::json::object();

  template <class T>
  void add(const std::string& name, const Tensor<T>& t) {
    TensorRecord rec{name, t.shape(), dtype_name<T>(), {}};
    detail::append_le(rec.bytes, t);
    index_[name] = records_.size();
    records_.push_back(std::move(rec));
  }

  template <class T>
  void add_parameters(const ParameterList<T>& params, const std::string& prefix = "") {
    for (const auto& p : params) add(prefix + p.name, p.param->value);
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<TensorRecord>& records() const { return records_; }

  const TensorRecord& record(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("checkpoint has no tensor named '" + name + "'");
    return records_[it->second];
  }

  /// Decodes a tensor, converting between f32 and f64 when needed.
  template <class T>
  Tensor<T> get(const std::string& name) const {
    const TensorRecord& rec = record(name);
    Tensor<T> out(rec.shape);
    const std::size_t n = out.size();
    if (rec.dtype == "f32") {
      if (rec.bytes.size() != n * 4) throw DataError("checkpoint tensor '" + name + "' has wrong byte length");
      detail::decode_le<float>(rec.bytes.data(), n, out.data());
    } else if (rec.dtype == "f64") {
      if (rec.bytes.size() != n * 8) throw DataError("checkpoint tensor '" + name + "' has wrong byte length");
      detail::decode_le<double>(rec.bytes.data(), n, out.data());
    } else {
      throw DataError("checkpoint tensor '" + name + "' has unsupported dtype " + rec.dtype);
    }
    return out;
  }

  /// Copies tensors named `prefix + p.name` into `params`. Every parameter
  /// must be present with a matching shape unless `allow_missing`; all
  /// mismatches are reported together.
  template <class T>
  void load_into(const ParameterList<T>& params, const std::string& prefix = "", bool allow_missing = false) const {
    std::vector<std::string> problems;
    for (const auto& p : params) {
      const std::string key = prefix + p.name;
      if (!contains(key)) {
        if (!allow_missing) problems.push_back(key + ": missing");
        continue;
      }
      const TensorRecord& rec = record(key);
      if (rec.shape != p.param->value.shape()) {
        problems.push_back(key + ": checkpoint " + shape_string(rec.shape) + " vs model " +
                           shape_string(p.param->value.shape()));
      }
    }
    if (!problems.empty()) {
      std::string msg = "incompatible checkpoint:";
      for (const auto& s : problems) msg += "\n  " + s;
      throw DataError(msg);
    }
    for (const auto& p : params) {
      const std::string key = prefix + p.name;
      if (contains(key)) p.param->value = get<T>(key);
    }
  }

  nlohmann::json manifest() const {
    nlohmann::json tensors = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& r : records_) {
      tensors.push_back({{"name", r.name}, {"shape", r.shape}, {"dtype", r.dtype}, {"offset", offset},
                         {"nbytes", r.bytes.size()}});
      offset += r.bytes.size();
    }
    return {{"metadata", metadata}, {"tensors", tensors}};
  }

  std::vector<unsigned char> serialize() const {
    const std::string man = manifest().dump();
    std::size_t total = 16 + man.size();
    for (const auto& r : records_) total += r.bytes.size();
    std::vector<unsigned char> out(total);
    const std::uint64_t len = detail::to_little(static_cast<std::uint64_t>(man.size()));
    std::memcpy(out.data(), kCheckpointMagic, 8);
    std::memcpy(out.data() + 8, &len, 8);
    std::memcpy(out.data() + 16, man.data(), man.size());
    std::size_t at = 16 + man.size();
    for (const auto& r : records_) {
      if (!r.bytes.empty()) std::memcpy(out.data() + at, r.bytes.data(), r.bytes.size());
      at += r.bytes.size();
    }
    return out;
  }

  static Checkpoint deserialize(const std::vector<unsigned char>& buf) {
    if (buf.size() < 16 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0) {
      throw DataError("not a checkpoint container (bad magic)");
    }
    std::uint64_t len;
    std::memcpy(&len, buf.data() + 8, 8);
    len = detail::to_little(len);
    if (16 + len > buf.size()) throw DataError("checkpoint manifest truncated");
    nlohmann::json man;
    try {
      man = nlohmann::json::parse(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
    }
    Checkpoint ck;
    ck.metadata = man.value("metadata", nlohmann::json::object());
    const std::size_t data_start = 16 + len;
    for (const auto& t : man.at("tensors")) {
      TensorRecord rec;
      rec.name = t.at("name").get<std::string>();
      rec.shape = t.at("shape").get<Shape>();
      rec.dtype = t.at("dtype").get<std::string>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto nbytes = t.at("nbytes").get<std::uint64_t>();
      const std::size_t width = rec.dtype == "f32" ? 4 : rec.dtype == "f64" ? 8 : 0;
      if (width == 0) throw DataError("checkpoint tensor '" + rec.name + "' has unsupported dtype " + rec.dtype);
      if (nbytes != shape_numel(rec.shape) * width) {
        throw DataError("checkpoint tensor '" + rec.name + "' byte length disagrees with its shape");
      }
      if (data_start + offset + nbytes > buf.size()) throw DataError("checkpoint tensor '" + rec.name + "' truncated");
      rec.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(data_start + offset),
                       buf.begin() + static_cast<std::ptrdiff_t>(data_start + offset + nbytes));
      ck.index_[rec.name] = ck.records_.size();
      ck.records_.push_back(std::move(rec));
    }
    return ck;
  }

  void save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  std::vector<TensorRecord> records_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace arr
