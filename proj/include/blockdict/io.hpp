#pragma once

// File formats. One container serves dictionaries (unit-norm atoms plus a
// block assignment, optional class labels) and training sets (raw signal
// columns, assignment all zero, optional per-signal classes). The binary
// layout is fixed little-endian and written byte by byte, so files are
// identical across platforms; a JSON mirror is selected by the ".json"
// extension. Atom payloads are column-major 64-bit floats.

#include "blockdict/core.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace blockdict {

namespace io_detail {

inline constexpr char kMagic[5] = {'B', 'D', 'K', 'T', '1'};

struct Container {
  std::uint32_t m = 0;
  std::uint32_t n_a = 0;
  bool has_labels = false;
  std::vector<std::int32_t> assignment;  // block id per column, 0 = none
  std::vector<std::int32_t> labels;      // class id per column
  Matrix columns;                        // m x n_a
};

inline bool is_json_path(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_f64(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
public:
  ByteReader(const std::string& data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    return std::bit_cast<double>(bits);
  }

  void expect_magic() {
    need(5);
    for (char c : kMagic) {
      if (data_[pos_++] != c) throw DataError("bad magic in " + path_);
    }
  }

  void expect_end() const {
    if (pos_ != data_.size()) throw DataError("trailing bytes in " + path_);
  }

private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError("truncated file " + path_);
  }

  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("failed writing " + path);
}

inline std::string encode_binary(const Container& c) {
  std::string out;
  out.reserve(16 + c.assignment.size() * 8 + static_cast<std::size_t>(c.columns.size()) * 8);
  out.append(kMagic, 5);
  put_u32(out, c.m);
  put_u32(out, c.n_a);
  out.push_back(c.has_labels ? 1 : 0);
  for (std::int32_t v : c.assignment) put_i32(out, v);
  if (c.has_labels)
    for (std::int32_t v : c.labels) put_i32(out, v);
  for (Index j = 0; j < c.columns.cols(); ++j)
    for (Index i = 0; i < c.columns.rows(); ++i) put_f64(out, c.columns(i, j));
  return out;
}

inline Container decode_binary(const std::string& data, const std::string& path) {
  ByteReader r(data, path);
  r.expect_magic();
  Container c;
  c.m = r.u32();
  c.n_a = r.u32();
  if (c.m == 0 || c.n_a == 0) throw DataError("empty dimensions in " + path);
  if (static_cast<std::uint64_t>(c.m) * c.n_a > (1ull << 31))
    throw DataError("implausible dimensions in " + path);
  const std::uint8_t flag = r.u8();
  if (flag > 1) throw DataError("bad label flag in " + path);
  c.has_labels = flag == 1;
  c.assignment.resize(c.n_a);
  for (auto& v : c.assignment) v = r.i32();
  if (c.has_labels) {
    c.labels.resize(c.n_a);
    for (auto& v : c.labels) v = r.i32();
  }
  c.columns.resize(static_cast<Index>(c.m), static_cast<Index>(c.n_a));
  for (Index j = 0; j < c.columns.cols(); ++j)
    for (Index i = 0; i < c.columns.rows(); ++i) c.columns(i, j) = r.f64();
  r.expect_end();
  return c;
}

inline std::string encode_json(const Container& c) {
  nlohmann::ordered_json j;
  j["m"] = c.m;
  j["n_a"] = c.n_a;
  j["assignment"] = c.assignment;
  if (c.has_labels) j["labels"] = c.labels;
  auto atoms = nlohmann::ordered_json::array();
  for (Index col = 0; col < c.columns.cols(); ++col) {
    auto one = nlohmann::ordered_json::array();
    for (Index row = 0; row < c.columns.rows(); ++row) one.push_back(c.columns(row, col));
    atoms.push_back(std::move(one));
  }
  j["atoms"] = std::move(atoms);
  return j.dump() + "\n";
}

inline Container decode_json(const std::string& data, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(data);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
  Container c;
  try {
    c.m = j.at("m").get<std::uint32_t>();
    c.n_a = j.at("n_a").get<std::uint32_t>();
    c.assignment = j.at("assignment").get<std::vector<std::int32_t>>();
    if (j.contains("labels")) {
      c.has_labels = true;
      c.labels = j.at("labels").get<std::vector<std::int32_t>>();
    }
    if (c.m == 0 || c.n_a == 0) throw DataError("empty dimensions in " + path);
    const auto& atoms = j.at("atoms");
    if (!atoms.is_array() || atoms.size() != c.n_a)
      throw DataError("atom count mismatch in " + path);
    c.columns.resize(static_cast<Index>(c.m), static_cast<Index>(c.n_a));
    for (Index col = 0; col < c.columns.cols(); ++col) {
      const auto& one = atoms[static_cast<std::size_t>(col)];
      if (!one.is_array() || one.size() != c.m)
        throw DataError("atom length mismatch in " + path);
      for (Index row = 0; row < c.columns.rows(); ++row)
        c.columns(row, col) = one[static_cast<std::size_t>(row)].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed container in " + path + ": " + e.what());
  }
  if (c.assignment.size() != c.n_a) throw DataError("assignment length mismatch in " + path);
  if (c.has_labels && c.labels.size() != c.n_a)
    throw DataError("label length mismatch in " + path);
  return c;
}

inline void save(const Container& c, const std::string& path) {
  write_file(path, is_json_path(path) ? encode_json(c) : encode_binary(c));
}

inline Container load(const std::string& path) {
  const std::string data = read_file(path);
  return is_json_path(path) ? decode_json(data, path) : decode_binary(data, path);
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Dictionary files.
// ---------------------------------------------------------------------------

inline void save_dictionary(const Dictionary& d, const BlockStructure& b,
                            const std::optional<ClassLabels>& labels,
                            const std::string& path) {
  if (b.atom_count() != d.atom_count())
    throw DataError("block assignment length does not match dictionary");
  if (labels && labels->atom_count() != d.atom_count())
    throw DataError("class label length does not match dictionary");
  io_detail::Container c;
  c.m = static_cast<std::uint32_t>(d.dim());
  c.n_a = static_cast<std::uint32_t>(d.atom_count());
  c.assignment.assign(b.assignment().begin(), b.assignment().end());
  if (labels) {
    c.has_labels = true;
    c.labels.assign(labels->labels().begin(), labels->labels().end());
  }
  c.columns = d.atoms();
  io_detail::save(c, path);
}

inline std::tuple<Dictionary, BlockStructure, std::optional<ClassLabels>>
load_dictionary(const std::string& path) {
  const io_detail::Container c = io_detail::load(path);
  Dictionary d{c.columns};  // validates norms and finiteness
  BlockStructure b{std::vector<int>(c.assignment.begin(), c.assignment.end())};
  if (b.atom_count() != d.atom_count())
    throw DataError("assignment length mismatch in " + path);
  std::optional<ClassLabels> labels;
  if (c.has_labels)
    labels.emplace(std::vector<int>(c.labels.begin(), c.labels.end()));
  if (labels && labels->atom_count() != d.atom_count())
    throw DataError("label length mismatch in " + path);
  return {std::move(d), std::move(b), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Training-set files: same container, all-zero assignment, labels carry the
// per-signal classes. Signals are not unit-norm, so loading skips the norm
// check that dictionaries get.
// ---------------------------------------------------------------------------

inline void save_training_set(const TrainingSet& ys, const std::string& path) {
  io_detail::Container c;
  c.m = static_cast<std::uint32_t>(ys.dim());
  c.n_a = static_cast<std::uint32_t>(ys.size());
  c.assignment.assign(static_cast<std::size_t>(ys.size()), 0);
  if (ys.has_classes()) {
    c.has_labels = true;
    c.labels.assign(ys.class_of_signal().begin(), ys.class_of_signal().end());
  }
  c.columns = ys.signals();
  io_detail::save(c, path);
}

inline TrainingSet load_training_set(const std::string& path) {
  const io_detail::Container c = io_detail::load(path);
  if (c.has_labels)
    return TrainingSet(c.columns, std::vector<int>(c.labels.begin(), c.labels.end()));
  return TrainingSet(c.columns);
}

}  // namespace blockdict
