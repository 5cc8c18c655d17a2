// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint serialization. File layout: magic "ADAC", u32 little-endian
// version (1), u32 entry count, then per entry: u16 name length, name bytes,
// u8 rank, u32 dims[rank], float32 little-endian payload. Optimizer state
// lives under the reserved "adam/" name prefix, run metadata under "meta/".
// Entries are written in sorted name order so identical state always
// produces identical bytes, and writes go through a temp-file rename.

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/fs.hpp"
#include "adaug/tensor.hpp"
#include "adaug/unet.hpp"

namespace adaug {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace detail {

constexpr char kCkptMagic[4] = {'A', 'D', 'A', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("checkpoint '" + path_ + "': truncated file");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint8_t>(bytes_[pos_]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_ + 1])) << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> floats(std::size_t n) {
    need(n * 4);
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
    return v;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct Checkpoint {
  ModelParams params;
  AdamState adam;
  int epoch = 0;
};

inline void save_checkpoint(const ModelParams& params, const AdamState& adam,
                            int epoch, const std::string& path) {
  std::map<std::string, Tensor> entries;
  entries["meta/config"] = Tensor::from_data(
      Shape{6},
      {static_cast<float>(params.config.n), static_cast<float>(params.config.base_channels),
       static_cast<float>(params.config.kernel), static_cast<float>(params.config.depth),
       params.config.dropout_rate, params.config.bn_momentum});
  entries["meta/epoch"] = Tensor::scalar(static_cast<float>(epoch));
  for (const std::string& name : params.all_names) entries[name] = params.at(name);
  entries["adam/hyper"] =
      Tensor::from_data(Shape{4}, {adam.lr, adam.beta1, adam.beta2, adam.eps});
  entries["adam/t"] = Tensor::scalar(static_cast<float>(adam.t));
  for (const auto& [name, t] : adam.m) entries["adam/m/" + name] = t;
  for (const auto& [name, t] : adam.v) entries["adam/v/" + name] = t;

  std::string out;
  out.append(detail::kCkptMagic, 4);
  detail::put_u32(out, detail::kCkptVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (name.size() > 0xffff)
      throw std::runtime_error("checkpoint entry name too long: " + name);
    detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(t.rank()));
    for (int d = 0; d < t.rank(); ++d)
      detail::put_u32(out, static_cast<std::uint32_t>(t.dim(d)));
    const std::size_t bytes = t.size() * 4;
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, t.data(), bytes);
  }
  detail::write_file_atomic(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  detail::ByteReader r(bytes, path);
  if (r.str(4) != std::string(detail::kCkptMagic, 4))
    throw std::runtime_error("checkpoint '" + path + "': bad magic bytes");
  const std::uint32_t version = r.u32();
  if (version != detail::kCkptVersion)
    throw std::runtime_error("checkpoint '" + path + "': unsupported version " +
                             std::to_string(version));
  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = r.str(r.u16());
    const int rank = r.u8();
    if (rank > 4)
      throw std::runtime_error("checkpoint '" + path + "': entry '" + name +
                               "' has unsupported rank " + std::to_string(rank));
    Shape shape(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
    Tensor t = Tensor::from_data(shape, r.floats(shape_numel(shape)));
    if (!entries.emplace(name, t).second)
      throw std::runtime_error("checkpoint '" + path + "': duplicate entry '" + name +
                               "'");
  }
  if (!r.exhausted())
    throw std::runtime_error("checkpoint '" + path + "': trailing bytes after last entry");

  auto grab = [&](const std::string& name) -> Tensor {
    auto it = entries.find(name);
    if (it == entries.end())
      throw std::runtime_error("checkpoint '" + path + "': missing entry '" + name + "'");
    return it->second;
  };

  Checkpoint ck;
  const Tensor cfg_t = grab("meta/config");
  if (cfg_t.size() != 6)
    throw std::runtime_error("checkpoint '" + path + "': malformed meta/config");
  ck.params.config.n = static_cast<int>(cfg_t[0]);
  ck.params.config.base_channels = static_cast<int>(cfg_t[1]);
  ck.params.config.kernel = static_cast<int>(cfg_t[2]);
  ck.params.config.depth = static_cast<int>(cfg_t[3]);
  ck.params.config.dropout_rate = cfg_t[4];
  ck.params.config.bn_momentum = cfg_t[5];
  ck.params.config.validate();
  ck.epoch = static_cast<int>(grab("meta/epoch")[0]);

  // Rebuild the parameter catalogue from the config and pull each tensor,
  // validating its shape against the architecture schedule.
  ModelParams skeleton = [&] {
    Rng rng = Rng::derive(0, 0);
    return build_unet(ck.params.config, rng);
  }();
  ck.params.trainable = skeleton.trainable;
  ck.params.all_names = skeleton.all_names;
  for (const std::string& name : skeleton.all_names) {
    Tensor t = grab(name);
    if (t.shape() != skeleton.at(name).shape())
      throw std::runtime_error("checkpoint '" + path + "': entry '" + name +
                               "' has shape " + shape_str(t.shape()) + ", expected " +
                               shape_str(skeleton.at(name).shape()));
    ck.params.tensors[name] = t;
  }

  const Tensor hyper = grab("adam/hyper");
  if (hyper.size() != 4)
    throw std::runtime_error("checkpoint '" + path + "': malformed adam/hyper");
  ck.adam.lr = hyper[0];
  ck.adam.beta1 = hyper[1];
  ck.adam.beta2 = hyper[2];
  ck.adam.eps = hyper[3];
  ck.adam.t = static_cast<std::int64_t>(grab("adam/t")[0]);
  for (const auto& [name, t] : entries) {
    if (name.rfind("adam/m/", 0) == 0) ck.adam.m[name.substr(7)] = t;
    if (name.rfind("adam/v/", 0) == 0) ck.adam.v[name.substr(7)] = t;
  }
  return ck;
}

}  // namespace adaug
