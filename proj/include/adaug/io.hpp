// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset file I/O. Images are 16-bit binary PGM (P5, maxval 65535, sample
// value = round(65535 * intensity), most significant byte first); masks are
// 8-bit binary PGM restricted to {0, 255}. A dataset directory holds
// <root>/{train,val}/{img,msk}/<id>.pgm plus a UTF-8 manifest:
//
//   adaug-manifest v1
//   n: 64
//   <id> <split> <image-path> <mask-path>      (one line per sample)
//
// Paths in the manifest are relative to the manifest's directory. All writes
// go through temp-file rename.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/dataset.hpp"
#include "adaug/fs.hpp"
#include "adaug/parallel.hpp"
#include "adaug/tensor.hpp"

namespace adaug {

namespace detail {

constexpr int kImageMaxval = 65535;
constexpr int kMaskMaxval = 255;

// Pulls the next whitespace-delimited token from a PGM header, honoring
// '#'-to-end-of-line comments.
inline std::string pgm_token(const std::string& bytes, std::size_t& pos,
                             const std::string& path) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() &&
         !std::isspace(static_cast<unsigned char>(bytes[pos])) && bytes[pos] != '#')
    ++pos;
  if (start == pos)
    throw std::runtime_error("pgm '" + path + "': truncated header");
  return bytes.substr(start, pos - start);
}

inline int pgm_int(const std::string& bytes, std::size_t& pos, const std::string& path,
                   const char* what) {
  const std::string tok = pgm_token(bytes, pos, path);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("pgm '" + path + "': bad " + what + " '" + tok + "'");
  }
}

struct RawPgm {
  int width = 0, height = 0, maxval = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};

inline RawPgm load_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  const std::string magic = pgm_token(bytes, pos, path);
  if (magic != "P5")
    throw std::runtime_error("pgm '" + path + "': unsupported format '" + magic +
                             "' (only binary P5 is supported)");
  RawPgm img;
  img.width = pgm_int(bytes, pos, path, "width");
  img.height = pgm_int(bytes, pos, path, "height");
  img.maxval = pgm_int(bytes, pos, path, "maxval");
  if (img.maxval != kImageMaxval && img.maxval != kMaskMaxval)
    throw std::runtime_error("pgm '" + path + "': maxval " + std::to_string(img.maxval) +
                             " (expected 255 or 65535)");
  ++pos;  // the single whitespace byte after maxval
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  const int bytes_per = img.maxval > 255 ? 2 : 1;
  if (bytes.size() - pos != count * bytes_per)
    throw std::runtime_error("pgm '" + path + "': payload holds " +
                             std::to_string(bytes.size() - pos) + " bytes, expected " +
                             std::to_string(count * bytes_per));
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (bytes_per == 2) {
      const auto hi = static_cast<std::uint8_t>(bytes[pos + 2 * i]);
      const auto lo = static_cast<std::uint8_t>(bytes[pos + 2 * i + 1]);
      img.pixels[i] = static_cast<std::uint16_t>((hi << 8) | lo);
    } else {
      img.pixels[i] = static_cast<std::uint8_t>(bytes[pos + i]);
    }
  }
  return img;
}

inline std::string pgm_header(int width, int height, int maxval) {
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
         std::to_string(maxval) + "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-image save/load
// ---------------------------------------------------------------------------

inline void save_image_pgm(const std::string& path, const Tensor& image) {
  if (image.rank() != 2)
    throw std::invalid_argument("save_image_pgm: image must be rank 2");
  const int h = image.dim(0), w = image.dim(1);
  std::string out = detail::pgm_header(w, h, detail::kImageMaxval);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float clamped = std::min(1.0f, std::max(0.0f, image[i]));
    const int v = static_cast<int>(std::lround(65535.0 * clamped));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
  }
  detail::write_file_atomic(path, out);
}

inline Tensor load_image_pgm(const std::string& path) {
  const detail::RawPgm img = detail::load_pgm(path);
  if (img.maxval != detail::kImageMaxval)
    throw std::runtime_error("pgm '" + path + "': maxval " + std::to_string(img.maxval) +
                             " where a 16-bit image (65535) was expected");
  Tensor t(Shape{img.height, img.width});
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(img.pixels[i]) / 65535.0f;
  return t;
}

inline void save_mask_pgm(const std::string& path, const Tensor& mask) {
  if (mask.rank() != 2)
    throw std::invalid_argument("save_mask_pgm: mask must be rank 2");
  const int h = mask.dim(0), w = mask.dim(1);
  std::string out = detail::pgm_header(w, h, detail::kMaskMaxval);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.0f && mask[i] != 1.0f)
      throw std::invalid_argument("save_mask_pgm: mask value " +
                                  std::to_string(mask[i]) + " is not binary");
    out.push_back(static_cast<char>(mask[i] != 0.0f ? 255 : 0));
  }
  detail::write_file_atomic(path, out);
}

inline Tensor load_mask_pgm(const std::string& path) {
  const detail::RawPgm img = detail::load_pgm(path);
  if (img.maxval != detail::kMaskMaxval)
    throw std::runtime_error("pgm '" + path + "': maxval " + std::to_string(img.maxval) +
                             " where an 8-bit mask (255) was expected");
  Tensor t(Shape{img.height, img.width});
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (img.pixels[i] != 0 && img.pixels[i] != 255)
      throw std::runtime_error("pgm '" + path + "': mask value " +
                               std::to_string(img.pixels[i]) +
                               " is invalid (only 0 and 255 are allowed)");
    t[i] = img.pixels[i] ? 1.0f : 0.0f;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Manifest + dataset directory
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string split;
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
};

struct Manifest {
  int n = 0;
  std::vector<ManifestEntry> entries;
};

inline std::string sample_image_rel(const Sample& s) {
  return s.split + "/img/" + s.id + ".pgm";
}
inline std::string sample_mask_rel(const Sample& s) {
  return s.split + "/msk/" + s.id + ".pgm";
}

inline void save_manifest(const std::string& path, const Manifest& manifest) {
  std::string out = "adaug-manifest v1\n";
  out += "n: " + std::to_string(manifest.n) + "\n";
  for (const ManifestEntry& e : manifest.entries)
    out += e.id + " " + e.split + " " + e.image_path + " " + e.mask_path + "\n";
  detail::write_file_atomic(path, out);
}

inline Manifest load_manifest(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  Manifest m;
  std::set<std::string> seen;
  std::size_t pos = 0;
  int lineno = 0;
  bool have_n = false;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    const std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1) {
      if (line != "adaug-manifest v1")
        throw std::runtime_error("manifest '" + path + "': unrecognized header '" +
                                 line + "'");
      continue;
    }
    if (line.rfind("n:", 0) == 0) {
      m.n = std::stoi(line.substr(2));
      have_n = true;
      continue;
    }
    ManifestEntry e;
    std::size_t a = 0;
    auto field = [&](const char* what) {
      while (a < line.size() && line[a] == ' ') ++a;
      const std::size_t b = line.find(' ', a);
      const std::string v = line.substr(a, b == std::string::npos ? b : b - a);
      if (v.empty())
        throw std::runtime_error("manifest '" + path + "' line " +
                                 std::to_string(lineno) + ": missing " + what);
      a = b == std::string::npos ? line.size() : b;
      return v;
    };
    e.id = field("id");
    e.split = field("split");
    e.image_path = field("image path");
    e.mask_path = field("mask path");
    if (!seen.insert(e.id).second)
      throw std::runtime_error("manifest '" + path + "': duplicate sample id '" +
                               e.id + "'");
    m.entries.push_back(e);
  }
  if (!have_n)
    throw std::runtime_error("manifest '" + path + "': missing 'n:' line");
  return m;
}

// Writes every sample plus the manifest under root; layout
// <root>/{train,val}/{img,msk}/<id>.pgm with the manifest at
// <root>/manifest.txt.
inline void save_dataset(const std::string& root, const SyntheticDataset& data) {
  namespace fs = std::filesystem;
  std::vector<const Sample*> all;
  for (const Sample& s : data.train) all.push_back(&s);
  for (const Sample& s : data.val) all.push_back(&s);
  for (const char* split : {"train", "val"}) {
    fs::create_directories(fs::path(root) / split / "img");
    fs::create_directories(fs::path(root) / split / "msk");
  }
  parallel_for(all.size(), [&](std::size_t k) {
    const Sample& s = *all[k];
    save_image_pgm((fs::path(root) / sample_image_rel(s)).string(), s.image);
    save_mask_pgm((fs::path(root) / sample_mask_rel(s)).string(), s.gt);
  });
  Manifest m;
  m.n = all.empty() ? 0 : all.front()->image.dim(0);
  for (const Sample* s : all)
    m.entries.push_back(
        ManifestEntry{s->id, s->split, sample_image_rel(*s), sample_mask_rel(*s)});
  save_manifest((fs::path(root) / "manifest.txt").string(), m);
}

// Loads a dataset directory back through its manifest, validating that every
// referenced file exists and matches the manifest's edge length.
inline SyntheticDataset load_dataset(const std::string& root) {
  namespace fs = std::filesystem;
  const Manifest m = load_manifest((fs::path(root) / "manifest.txt").string());
  SyntheticDataset out;
  std::vector<Sample> loaded(m.entries.size());
  std::vector<std::string> failures(m.entries.size());
  parallel_for(m.entries.size(), [&](std::size_t k) {
    const ManifestEntry& e = m.entries[k];
    try {
      Sample s;
      s.id = e.id;
      s.split = e.split;
      const fs::path img = fs::path(root) / e.image_path;
      const fs::path msk = fs::path(root) / e.mask_path;
      if (!fs::exists(img))
        throw std::runtime_error("missing image file '" + img.string() + "'");
      if (!fs::exists(msk))
        throw std::runtime_error("missing mask file '" + msk.string() + "'");
      s.image = load_image_pgm(img.string());
      s.gt = load_mask_pgm(msk.string());
      if (s.image.dim(0) != m.n || s.image.dim(1) != m.n)
        throw std::runtime_error("image is " + std::to_string(s.image.dim(0)) + "x" +
                                 std::to_string(s.image.dim(1)) + ", manifest says n = " +
                                 std::to_string(m.n));
      if (s.gt.shape() != s.image.shape())
        throw std::runtime_error("mask size differs from image size");
      loaded[k] = std::move(s);
    } catch (const std::exception& ex) {
      failures[k] = ex.what();
    }
  });
  for (std::size_t k = 0; k < m.entries.size(); ++k)
    if (!failures[k].empty())
      throw std::runtime_error("sample '" + m.entries[k].id + "': " + failures[k]);
  for (Sample& s : loaded) {
    if (s.split == "train") out.train.push_back(std::move(s));
    else if (s.split == "val") out.val.push_back(std::move(s));
    else
      throw std::runtime_error("sample '" + s.id + "': unknown split '" + s.split + "'");
  }
  return out;
}

}  // namespace adaug
