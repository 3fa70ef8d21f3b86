// src/checkpoint.cpp

// Copyright 2026  The svc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "svc/config.hpp"
#include "svc/errors.hpp"
#include "svc/model.hpp"

// Layout (little-endian):
//   "SVCCKPT1" | u32 version | u32 n | n bytes of config JSON | u32 count |
//   count x { u32 name_len | name | u32 rows | u32 cols | rows*cols f32 } |
//   "SVCEND00"

namespace svc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'S', 'V', 'C', 'C', 'K', 'P', 'T', '1'};
constexpr char kEnd[8] = {'S', 'V', 'C', 'E', 'N', 'D', '0', '0'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

class Reader {
 public:
  Reader(std::istream& is, const std::filesystem::path& path) : is_(is), path_(path) {}

  void bytes(char* dst, std::size_t n) {
    if (!is_.read(dst, static_cast<std::streamsize>(n)))
      throw CorruptionError("checkpoint truncated: " + path_.string());
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  std::string str(std::uint32_t limit) {
    const std::uint32_t n = u32();
    if (n > limit) throw CorruptionError("checkpoint field length out of range: " + path_.string());
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& is_;
  const std::filesystem::path& path_;
};

}  // namespace

void checkpoint_save(const ModelBundle& bundle, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint: " + path.string());
    os.write(kMagic, 8);
    put_u32(os, kCheckpointVersion);
    const std::string cfg = model_config_to_json(bundle.config());
    put_u32(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put_u32(os, static_cast<std::uint32_t>(bundle.params().size()));
    for (const auto& p : bundle.params()) {
      put_u32(os, static_cast<std::uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put_u32(os, static_cast<std::uint32_t>(p.value.rows()));
      put_u32(os, static_cast<std::uint32_t>(p.value.cols()));
      os.write(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    }
    os.write(kEnd, 8);
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

ModelBundle checkpoint_load(const std::filesystem::path& path) {
  return checkpoint_load(path, kCheckpointVersion);
}

ModelBundle checkpoint_load(const std::filesystem::path& path, std::uint32_t reader_version) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint: " + path.string());
  Reader r(is, path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw CorruptionError("not a checkpoint file (bad magic): " + path.string());
  const std::uint32_t version = r.u32();
  if (version != reader_version) {
    throw VersionError("checkpoint version " + std::to_string(version) +
                       " does not match reader version " + std::to_string(reader_version) + ": " +
                       path.string());
  }

  ModelConfig cfg;
  try {
    cfg = model_config_from_json(r.str(1u << 20));
  } catch (const ArgumentError& e) {
    throw CorruptionError(std::string("checkpoint config unreadable: ") + e.what());
  }
  ModelBundle bundle(cfg, 0);

  const std::uint32_t count = r.u32();
  if (count != bundle.params().size()) {
    throw CorruptionError("checkpoint holds " + std::to_string(count) + " tensors, config expects " +
                          std::to_string(bundle.params().size()));
  }
  std::set<std::string> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(4096);
    auto* p = bundle.params().find(name);
    if (p == nullptr) throw CorruptionError("checkpoint has unknown tensor '" + name + "'");
    if (!loaded.insert(name).second) throw CorruptionError("checkpoint repeats tensor '" + name + "'");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw CorruptionError("shape mismatch for '" + name + "': file " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", config " + std::to_string(p->value.rows()) +
                            "x" + std::to_string(p->value.cols()));
    }
    r.bytes(reinterpret_cast<char*>(p->value.data()), p->value.size() * sizeof(float));
  }
  char end[8];
  r.bytes(end, 8);
  if (std::memcmp(end, kEnd, 8) != 0) throw CorruptionError("checkpoint end marker missing: " + path.string());
  return bundle;
}

}  // namespace svc
