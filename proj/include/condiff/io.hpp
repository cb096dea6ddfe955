// Copyright (c) 2026 The condiff Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CONDIFF_IO_HPP
#define CONDIFF_IO_HPP

#include "condiff/tensor.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace condiff::io {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

// Little-endian primitives over iostreams. The build targets LE hosts; the
// helpers keep the on-disk layout explicit.
void write_u32(std::ostream& os, uint32_t v);
void write_u64(std::ostream& os, uint64_t v);
uint32_t read_u32(std::istream& is);
uint64_t read_u64(std::istream& is);
void write_bytes(std::ostream& os, const void* data, size_t len);
void read_bytes(std::istream& is, void* data, size_t len);
void write_string(std::ostream& os, const std::string& s);
std::string read_string(std::istream& is, size_t max_len = 1 << 20);

// Whole-file digest, used for reproducibility checks.
uint32_t file_crc32(const std::string& path);
std::vector<unsigned char> read_file(const std::string& path);

// 8-bit grayscale raster (binary PGM, maxval 255); pixel value = class index.
void write_pgm(const std::string& path, const Tensor<int>& labels, int batch_index = 0);
Tensor<int> read_pgm(const std::string& path);

// Sidecar "index name" text map next to exported masks.
void write_class_map(const std::string& path, int num_classes);

// Append-only structured run log: one JSON object per line.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::string& path);
  void append(const std::string& json_line);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

void ensure_dir(const std::string& path);

}  // namespace condiff::io

#endif  // CONDIFF_IO_HPP
