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

#include "condiff/io.hpp"

#include <array>
#include <filesystem>

namespace condiff::io {

namespace {
std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}
}  // namespace

uint32_t crc32(const void* data, size_t len, uint32_t seed) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  write_u32(os, static_cast<uint32_t>(v));
  write_u32(os, static_cast<uint32_t>(v >> 32));
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("unexpected end of file");
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint64_t read_u64(std::istream& is) {
  const uint64_t lo = read_u32(is);
  const uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

void write_bytes(std::ostream& os, const void* data, size_t len) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void read_bytes(std::istream& is, void* data, size_t len) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("unexpected end of file");
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

std::string read_string(std::istream& is, size_t max_len) {
  const uint32_t n = read_u32(is);
  if (n > max_len) throw std::runtime_error("string field exceeds sane length");
  std::string s(n, '\0');
  if (n > 0) read_bytes(is, s.data(), n);
  return s;
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

uint32_t file_crc32(const std::string& path) {
  auto bytes = read_file(path);
  return crc32(bytes.data(), bytes.size());
}

void write_pgm(const std::string& path, const Tensor<int>& labels, int batch_index) {
  int H, W;
  const int* base;
  if (labels.rank() == 3) {
    H = labels.dim(1);
    W = labels.dim(2);
    base = labels.data() + static_cast<int64_t>(batch_index) * H * W;
  } else if (labels.rank() == 2) {
    H = labels.dim(0);
    W = labels.dim(1);
    base = labels.data();
  } else {
    throw std::invalid_argument("write_pgm: expects [H, W] or [B, H, W]");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f << "P5\n" << W << " " << H << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(W));
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const int v = base[static_cast<int64_t>(i) * W + j];
      if (v < 0 || v > 255) throw std::out_of_range("write_pgm: class index exceeds 8 bits");
      row[static_cast<size_t>(j)] = static_cast<unsigned char>(v);
    }
    f.write(reinterpret_cast<const char*>(row.data()), W);
  }
}

Tensor<int> read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::string magic;
  int W = 0, H = 0, maxval = 0;
  f >> magic >> W >> H >> maxval;
  if (magic != "P5" || maxval != 255) throw std::runtime_error("not an 8-bit binary PGM");
  f.get();  // single whitespace after the header
  Tensor<int> labels({H, W});
  std::vector<unsigned char> row(static_cast<size_t>(W));
  for (int i = 0; i < H; ++i) {
    f.read(reinterpret_cast<char*>(row.data()), W);
    if (!f) throw std::runtime_error("truncated PGM payload");
    for (int j = 0; j < W; ++j) labels[static_cast<int64_t>(i) * W + j] = row[static_cast<size_t>(j)];
  }
  return labels;
}

void write_class_map(const std::string& path, int num_classes) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f << "0 background\n";
  for (int k = 1; k < num_classes; ++k) f << k << " class_" << k << "\n";
}

RunLog::RunLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open run log: " + path);
}

void RunLog::append(const std::string& json_line) {
  out_ << json_line << "\n";
  out_.flush();
}

void ensure_dir(const std::string& path) { std::filesystem::create_directories(path); }

}  // namespace condiff::io
