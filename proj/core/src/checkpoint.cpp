// SPDX-License-Identifier: Apache-2.0
#include "segzsl/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "segzsl/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace segzsl {

namespace {
void append_u32(std::string& buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.append(bytes, 4);
}
}  // namespace

FramedWriter::FramedWriter(std::filesystem::path path,
                           const std::string& header_json)
    : path_(std::move(path)) {
  buffer_.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u32(buffer_, kCheckpointVersion);
  append_u32(buffer_, static_cast<std::uint32_t>(header_json.size()));
  buffer_.append(header_json);
}

void FramedWriter::write_tensor(const Tensor& t) {
  const std::size_t bytes = t.numel() * sizeof(double);
  const std::size_t offset = buffer_.size();
  buffer_.resize(offset + bytes);
  std::memcpy(buffer_.data() + offset, t.data().data(), bytes);
}

void FramedWriter::finish() {
  if (finished_) return;
  write_text_atomic(path_, buffer_);
  finished_ = true;
}

FramedReader::FramedReader(std::filesystem::path path)
    : path_(std::move(path)), in_(path_, std::ios::binary) {
  if (!in_) {
    fail(Errc::io_failure, "cannot open " + path_.string());
  }
  char magic[8];
  read_raw(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail(Errc::format_version,
         path_.string() + ": not a SEGZSLCK checkpoint file");
  }
  std::uint32_t version = 0;
  read_raw(&version, sizeof(version), "version");
  if (version != kCheckpointVersion) {
    fail(Errc::format_version,
         path_.string() + ": checkpoint version " + std::to_string(version) +
             " unsupported (expected " + std::to_string(kCheckpointVersion) +
             ")");
  }
  std::uint32_t header_len = 0;
  read_raw(&header_len, sizeof(header_len), "header length");
  header_json_.resize(header_len);
  read_raw(header_json_.data(), header_len, "header");
}

void FramedReader::read_raw(void* out, std::size_t bytes, const char* what) {
  if (bytes == 0) return;
  in_.read(static_cast<char*>(out), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in_.gcount()) != bytes) {
    fail(Errc::truncated_file,
         path_.string() + ": truncated while reading " + std::string(what));
  }
}

Tensor FramedReader::read_tensor(std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  read_raw(t.data().data(), t.numel() * sizeof(double), "tensor payload");
  return t;
}

void FramedReader::expect_end() {
  char probe;
  in_.read(&probe, 1);
  if (in_.gcount() != 0) {
    fail(Errc::format_version,
         path_.string() + ": trailing bytes after declared payload");
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_failure, "cannot open " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::io_failure, "read failed for " + path.string());
  return contents;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(Errc::io_failure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail(Errc::io_failure,
         "rename " + tmp.string() + " -> " + path.string() + ": " +
             ec.message());
  }
}

}  // namespace segzsl
