/*
 * Copyright 2026 The milcke Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "milcke/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "milcke/io.hpp"

namespace milcke {

namespace {

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  template <typename Derived>
  void doubles(const Eigen::DenseBase<Derived>& m) {
    // Row-major traversal regardless of storage order.
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) u64(std::bit_cast<std::uint64_t>(m(i, j)));
    }
  }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}
  bool at_end() const { return pos_ == in_.size(); }
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  template <typename Derived>
  void doubles(Eigen::DenseBase<Derived>& m) {
    need(static_cast<std::size_t>(m.size()) * 8);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    }
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

void write_tensors(Writer& w, const Matrix& q, const Matrix& c, const Vector& b) {
  w.doubles(q);
  w.doubles(c);
  w.doubles(b);
}

void read_tensors(Reader& r, Matrix& q, Matrix& c, Vector& b) {
  r.doubles(q);
  r.doubles(c);
  r.doubles(b);
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint) {
  const ModelParams& p = checkpoint.params;
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u8(static_cast<std::uint8_t>(p.variant));
  w.u32(static_cast<std::uint32_t>(p.relations()));
  w.u32(static_cast<std::uint32_t>(p.dim()));
  write_tensors(w, p.query, p.classifier, p.bias);
  if (checkpoint.optimizer) {
    const AdamWState& s = *checkpoint.optimizer;
    w.u64(s.step);
    write_tensors(w, s.first.query, s.first.classifier, s.first.bias);
    write_tensors(w, s.second.query, s.second.classifier, s.second.bias);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("checkpoint has bad magic (expected MILCKPT1)");
  }
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kCheckpointMagic); ++i) r.u8();
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Variant::kContrastiveAtt)) {
    throw FormatError("checkpoint has unknown variant tag " + std::to_string(tag));
  }
  const std::uint32_t relations = r.u32();
  const std::uint32_t dim = r.u32();
  if (relations == 0 || dim == 0) throw FormatError("checkpoint declares an empty parameter shape");

  Checkpoint ck;
  ck.params = ModelParams::zeros(static_cast<Variant>(tag), relations, dim);
  read_tensors(r, ck.params.query, ck.params.classifier, ck.params.bias);
  if (!r.at_end()) {
    AdamWState s = AdamWState::zeros_like(ck.params);
    s.step = r.u64();
    read_tensors(r, s.first.query, s.first.classifier, s.first.bias);
    read_tensors(r, s.second.query, s.second.classifier, s.second.bias);
    if (!r.at_end()) throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
    ck.optimizer = std::move(s);
  }
  if (!ck.params.all_finite()) throw FormatError("checkpoint contains non-finite parameters");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_bytes(path, encode_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace milcke
