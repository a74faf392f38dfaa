// Copyright 2026 The cmgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cmgan/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "cmgan/error.hpp"

namespace cmgan {
namespace {

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ' ' || c == '\n' || c == '\t') return false;
  return true;
}

}  // namespace

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  if (!valid_token(key)) throw UsageError("checkpoint meta key must be a single token: '" + key + "'");
  if (value.find('\n') != std::string::npos) throw UsageError("checkpoint meta value spans lines: " + key);
  for (auto& [k, v] : meta_)
    if (k == key) {
      v = value;
      return;
    }
  meta_.emplace_back(key, value);
}

bool Checkpoint::has_meta(const std::string& key) const {
  for (const auto& kv : meta_)
    if (kv.first == key) return true;
  return false;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  for (const auto& kv : meta_)
    if (kv.first == key) return kv.second;
  throw IoError("checkpoint has no meta entry '" + key + "'");
}

void Checkpoint::add(const std::string& name, Tensor<float> t) {
  if (!valid_token(name)) throw UsageError("checkpoint tensor name must be a single token: '" + name + "'");
  if (has(name)) throw UsageError("duplicate checkpoint tensor " + name);
  tensors_.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& kv : tensors_)
    if (kv.first == name) return true;
  return false;
}

const Tensor<float>& Checkpoint::get(const std::string& name) const {
  for (const auto& kv : tensors_)
    if (kv.first == name) return kv.second;
  throw IoError("checkpoint has no tensor '" + name + "'");
}

void Checkpoint::add64(const std::string& name, Tensor<double> t) {
  if (!valid_token(name)) throw UsageError("checkpoint tensor name must be a single token: '" + name + "'");
  if (has64(name)) throw UsageError("duplicate checkpoint tensor " + name);
  tensors64_.emplace_back(name, std::move(t));
}

bool Checkpoint::has64(const std::string& name) const {
  for (const auto& kv : tensors64_)
    if (kv.first == name) return true;
  return false;
}

const Tensor<double>& Checkpoint::get64(const std::string& name) const {
  for (const auto& kv : tensors64_)
    if (kv.first == name) return kv.second;
  throw IoError("checkpoint has no tensor64 '" + name + "'");
}

std::string Checkpoint::serialize() const {
  std::ostringstream head;
  head << kMagic << '\n';
  for (const auto& [k, v] : meta_) head << "meta " << k << ' ' << v << '\n';
  std::string body;
  for (const auto& [name, t] : tensors_) {
    const Shape& s = t.shape();
    head << "tensor " << name << ' ' << body.size() << ' ' << s.n << ' ' << s.c << ' ' << s.h << ' '
         << s.w << '\n';
    body += encode_blob(t);
  }
  for (const auto& [name, t] : tensors64_) {
    const Shape& s = t.shape();
    head << "tensor64 " << name << ' ' << body.size() << ' ' << s.n << ' ' << s.c << ' ' << s.h << ' '
         << s.w << '\n';
    body += encode_blob(t);
  }
  head << "end\n";
  return head.str() + body;
}

Checkpoint Checkpoint::parse(std::string_view bytes) {
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw IoError("checkpoint is truncated (manifest incomplete)");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (bytes.substr(0, 5) != "CKPT-")
    throw VersionError("not a checkpoint file (bad magic)");
  std::string magic = next_line();
  if (magic != kMagic) throw VersionError("unsupported checkpoint version '" + magic + "', expected CKPT-V1");

  struct Entry {
    std::string name;
    size_t offset;
    Shape shape;
    bool wide;
  };
  Checkpoint ck;
  std::vector<Entry> entries;
  for (;;) {
    std::string line = next_line();
    if (line == "end") break;
    if (line.rfind("meta ", 0) == 0) {
      size_t sp = line.find(' ', 5);
      if (sp == std::string::npos) {
        ck.set_meta(line.substr(5), "");
      } else {
        ck.set_meta(line.substr(5, sp - 5), line.substr(sp + 1));
      }
    } else if (line.rfind("tensor ", 0) == 0 || line.rfind("tensor64 ", 0) == 0) {
      Entry e;
      e.wide = line[6] == '6';
      std::istringstream is(line.substr(e.wide ? 9 : 7));
      if (!(is >> e.name >> e.offset >> e.shape.n >> e.shape.c >> e.shape.h >> e.shape.w))
        throw IoError("malformed checkpoint manifest line: " + line);
      entries.push_back(e);
    } else {
      throw IoError("unexpected checkpoint manifest line: " + line);
    }
  }
  std::string_view body = bytes.substr(pos);
  for (const Entry& e : entries) {
    size_t len = 20 + static_cast<size_t>(e.shape.numel()) * (e.wide ? sizeof(double) : sizeof(float));
    if (e.offset + len > body.size())
      throw IoError("checkpoint is truncated (tensor " + e.name + " extends past end of file)");
    std::string_view blob = body.substr(e.offset, len);
    if (peek_blob_shape(blob) != e.shape)
      throw IoError("checkpoint manifest shape disagrees with blob for " + e.name);
    if (e.wide) {
      ck.add64(e.name, decode_blob<double>(blob));
    } else {
      ck.add(e.name, decode_blob<float>(blob));
    }
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::string bytes = serialize();
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename " + tmp + " to " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

template <typename T>
void store_parameters(Checkpoint& ck, const std::vector<Parameter<T>*>& params) {
  for (const Parameter<T>* p : params) ck.add(p->name, p->value.template cast<float>());
}

template <typename T>
void load_parameters(const Checkpoint& ck, const std::vector<Parameter<T>*>& params) {
  for (Parameter<T>* p : params) {
    const Tensor<float>& t = ck.get(p->name);
    if (t.shape() != p->value.shape())
      throw IoError("checkpoint tensor " + p->name + " has shape " + t.shape().str() + ", model expects " +
                    p->value.shape().str());
    p->value = t.cast<T>();
    p->zero_grad();
  }
}

template void store_parameters(Checkpoint&, const std::vector<Parameter<float>*>&);
template void store_parameters(Checkpoint&, const std::vector<Parameter<double>*>&);
template void load_parameters(const Checkpoint&, const std::vector<Parameter<float>*>&);
template void load_parameters(const Checkpoint&, const std::vector<Parameter<double>*>&);

}  // namespace cmgan
