#include "layoutprior/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "layoutprior/error.hpp"

namespace layoutprior {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void put_tensor(const std::string& name, const Tensor<float>& t) {
    put_string(name);
    put(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put(static_cast<std::int32_t>(d));
    buf_.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void get_floats(std::vector<float>& out, std::size_t n) {
    need(n * sizeof(float));
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::MalformedFile, "checkpoint ends inside a record");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const std::string& loader_state) {
  Writer w;
  w.bytes().append(kMagic, sizeof(kMagic));
  w.put(kCheckpointVersion);
  const ModelConfig& c = state.model.config();
  w.put(static_cast<std::int32_t>(c.vocab_size));
  w.put(static_cast<std::int32_t>(c.context));
  w.put(static_cast<std::int32_t>(c.layers));
  w.put(static_cast<std::int32_t>(c.heads));
  w.put(static_cast<std::int32_t>(c.embed_dim));
  w.put(c.dropout);
  w.put(c.seed);
  w.put(static_cast<std::int64_t>(state.step));
  std::ostringstream rng;
  rng << state.rng;
  w.put_string(rng.str());
  w.put_string(loader_state);

  const auto& params = state.model.params().tensors();
  w.put(static_cast<std::uint32_t>(params.size() * 3));
  for (const auto& t : params) w.put_tensor(t.name, t);
  for (const auto& t : state.m.tensors()) w.put_tensor("adam.m." + t.name, t);
  for (const auto& t : state.v.tensors()) w.put_tensor("adam.v." + t.name, t);
  w.put(checksum(w.bytes()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 2 * sizeof(std::uint32_t)) {
    throw Error(ErrorCode::ChecksumMismatch, path.string() + ": file too short to hold a checkpoint");
  }
  const std::string_view body(bytes.data(), bytes.size() - sizeof(std::uint32_t));
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
  if (checksum(body) != stored) throw Error(ErrorCode::ChecksumMismatch, path.string() + ": checksum mismatch");
  if (std::memcmp(body.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": not a checkpoint file");
  }

  Reader r(body.substr(sizeof(kMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": format version " + std::to_string(version) +
                                                ", expected " + std::to_string(kCheckpointVersion));
  }
  ModelConfig c;
  c.vocab_size = r.get<std::int32_t>();
  c.context = r.get<std::int32_t>();
  c.layers = r.get<std::int32_t>();
  c.heads = r.get<std::int32_t>();
  c.embed_dim = r.get<std::int32_t>();
  c.dropout = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  if (expected_vocab && *expected_vocab != c.vocab_size) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": vocab size " + std::to_string(c.vocab_size) +
                                                " does not match vocabulary size " + std::to_string(*expected_vocab));
  }
  c.validate();
  const auto step = r.get<std::int64_t>();
  const std::string rng_text = r.get_string();
  std::string loader_state = r.get_string();

  LoadedCheckpoint out{TrainState(Parameters<float>(c)), std::move(loader_state)};
  out.state.step = step;
  std::istringstream rng_in(rng_text);
  rng_in >> out.state.rng;
  if (!rng_in) throw Error(ErrorCode::MalformedFile, path.string() + ": unreadable rng state");

  std::unordered_map<std::string, Tensor<float>*> slots;
  for (auto& t : out.state.model.params().tensors()) slots[t.name] = &t;
  for (auto& t : out.state.m.tensors()) slots["adam.m." + t.name] = &t;
  for (auto& t : out.state.v.tensors()) slots["adam.v." + t.name] = &t;

  const auto count = r.get<std::uint32_t>();
  if (count != slots.size()) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": expected " + std::to_string(slots.size()) +
                                              " tensors, found " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw Error(ErrorCode::MalformedFile, path.string() + ": bad rank for tensor " + name);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = r.get<std::int32_t>();
    auto it = slots.find(name);
    if (it == slots.end()) throw Error(ErrorCode::MalformedFile, path.string() + ": unknown tensor " + name);
    if (it->second->shape != shape) throw Error(ErrorCode::MalformedFile, path.string() + ": shape mismatch for " + name);
    r.get_floats(it->second->data, it->second->data.size());
    slots.erase(it);
  }
  if (!r.done()) throw Error(ErrorCode::MalformedFile, path.string() + ": trailing bytes");
  return out;
}

}  // namespace layoutprior
