#include "tavp/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tavp {

namespace {

const char kMagic[4] = {'T', 'A', 'V', 'P'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorKind::CheckpointTruncated, "checkpoint ends mid-record");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const net::ParamStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::LoadError, "cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, kCheckpointVersion);
  put<uint32_t>(out, meta.stage);
  put<uint64_t>(out, meta.arch);
  put<uint32_t>(out, static_cast<uint32_t>(meta.parents.size()));
  for (uint64_t h : meta.parents) put<uint64_t>(out, h);

  put<uint32_t>(out, static_cast<uint32_t>(store.entries().size()));
  uint64_t offset = 0;
  for (const auto& e : store.entries()) {
    put<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(e.value.shape.size()));
    for (int64_t d : e.value.shape) put<uint64_t>(out, static_cast<uint64_t>(d));
    put<uint64_t>(out, offset);
    offset += static_cast<uint64_t>(e.value.numel());
  }
  put<uint64_t>(out, offset);
  for (const auto& e : store.entries())
    out.write(reinterpret_cast<const char*>(e.value.data.data()),
              static_cast<std::streamsize>(e.value.data.size() * sizeof(double)));
  if (!out) fail(ErrorKind::LoadError, "short write while saving checkpoint: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, net::ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::LoadError, "cannot open checkpoint: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorKind::CheckpointMagic, "not a checkpoint file: " + path);
  const uint32_t version = take<uint32_t>(in);
  if (version != kCheckpointVersion)
    fail(ErrorKind::CheckpointVersion,
         "unsupported checkpoint version " + std::to_string(version));

  CheckpointMeta meta;
  meta.stage = take<uint32_t>(in);
  meta.arch = take<uint64_t>(in);
  const uint32_t n_parents = take<uint32_t>(in);
  meta.parents.reserve(n_parents);
  for (uint32_t i = 0; i < n_parents; ++i) meta.parents.push_back(take<uint64_t>(in));

  struct Record {
    std::string name;
    std::vector<int64_t> shape;
    uint64_t offset = 0;
    int64_t numel = 0;
  };
  const uint32_t n_tensors = take<uint32_t>(in);
  std::vector<Record> manifest(n_tensors);
  uint64_t expect_offset = 0;
  for (auto& r : manifest) {
    const uint32_t name_len = take<uint32_t>(in);
    r.name.resize(name_len);
    in.read(r.name.data(), name_len);
    if (!in) fail(ErrorKind::CheckpointTruncated, "checkpoint ends mid-record");
    const uint32_t ndim = take<uint32_t>(in);
    r.numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      r.shape.push_back(static_cast<int64_t>(take<uint64_t>(in)));
      r.numel *= r.shape.back();
    }
    r.offset = take<uint64_t>(in);
    if (r.offset != expect_offset || r.numel <= 0)
      fail(ErrorKind::CheckpointShape, "tensor '" + r.name + "' has an inconsistent manifest entry");
    expect_offset += static_cast<uint64_t>(r.numel);
  }
  const uint64_t blob_elems = take<uint64_t>(in);
  if (blob_elems != expect_offset)
    fail(ErrorKind::CheckpointTruncated, "checkpoint blob size disagrees with the manifest");

  // An already-populated store pins the expected shapes.
  for (const auto& r : manifest) {
    if (!store.has(r.name)) continue;
    const auto& have = store.value(r.name).shape;
    if (have != r.shape)
      fail(ErrorKind::CheckpointShape, "tensor '" + r.name + "' has shape " + net::shape_str(r.shape) +
                                           " in the file but " + net::shape_str(have) + " in memory");
  }

  std::vector<double> blob(blob_elems);
  in.read(reinterpret_cast<char*>(blob.data()),
          static_cast<std::streamsize>(blob_elems * sizeof(double)));
  if (!in) fail(ErrorKind::CheckpointTruncated, "checkpoint blob is shorter than its manifest");

  net::ParamStore fresh;
  fresh.set_seed(store.seed());
  for (const auto& r : manifest) {
    net::Tensor t;
    t.shape = r.shape;
    t.data.assign(blob.begin() + static_cast<std::ptrdiff_t>(r.offset),
                  blob.begin() + static_cast<std::ptrdiff_t>(r.offset + static_cast<uint64_t>(r.numel)));
    fresh.create(r.name, std::move(t));
  }
  store = std::move(fresh);
  return meta;
}

}  // namespace tavp
