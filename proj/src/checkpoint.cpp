#include "ghq/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace ghq {

namespace {

template <typename T>
void write_raw(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

constexpr char kMagic[4] = {'G', 'H', 'Q', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const std::vector<CheckpointRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    f.write(kMagic, 4);
    write_raw<std::uint32_t>(f, kVersion);
    write_raw<std::uint32_t>(f, (std::uint32_t)meta_json.size());
    f.write(meta_json.data(), (std::streamsize)meta_json.size());
    write_raw<std::uint64_t>(f, (std::uint64_t)records.size());
    for (const auto& r : records) {
        write_raw<std::uint32_t>(f, (std::uint32_t)r.name.size());
        f.write(r.name.data(), (std::streamsize)r.name.size());
        write_raw<std::uint32_t>(f, (std::uint32_t)r.tensor.shape.size());
        for (std::size_t d : r.tensor.shape) write_raw<std::uint64_t>(f, d);
        f.write(reinterpret_cast<const char*>(r.tensor.data.data()),
                (std::streamsize)(r.tensor.data.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = read_raw<std::uint32_t>(f);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    std::uint32_t meta_len = read_raw<std::uint32_t>(f);
    Checkpoint ck;
    ck.meta_json.resize(meta_len);
    f.read(ck.meta_json.data(), meta_len);
    std::uint64_t n = read_raw<std::uint64_t>(f);
    for (std::uint64_t i = 0; i < n; ++i) {
        CheckpointRecord r;
        std::uint32_t name_len = read_raw<std::uint32_t>(f);
        r.name.resize(name_len);
        f.read(r.name.data(), name_len);
        std::uint32_t ndim = read_raw<std::uint32_t>(f);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = (std::size_t)read_raw<std::uint64_t>(f);
        std::size_t count = Tensor::numel(shape);
        std::vector<double> data(count);
        f.read(reinterpret_cast<char*>(data.data()),
               (std::streamsize)(count * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint: truncated tensor data");
        r.tensor = Tensor(std::move(shape), std::move(data));
        ck.records.push_back(std::move(r));
    }
    return ck;
}

}  // namespace ghq
